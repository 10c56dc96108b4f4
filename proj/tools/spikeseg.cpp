// spikeseg: corpus generation, training and gated segmentation runs.
//
//   spikeseg gen SCENE.ini --out DIR
//   spikeseg train --corpus DIR/manifest.txt --net desk --out RUN
//   spikeseg run --corpus M --checkpoint RUN/model.segw --theta 5 --grid 1x3 --out OUT
//   spikeseg sweep --corpus M --checkpoint C --theta 4,4.75,5.25,6,8,10 --out OUT
//   spikeseg ablate-warp --corpus M --checkpoint C --theta 2,4 --out OUT
//   spikeseg report OUT/report.csv
//
// Every option can also come from the --config INI file, in a section named
// after the subcommand; command-line values win.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "spikeseg.hpp"

namespace {

using namespace spikeseg;

struct Eval {
  std::string corpus, checkpoint, net = "desk", out = "out", grid = "1x3", interval = "keyframe";
  std::vector<std::string> theta{"0"};
  std::uint64_t seed = 1;
  int overlap = 20, reset_period = 5, threads = 1;
  bool warp = false;

  cli::EvalOptions resolve() const {
    cli::EvalOptions o;
    o.corpus = corpus;
    if (!checkpoint.empty()) o.checkpoint = checkpoint;
    o.net = net;
    o.seed = seed;
    o.out = out;
    o.thetas = cli::parse_theta_list(theta);
    o.grids = cli::parse_grid_list(grid);
    o.overlap = overlap;
    o.reset_period = reset_period;
    o.threads = threads;
    if (interval == "keyframe") {
      o.interval = DensityInterval::SinceKeyframe;
    } else if (interval == "frame") {
      o.interval = DensityInterval::PreviousFrame;
    } else {
      throw Error(Errc::ConfigInvalid, "interval must be keyframe or frame, got " + interval);
    }
    o.warp = warp;
    return o;
  }
};

void add_eval_flags(CLI::App* cmd, Eval& e, bool multi) {
  cmd->add_option("--corpus", e.corpus, "Sequence manifest")->required();
  cmd->add_option("--checkpoint", e.checkpoint, "SEGW checkpoint (otherwise an untrained --net)");
  cmd->add_option("--net", e.net, "reference, desk or a network INI file");
  cmd->add_option("--seed", e.seed, "Seed for an untrained network");
  cmd->add_option("--out", e.out, "Output directory");
  cmd->add_option("--theta", e.theta, multi ? "Thresholds, comma separated; inf allowed" : "Threshold (events/pixel)")
      ->delimiter(',');
  cmd->add_option("--grid", e.grid, multi ? "Grid(s) RxC, comma separated" : "Grid RxC");
  cmd->add_option("--overlap", e.overlap, "Overlap between neighbouring regions (pixels)");
  cmd->add_option("--reset-period", e.reset_period, "Process every region on every Nth frame");
  cmd->add_option("--threads", e.threads, "Worker threads for region inference");
  cmd->add_option("--interval", e.interval, "Density interval: keyframe or frame");
}

std::string pct(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-density gated spiking segmentation"};
  app.set_config("--config", "", "INI file with one section per subcommand");
  app.require_subcommand(1);

  std::string gen_scene, gen_out = "corpus";
  std::uint64_t gen_seed = 0;
  auto* gen_cmd = app.add_subcommand("gen", "Render a synthetic corpus from a scene file");
  gen_cmd->add_option("scene", gen_scene, "Scene INI")->required();
  gen_cmd->add_option("--out", gen_out, "Corpus directory");
  auto* gen_seed_opt = gen_cmd->add_option("--seed", gen_seed, "Override the scene seed");

  std::string tr_corpus, tr_net = "desk", tr_out = "train";
  TrainConfig tc;
  auto* train_cmd = app.add_subcommand("train", "Train a network on a labelled corpus");
  train_cmd->add_option("--corpus", tr_corpus, "Sequence manifest")->required();
  train_cmd->add_option("--net", tr_net, "reference, desk or a network INI file");
  train_cmd->add_option("--out", tr_out, "Output directory (model.segw, train_log.csv)");
  train_cmd->add_option("--seed", tc.seed, "Seed for init, crops and batch order");
  train_cmd->add_option("--epochs", tc.epochs);
  train_cmd->add_option("--lr", tc.lr);
  train_cmd->add_option("--batch", tc.batch);
  train_cmd->add_option("--samples", tc.samples, "Training crops per epoch");
  std::string tr_grid = "1x3";
  train_cmd->add_option("--grid", tr_grid, "Held-out evaluation grid RxC");
  train_cmd->add_option("--overlap", tc.eval_overlap, "Held-out evaluation overlap");

  Eval run, sweep, warp;
  auto* run_cmd = app.add_subcommand("run", "Run the gated pipeline once, writing label maps");
  add_eval_flags(run_cmd, run, false);
  run_cmd->add_flag("--warp", run.warp, "Warp reused regions along the corpus flow");
  auto* sweep_cmd = app.add_subcommand("sweep", "Threshold and grid sweep report");
  add_eval_flags(sweep_cmd, sweep, true);
  auto* warp_cmd = app.add_subcommand("ablate-warp", "Copy against flow-warp reuse at each threshold");
  add_eval_flags(warp_cmd, warp, true);

  std::string report_in;
  auto* report_cmd = app.add_subcommand("report", "Print a report CSV as a table");
  report_cmd->add_option("csv", report_in, "Report CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen_cmd) {
      cli::GenOptions gen;
      gen.scene = gen_scene;
      gen.out = gen_out;
      if (gen_seed_opt->count() > 0) gen.seed = gen_seed;
      std::cout << cli::cmd_gen(gen).string() << "\n";
    } else if (*train_cmd) {
      cli::TrainOptions o;
      o.corpus = tr_corpus;
      o.net = tr_net;
      o.out = tr_out;
      const auto g = cli::parse_grid(tr_grid);
      tc.eval_rows = g.rows;
      tc.eval_cols = g.cols;
      o.train = tc;
      cli::cmd_train(o, [](const EpochLog& e) {
        std::printf("epoch %3d  loss %.4f  heldout MIoU %s%%  activation %.4f\n", e.epoch, e.loss,
                    pct(e.heldout_miou).c_str(), e.activation_rate);
        std::fflush(stdout);
      });
      std::cout << (std::filesystem::path(tr_out) / "model.segw").string() << "\n";
    } else if (*run_cmd) {
      const auto rep = cli::cmd_run(run.resolve());
      std::printf("frames %zu  MIoU %s%%  FPS %.2f  ACC %llu  MAC %llu  processed %llu\n", rep.frames,
                  pct(rep.miou).c_str(), rep.fps, static_cast<unsigned long long>(rep.flops.acc),
                  static_cast<unsigned long long>(rep.flops.mac),
                  static_cast<unsigned long long>(rep.total_processed()));
    } else if (*sweep_cmd) {
      std::cout << format_report(cli::cmd_sweep(sweep.resolve()));
    } else if (*warp_cmd) {
      std::cout << format_warp_report(cli::cmd_ablate_warp(warp.resolve()));
    } else if (*report_cmd) {
      std::cout << cli::cmd_report(report_in);
    }
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "Internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
