#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <limits>

#include "spikeseg.hpp"
#include "test_util.hpp"

using namespace spikeseg;
using testutil::code_of;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

const char* kSmallScene = R"(
[scene]
width = 96
height = 48
classes = 4
frames = 16
c_ev = 0.05
seed = 3
background = 30

[primitive.road]
shape = rect
class = 1
x = 0
y = 38
width = 96
height = 10

[primitive.car]
shape = rect
class = 2
x = 4
y = 4
width = 16
height = 12
vx = 3
bounds = 0,0,96,18

[primitive.sign]
shape = disk
class = 3
x = 70
y = 22
width = 12
vx = -1
bounds = 0,18,96,36
)";

fs::path small_corpus(const TempDir& tmp) {
  const auto scene = tmp.path() / "small.ini";
  io::write_text(scene, kSmallScene);
  return cli::cmd_gen({scene, tmp.path() / "corpus", std::nullopt});
}

struct Shell {
  int code;
  std::string out;
  std::string err;
};

Shell run_cli(const std::string& args, const fs::path& dir) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + SPIKESEG_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, io::read_text(out), io::read_text(err)};
}

std::vector<std::uint8_t> bytes(const fs::path& p) {
  const auto text = io::read_text(p);
  return {text.begin(), text.end()};
}

}  // namespace

TEST(Parsing, Grids) {
  EXPECT_EQ(cli::parse_grid("3x1").rows, 3);
  EXPECT_EQ(cli::parse_grid("3x1").cols, 1);
  const auto list = cli::parse_grid_list("1x3,3x1,2x2,3x3");
  ASSERT_EQ(list.size(), 4u);
  EXPECT_EQ(list[3].name(), "3x3");
  for (const char* bad : {"", "3", "x3", "3x", "0x2", "2x-1", "2x2x", "axb"}) {
    EXPECT_EQ(code_of([&] { cli::parse_grid(bad); }), Errc::ConfigInvalid) << bad;
  }
  EXPECT_EQ(code_of([] { cli::parse_grid_list(","); }), Errc::ConfigInvalid);
}

TEST(Parsing, Thetas) {
  const auto t = cli::parse_theta_list({"0,4.75", "inf"});
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[1], 4.75);
  EXPECT_TRUE(std::isinf(t[2]));
  EXPECT_EQ(cli::theta_name(t[2]), "inf");
  EXPECT_EQ(cli::theta_name(5.25), "5.25");
  for (const char* bad : {"-1", "nan", "5x", ""}) {
    EXPECT_EQ(code_of([&] { cli::parse_theta(bad); }), Errc::ConfigInvalid) << bad;
  }
  EXPECT_EQ(code_of([] { cli::parse_theta_list({""}); }), Errc::ConfigInvalid);
}

TEST(Gen, SingleFrameScene) {
  TempDir tmp("cli");
  const auto scene = tmp.path() / "one.ini";
  std::string text = kSmallScene;
  text.replace(text.find("frames = 16"), 11, "frames = 1");
  io::write_text(scene, text);
  const auto manifest = cli::cmd_gen({scene, tmp.path() / "c", std::nullopt});
  const ManifestSource src(manifest);
  EXPECT_EQ(src.size(), 1u);
  EXPECT_TRUE(src.load(0).events.empty());
  EXPECT_TRUE(fs::exists(tmp.path() / "c" / "scene.ini"));
}

TEST(Gen, IsByteIdenticalAcrossRuns) {
  TempDir tmp("cli");
  const auto scene = tmp.path() / "s.ini";
  io::write_text(scene, kSmallScene);
  const auto a = cli::cmd_gen({scene, tmp.path() / "a", std::nullopt});
  const auto b = cli::cmd_gen({scene, tmp.path() / "b", std::nullopt});
  for (const char* f : {"frames/frame_00007.pgm", "events/events_00007.evt", "flows/flow_00007.flw"}) {
    EXPECT_EQ(bytes(a.parent_path() / f), bytes(b.parent_path() / f)) << f;
  }
}

TEST(Gen, UnwritableOutput) {
  TempDir tmp("cli");
  const auto scene = tmp.path() / "s.ini";
  io::write_text(scene, kSmallScene);
  try {
    cli::cmd_gen({scene, "/proc/spikeseg_corpus", std::nullopt});
    FAIL() << "no error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IoFailure);
    EXPECT_NE(e.context().find("/proc/spikeseg_corpus"), std::string::npos);
  }
  EXPECT_EQ(code_of([&] { cli::cmd_gen({tmp.path() / "absent.ini", tmp.path() / "x", std::nullopt}); }),
            Errc::IoFailure);
}

TEST(Train, LossDropsAndRunsAreReproducible) {
  TempDir tmp("cli");
  const auto manifest = small_corpus(tmp);
  cli::TrainOptions o;
  o.corpus = manifest;
  o.out = tmp.path() / "run1";
  o.train.epochs = 4;
  o.train.samples = 24;
  const auto a = cli::cmd_train(o);
  ASSERT_EQ(a.log.size(), 5u);
  EXPECT_LT(a.log.back().loss, a.log.front().loss);
  for (const auto& e : a.log) {
    ASSERT_TRUE(e.heldout_miou.has_value());
    EXPECT_GT(e.activation_rate, 0.0);
    EXPECT_LT(e.activation_rate, 1.0);
  }
  o.out = tmp.path() / "run2";
  cli::cmd_train(o);
  EXPECT_EQ(bytes(tmp.path() / "run1" / "model.segw"), bytes(tmp.path() / "run2" / "model.segw"));
  EXPECT_EQ(io::read_text(tmp.path() / "run1" / "train_log.csv"), io::read_text(tmp.path() / "run2" / "train_log.csv"));
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  TempDir tmp("cli");
  const auto manifest = small_corpus(tmp);
  cli::TrainOptions o;
  o.corpus = manifest;
  o.out = tmp.path() / "run";
  o.train.epochs = 2;
  o.train.samples = 8;
  o.train.lr = 0.0;
  auto res = cli::cmd_train(o);
  for (const auto& e : res.log) EXPECT_EQ(e.loss, res.log.front().loss);
  snn::Network<float> init(snn::desk_spec(4), o.train.seed);
  const auto trained = res.net.params();
  const auto fresh = init.params();
  ASSERT_EQ(trained.size(), fresh.size());
  for (std::size_t i = 0; i < fresh.size(); ++i) EXPECT_EQ(trained[i]->value, fresh[i]->value) << fresh[i]->name;
}

TEST(Sweep, ZeroThetaGivesTwoRows) {
  TempDir tmp("cli");
  cli::EvalOptions o;
  o.corpus = small_corpus(tmp);
  o.out = tmp.path() / "sweep";
  const auto rep = cli::cmd_sweep(o);
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_EQ(rep.rows[0].variant, "baseline");
  EXPECT_EQ(rep.rows[0].grid, "1x1");
  EXPECT_EQ(rep.rows[1].variant, "split");
  EXPECT_EQ(rep.rows[1].grid, "1x3");
  EXPECT_EQ(rep.rows[0].fps_multiplier, 1.0);
  EXPECT_TRUE(fs::exists(o.out / "report.txt"));
}

TEST(Sweep, ProcessedColumnIsMonotone) {
  TempDir tmp("cli");
  cli::EvalOptions o;
  o.corpus = small_corpus(tmp);
  o.out = tmp.path() / "sweep";
  o.thetas = cli::parse_theta_list({"0,0.5,1,2,4,8,inf"});
  cli::cmd_sweep(o);
  const auto rep = parse_report_csv(io::read_text(o.out / "report.csv"));
  ASSERT_EQ(rep.rows.size(), 8u);
  for (std::size_t i = 2; i < rep.rows.size(); ++i) {
    EXPECT_LE(rep.rows[i].total_processed(), rep.rows[i - 1].total_processed()) << i;
  }
  EXPECT_EQ(rep.rows.back().total_processed(), 3u * 4u);  // reset frames 0,5,10,15
}

TEST(Sweep, GridLayouts) {
  TempDir tmp("cli");
  cli::EvalOptions o;
  o.corpus = small_corpus(tmp);
  o.out = tmp.path() / "sweep";
  o.overlap = 8;
  o.thetas = {1.0};
  o.grids = cli::parse_grid_list("1x3,3x1,2x2,3x3");
  const auto rep = cli::cmd_sweep(o);
  std::vector<std::string> grids;
  for (const auto& r : rep.rows) {
    if (r.variant == "gated") grids.push_back(r.grid);
  }
  EXPECT_EQ(grids, (std::vector<std::string>{"1x3", "3x1", "2x2", "3x3"}));
  EXPECT_EQ(rep.rows.back().processed.size(), 9u);
}

TEST(Sweep, ReportRoundTripAndDeterminism) {
  TempDir tmp("cli");
  cli::EvalOptions o;
  o.corpus = small_corpus(tmp);
  o.thetas = {0.0, 1.0, 3.0};
  o.grids = cli::parse_grid_list("1x3,2x2");
  o.overlap = 8;
  o.out = tmp.path() / "a";
  const auto a = cli::cmd_sweep(o);
  o.out = tmp.path() / "b";
  const auto b = cli::cmd_sweep(o);
  EXPECT_TRUE(same_except_timing(a, b));
  const auto parsed = parse_report_csv(io::read_text(tmp.path() / "a" / "report.csv"));
  EXPECT_TRUE(same_except_timing(a, parsed));
  EXPECT_EQ(write_report_csv(parsed), write_report_csv(a));
  EXPECT_EQ(cli::cmd_report(tmp.path() / "a" / "report.csv"), format_report(a));
}

TEST(Run, LabelMapsAreReproducible) {
  TempDir tmp("cli");
  cli::EvalOptions o;
  o.corpus = small_corpus(tmp);
  o.thetas = {1.0};
  o.out = tmp.path() / "a";
  const auto rep = cli::cmd_run(o);
  EXPECT_EQ(rep.frames, 16u);
  o.out = tmp.path() / "b";
  cli::cmd_run(o);
  for (std::size_t i = 0; i < 16; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "labels/pred_%05zu.pgm", i);
    EXPECT_EQ(bytes(tmp.path() / "a" / name), bytes(tmp.path() / "b" / name)) << name;
  }
}

TEST(Run, CheckpointMatchesSeededNetwork) {
  TempDir tmp("cli");
  cli::EvalOptions o;
  o.corpus = small_corpus(tmp);
  o.seed = 9;
  o.out = tmp.path() / "seeded";
  const auto a = cli::cmd_run(o);
  snn::Network<float> net(snn::desk_spec(4), 9);
  snn::save_checkpoint(tmp.path() / "m.segw", net);
  o.checkpoint = tmp.path() / "m.segw";
  o.out = tmp.path() / "ckpt";
  const auto b = cli::cmd_run(o);
  EXPECT_EQ(a.miou, b.miou);
  EXPECT_EQ(a.flops, b.flops);
}

TEST(AblateWarp, StaticCorpusGivesIdenticalVariants) {
  TempDir tmp("cli");
  cli::EvalOptions o;
  o.corpus = cli::cmd_gen({testutil::data_path("scenes/static.ini"), tmp.path() / "static", std::nullopt});
  o.thetas = {0.0, 1.0, 4.0};
  o.out = tmp.path() / "warp";
  const auto rows = cli::cmd_ablate_warp(o);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) EXPECT_EQ(r.miou_of, r.miou_up);
  const auto csv = io::read_text(o.out / "warp.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "theta,miou_of,fps_of,miou_up,fps_up");
}

TEST(AblateWarp, MissingFlowFile) {
  TempDir tmp("cli");
  cli::EvalOptions o;
  o.corpus = small_corpus(tmp);
  o.out = tmp.path() / "warp";
  // Drop the flow column from the manifest.
  std::string m = io::read_text(o.corpus), stripped;
  std::istringstream in(m);
  for (std::string line; std::getline(in, line);) {
    std::istringstream f(line);
    std::string a, b, c;
    f >> a >> b >> c;
    stripped += a + " " + b + " " + c + "\n";
  }
  io::write_text(o.corpus, stripped);
  EXPECT_EQ(code_of([&] { cli::cmd_ablate_warp(o); }), Errc::MissingFlow);
}

TEST(Binary, ExitCodesAndErrorCategories) {
  TempDir tmp("cli");
  const auto manifest = small_corpus(tmp);
  const auto ok = run_cli("report \"" + (tmp.path() / "none.csv").string() + "\"", tmp.path());
  EXPECT_EQ(ok.code, 1);
  EXPECT_EQ(ok.err.rfind("IoFailure: ", 0), 0u) << ok.err;
  EXPECT_NE(ok.err.find("none.csv"), std::string::npos);

  const auto bad_grid = run_cli("run --corpus \"" + manifest.string() + "\" --grid 3 --out x", tmp.path());
  EXPECT_EQ(bad_grid.code, 1);
  EXPECT_EQ(bad_grid.err.rfind("ConfigInvalid: ", 0), 0u) << bad_grid.err;

  const auto good = run_cli("sweep --corpus \"" + manifest.string() + "\" --theta 0,2 --out \"" +
                                (tmp.path() / "s").string() + "\"",
                            tmp.path());
  EXPECT_EQ(good.code, 0) << good.err;
  EXPECT_TRUE(good.err.empty());
  EXPECT_NE(good.out.find("baseline"), std::string::npos);

  const auto rep = run_cli("report \"" + (tmp.path() / "s" / "report.csv").string() + "\"", tmp.path());
  EXPECT_EQ(rep.code, 0);
  EXPECT_EQ(rep.out, cli::cmd_report(tmp.path() / "s" / "report.csv"));

  EXPECT_NE(run_cli("frobnicate", tmp.path()).code, 0);
}

TEST(Binary, ConfigFileMatchesFlags) {
  TempDir tmp("cli");
  const auto manifest = small_corpus(tmp);
  const auto cfg = tmp.path() / "run.ini";
  io::write_text(cfg, "[sweep]\ncorpus = " + manifest.string() + "\ntheta = 0,1,3\ngrid = 2x2\noverlap = 6\nout = " +
                          (tmp.path() / "from_file").string() + "\n");
  const auto a = run_cli("--config \"" + cfg.string() + "\" sweep", tmp.path());
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = run_cli("sweep --corpus \"" + manifest.string() + "\" --theta 0,1,3 --grid 2x2 --overlap 6 --out \"" +
                             (tmp.path() / "from_flags").string() + "\"",
                         tmp.path());
  ASSERT_EQ(b.code, 0) << b.err;
  const auto ra = parse_report_csv(io::read_text(tmp.path() / "from_file" / "report.csv"));
  const auto rb = parse_report_csv(io::read_text(tmp.path() / "from_flags" / "report.csv"));
  EXPECT_TRUE(same_except_timing(ra, rb));
  ASSERT_EQ(ra.rows.size(), 4u);

  // Flags override the file.
  const auto c = run_cli("--config \"" + cfg.string() + "\" sweep --theta 0 --out \"" +
                             (tmp.path() / "override").string() + "\"",
                         tmp.path());
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_EQ(parse_report_csv(io::read_text(tmp.path() / "override" / "report.csv")).rows.size(), 2u);
}
