#pragma once

// Sweep reports: CSV (machine) and aligned text table (human).
//
// CSV columns, in order:
//   theta, miou, fps_wall, fps_multiplier, acc_flops, mac_flops,
//   processed_r0..processed_rK, reused_r0..reused_rK,
//   variant, grid, latency_ms, activation_rate, dims_mismatch
// K+1 is the largest region count in the report; rows with fewer regions
// leave the extra cells empty. theta may be "inf"; miou is a fraction and is
// empty when the corpus has no ground truth.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spikeseg/error.hpp"
#include "spikeseg/gate_pipeline.hpp"

namespace spikeseg {

struct ReportRow {
  std::string variant;  // "baseline", "split" or "gated"
  std::string grid;
  double theta = 0.0;
  std::optional<double> miou;
  double fps_wall = 0.0;
  double fps_multiplier = 1.0;
  std::uint64_t acc_flops = 0;
  std::uint64_t mac_flops = 0;
  std::vector<std::uint64_t> processed;
  std::vector<std::uint64_t> reused;
  double latency_ms = 0.0;
  double activation_rate = 0.0;
  bool dims_mismatch = false;

  std::uint64_t total_processed() const {
    std::uint64_t n = 0;
    for (auto v : processed) n += v;
    return n;
  }
};

struct Report {
  std::vector<ReportRow> rows;
};

inline ReportRow to_row(const SequenceReport& s, std::string variant) {
  ReportRow r;
  r.variant = std::move(variant);
  r.grid = s.grid;
  r.theta = s.theta;
  r.miou = s.miou;
  r.fps_wall = s.fps;
  r.acc_flops = s.flops.acc;
  r.mac_flops = s.flops.mac;
  r.processed = s.processed;
  r.reused = s.reused;
  r.latency_ms = s.mean_latency * 1e3;
  r.activation_rate = s.activation_rate;
  r.dims_mismatch = s.dims_mismatch;
  return r;
}

// The first row is the baseline; every multiplier is FPS / FPS_baseline.
inline Report build_report(std::vector<ReportRow> rows) {
  Report rep{std::move(rows)};
  if (rep.rows.empty()) return rep;
  const double base = rep.rows.front().fps_wall;
  for (auto& r : rep.rows) r.fps_multiplier = base > 0 ? r.fps_wall / base : 0.0;
  rep.rows.front().fps_multiplier = 1.0;
  return rep;
}

namespace detail {

inline std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s, std::size_t line) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::MalformedLine, "line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

inline std::uint64_t parse_u64(const std::string& s, std::size_t line) {
  std::uint64_t v = 0;
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw Error(Errc::MalformedLine, "line " + std::to_string(line) + ": bad count '" + s + "'");
  }
  for (char c : s) v = v * 10 + static_cast<std::uint64_t>(c - '0');
  return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::size_t region_columns(const Report& rep) {
  std::size_t k = 0;
  for (const auto& r : rep.rows) k = std::max(k, r.processed.size());
  return k;
}

}  // namespace detail

inline std::string write_report_csv(const Report& rep) {
  const std::size_t k = detail::region_columns(rep);
  std::string out = "theta,miou,fps_wall,fps_multiplier,acc_flops,mac_flops";
  for (std::size_t i = 0; i < k; ++i) out += ",processed_r" + std::to_string(i);
  for (std::size_t i = 0; i < k; ++i) out += ",reused_r" + std::to_string(i);
  out += ",variant,grid,latency_ms,activation_rate,dims_mismatch\n";
  for (const auto& r : rep.rows) {
    out += detail::fmt_double(r.theta) + "," + (r.miou ? detail::fmt_double(*r.miou) : "") + "," +
           detail::fmt_double(r.fps_wall) + "," + detail::fmt_double(r.fps_multiplier) + "," +
           std::to_string(r.acc_flops) + "," + std::to_string(r.mac_flops);
    for (std::size_t i = 0; i < k; ++i) out += "," + (i < r.processed.size() ? std::to_string(r.processed[i]) : "");
    for (std::size_t i = 0; i < k; ++i) out += "," + (i < r.reused.size() ? std::to_string(r.reused[i]) : "");
    out += "," + r.variant + "," + r.grid + "," + detail::fmt_double(r.latency_ms) + "," +
           detail::fmt_double(r.activation_rate) + "," + (r.dims_mismatch ? "1" : "0") + "\n";
  }
  return out;
}

inline Report parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::EmptyStream, "report has no header");
  const auto header = detail::split_csv(line);
  if (header.size() < 11 || (header.size() - 11) % 2 != 0 || header[0] != "theta") {
    throw Error(Errc::MalformedLine, "line 1: unexpected report header");
  }
  const std::size_t k = (header.size() - 11) / 2;
  Report rep;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != header.size()) {
      throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": expected " +
                                           std::to_string(header.size()) + " fields");
    }
    ReportRow r;
    r.theta = detail::parse_double(f[0], line_no);
    if (!f[1].empty()) r.miou = detail::parse_double(f[1], line_no);
    r.fps_wall = detail::parse_double(f[2], line_no);
    r.fps_multiplier = detail::parse_double(f[3], line_no);
    r.acc_flops = detail::parse_u64(f[4], line_no);
    r.mac_flops = detail::parse_u64(f[5], line_no);
    for (std::size_t i = 0; i < k; ++i) {
      if (!f[6 + i].empty()) r.processed.push_back(detail::parse_u64(f[6 + i], line_no));
      if (!f[6 + k + i].empty()) r.reused.push_back(detail::parse_u64(f[6 + k + i], line_no));
    }
    r.variant = f[6 + 2 * k];
    r.grid = f[7 + 2 * k];
    r.latency_ms = detail::parse_double(f[8 + 2 * k], line_no);
    r.activation_rate = detail::parse_double(f[9 + 2 * k], line_no);
    r.dims_mismatch = f[10 + 2 * k] == "1";
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

// Rows equal in every column except fps_wall, fps_multiplier and latency_ms.
inline bool same_except_timing(const Report& a, const Report& b) {
  if (a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto& x = a.rows[i];
    const auto& y = b.rows[i];
    if (x.variant != y.variant || x.grid != y.grid || x.theta != y.theta || x.miou != y.miou ||
        x.acc_flops != y.acc_flops || x.mac_flops != y.mac_flops || x.processed != y.processed ||
        x.reused != y.reused || x.activation_rate != y.activation_rate || x.dims_mismatch != y.dims_mismatch) {
      return false;
    }
  }
  return true;
}

inline std::string format_report(const Report& rep) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-9s %-5s %7s %8s %18s %11s %12s %12s %10s %9s %s\n", "variant", "grid", "theta",
                "MIoU[%]", "FPS", "latency[ms]", "ACC", "MAC", "processed", "reused", "notes");
  out += buf;
  for (const auto& r : rep.rows) {
    char theta[32], miou[32], fps[48];
    if (std::isinf(r.theta)) {
      std::snprintf(theta, sizeof theta, "inf");
    } else {
      std::snprintf(theta, sizeof theta, "%.2f", r.theta);
    }
    if (r.miou) {
      std::snprintf(miou, sizeof miou, "%.2f", *r.miou * 100.0);
    } else {
      std::snprintf(miou, sizeof miou, "-");
    }
    std::snprintf(fps, sizeof fps, "%.2f (x%.2f)", r.fps_wall, r.fps_multiplier);
    std::uint64_t reused = 0;
    for (auto v : r.reused) reused += v;
    std::snprintf(buf, sizeof buf, "%-9s %-5s %7s %8s %18s %11.3f %12.3e %12.3e %10llu %9llu %s\n", r.variant.c_str(),
                  r.grid.c_str(), theta, miou, fps, r.latency_ms, static_cast<double>(r.acc_flops),
                  static_cast<double>(r.mac_flops), static_cast<unsigned long long>(r.total_processed()),
                  static_cast<unsigned long long>(reused), r.dims_mismatch ? "dims differ from training" : "");
    out += buf;
  }
  return out;
}

// Copy-reuse ("Up") against flow-warp ("OF") at each threshold.
struct WarpRow {
  double theta = 0.0;
  std::optional<double> miou_of;
  double fps_of = 0.0;
  std::optional<double> miou_up;
  double fps_up = 0.0;
};

inline std::string write_warp_csv(const std::vector<WarpRow>& rows) {
  std::string out = "theta,miou_of,fps_of,miou_up,fps_up\n";
  for (const auto& r : rows) {
    out += detail::fmt_double(r.theta) + "," + (r.miou_of ? detail::fmt_double(*r.miou_of) : "") + "," +
           detail::fmt_double(r.fps_of) + "," + (r.miou_up ? detail::fmt_double(*r.miou_up) : "") + "," +
           detail::fmt_double(r.fps_up) + "\n";
  }
  return out;
}

inline std::string format_warp_report(const std::vector<WarpRow>& rows) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%7s %12s %10s %12s %10s\n", "theta", "MIoU_OF[%]", "FPS_OF", "MIoU_Up[%]", "FPS_Up");
  out += buf;
  auto pct = [](const std::optional<double>& v) { return v ? *v * 100.0 : std::nan(""); };
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%7.2f %12.2f %10.2f %12.2f %10.2f\n", r.theta, pct(r.miou_of), r.fps_of,
                  pct(r.miou_up), r.fps_up);
    out += buf;
  }
  return out;
}

}  // namespace spikeseg
