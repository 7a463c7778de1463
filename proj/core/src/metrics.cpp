// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tldg/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "tldg/error.hpp"

namespace tldg {

namespace {

void check_classes(std::span<const double> normal, std::span<const double> anomaly) {
  if (normal.empty() || anomaly.empty())
    fail(Errc::invalid_input, "AUC needs at least one normal and one anomalous score");
  for (double s : normal)
    if (std::isnan(s)) fail(Errc::invalid_input, "NaN score");
  for (double s : anomaly)
    if (std::isnan(s)) fail(Errc::invalid_input, "NaN score");
}

// Cumulative (false positive, true positive) counts after each distinct
// threshold, scanning scores from high to low.
struct CountPoint {
  long fp = 0;
  long tp = 0;
};

std::vector<CountPoint> count_curve(std::span<const double> normal, std::span<const double> anomaly) {
  std::vector<std::pair<double, int>> all;
  all.reserve(normal.size() + anomaly.size());
  for (double s : normal) all.emplace_back(s, 0);
  for (double s : anomaly) all.emplace_back(s, 1);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<CountPoint> pts{{0, 0}};
  CountPoint cur;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) {
      (all[j].second ? cur.tp : cur.fp) += 1;
      ++j;
    }
    pts.push_back(cur);
    i = j;
  }
  return pts;
}

std::string fmt_metric(const std::optional<double>& v) {
  if (!v) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

std::string fmt_score(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<RocPoint> roc_curve(std::span<const double> normal, std::span<const double> anomaly) {
  check_classes(normal, anomaly);
  const auto counts = count_curve(normal, anomaly);
  std::vector<RocPoint> out;
  out.reserve(counts.size());
  const double nn = static_cast<double>(normal.size()), na = static_cast<double>(anomaly.size());
  for (const auto& c : counts) out.push_back({c.fp / nn, c.tp / na});
  return out;
}

double auc(std::span<const double> normal, std::span<const double> anomaly) {
  return pauc(normal, anomaly, 1.0);
}

double pauc(std::span<const double> normal, std::span<const double> anomaly, double p) {
  if (!(p > 0.0) || p > 1.0) fail(Errc::invalid_input, "pAUC needs p in (0, 1]");
  check_classes(normal, anomaly);
  const auto pts = count_curve(normal, anomaly);
  const double nn = static_cast<double>(normal.size());
  // Work in count units: x in false positives, y in true positives. Whole
  // segments contribute integers (twice the trapezoid area).
  const double x_end = p * nn;
  long whole = 0;
  double partial = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const auto& a = pts[i - 1];
    const auto& b = pts[i];
    if (static_cast<double>(a.fp) >= x_end) break;
    if (static_cast<double>(b.fp) <= x_end) {
      whole += (b.fp - a.fp) * (a.tp + b.tp);
    } else {
      const double w = x_end - static_cast<double>(a.fp);
      const double y = a.tp + static_cast<double>(b.tp - a.tp) * w / static_cast<double>(b.fp - a.fp);
      partial += w * (a.tp + y);
    }
  }
  const double denom = 2.0 * nn * static_cast<double>(anomaly.size()) * p;
  return (static_cast<double>(whole) + partial) / denom;
}

// ---------------------------------------------------------------------------

void write_score_table(const std::filesystem::path& path, const ScoreTable& table) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot write score table " + path.string());
  out << "clip_path\tmachine_type\tlabel\tscorer_kind\tscore\n";
  for (const auto& r : table)
    out << r.clip_path << '\t' << r.machine_type << '\t' << to_string(r.label) << '\t'
        << r.scorer_kind << '\t' << fmt_score(r.score) << '\n';
  if (!out) fail(Errc::io_error, "write failed for " + path.string());
}

ScoreTable read_score_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, "cannot read score table " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "clip_path\tmachine_type\tlabel\tscorer_kind\tscore")
    fail(Errc::invalid_input, "score table header mismatch in " + path.string());
  ScoreTable table;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) f.push_back(cell);
    if (f.size() != 5)
      fail(Errc::invalid_input, path.string() + ":" + std::to_string(lineno) + ": expected 5 columns");
    ScoreRow r;
    r.clip_path = f[0];
    r.machine_type = f[1];
    r.label = parse_label(f[2]);
    r.scorer_kind = f[3];
    const auto res = std::from_chars(f[4].data(), f[4].data() + f[4].size(), r.score);
    if (res.ec != std::errc() || res.ptr != f[4].data() + f[4].size())
      fail(Errc::invalid_input, path.string() + ":" + std::to_string(lineno) + ": bad score");
    table.push_back(std::move(r));
  }
  return table;
}

// ---------------------------------------------------------------------------

EvalReport build_report(const ScoreTable& table, double p, const std::string& config_echo) {
  if (!(p > 0.0) || p > 1.0) fail(Errc::invalid_input, "pAUC needs p in (0, 1]");
  struct Acc {
    std::vector<double> normal, anomaly;
    std::string scorer;
  };
  std::map<std::string, Acc> by_machine;
  for (const auto& r : table) {
    auto& acc = by_machine[r.machine_type];
    if (acc.scorer.empty()) acc.scorer = r.scorer_kind;
    if (acc.scorer != r.scorer_kind)
      fail(Errc::invalid_input, "machine type " + r.machine_type + " is scored by more than one scorer");
    if (r.label == Label::normal) acc.normal.push_back(r.score);
    if (r.label == Label::anomaly) acc.anomaly.push_back(r.score);
  }
  EvalReport rep;
  rep.p = p;
  rep.config_echo = config_echo;
  double sum_auc = 0.0, sum_pauc = 0.0;
  int included = 0;
  for (const auto& [machine, acc] : by_machine) {
    MachineReport m;
    m.machine_type = machine;
    m.scorer_kind = acc.scorer;
    m.n_normal = static_cast<int>(acc.normal.size());
    m.n_anomaly = static_cast<int>(acc.anomaly.size());
    if (acc.normal.empty() || acc.anomaly.empty()) {
      spdlog::warn("machine type {} has a single class in test; reported as null", machine);
    } else {
      m.auc = auc(acc.normal, acc.anomaly);
      m.pauc = pauc(acc.normal, acc.anomaly, p);
      sum_auc += *m.auc;
      sum_pauc += *m.pauc;
      ++included;
    }
    rep.machines.push_back(std::move(m));
  }
  if (included > 0) {
    rep.mean_auc = sum_auc / included;
    rep.mean_pauc = sum_pauc / included;
  }
  return rep;
}

std::string render_report_table(const EvalReport& report) {
  std::ostringstream out;
  char pbuf[32];
  std::snprintf(pbuf, sizeof pbuf, "%g", report.p);
  out << "# pAUC p=" << pbuf << '\n';
  out << "machine_type\tscorer\tAUC\tpAUC\tn_normal\tn_anomaly\n";
  for (const auto& m : report.machines)
    out << m.machine_type << '\t' << m.scorer_kind << '\t' << fmt_metric(m.auc) << '\t'
        << fmt_metric(m.pauc) << '\t' << m.n_normal << '\t' << m.n_anomaly << '\n';
  out << "Average\t-\t" << fmt_metric(report.mean_auc) << '\t' << fmt_metric(report.mean_pauc)
      << "\t-\t-\n";
  return out.str();
}

std::string render_report_summary(const EvalReport& report) {
  using nlohmann::ordered_json;
  auto num = [](const std::optional<double>& v) -> ordered_json {
    if (!v) return nullptr;
    return std::round(*v * 1e6) / 1e6;
  };
  ordered_json machines = ordered_json::array();
  for (const auto& m : report.machines)
    machines.push_back({{"machine_type", m.machine_type},
                        {"scorer", m.scorer_kind},
                        {"auc", num(m.auc)},
                        {"pauc", num(m.pauc)},
                        {"n_normal", m.n_normal},
                        {"n_anomaly", m.n_anomaly}});
  ordered_json cfg;
  try {
    cfg = ordered_json::parse(report.config_echo);
  } catch (const nlohmann::json::exception&) {
    cfg = report.config_echo;
  }
  const ordered_json j = {{"p", report.p},
                          {"average", {{"auc", num(report.mean_auc)}, {"pauc", num(report.mean_pauc)}}},
                          {"machines", machines},
                          {"config", cfg}};
  return j.dump(2) + "\n";
}

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::pair<const char*, std::string> files[] = {
      {"report.tsv", render_report_table(report)},
      {"summary.json", render_report_summary(report)}};
  for (const auto& [name, text] : files) {
    std::ofstream out(dir / name, std::ios::trunc | std::ios::binary);
    out << text;
    if (!out) fail(Errc::io_error, "cannot write " + (dir / name).string());
  }
}

}  // namespace tldg
