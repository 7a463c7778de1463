// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tldg/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "tldg/error.hpp"
#include "tldg/hash.hpp"

namespace fs = std::filesystem;

namespace tldg {

std::string_view to_string(Label label) {
  switch (label) {
    case Label::normal: return "normal";
    case Label::anomaly: return "anomaly";
    case Label::unknown: return "unknown";
  }
  return "unknown";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "test";
}

Label parse_label(std::string_view s) {
  if (s == "normal") return Label::normal;
  if (s == "anomaly") return Label::anomaly;
  if (s == "unknown") return Label::unknown;
  fail(Errc::invalid_input, "unknown label '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  fail(Errc::invalid_input, "unknown split '" + std::string(s) + "'");
}

bool is_synthetic_type(std::string_view machine_type) {
  return machine_type.starts_with(kSyntheticPrefix);
}

std::vector<std::string> Manifest::machine_types() const {
  std::set<std::string> s;
  for (const auto& r : records) s.insert(r.machine_type);
  return {s.begin(), s.end()};
}

std::vector<const ClipRecord*> Manifest::select(std::string_view machine_type, Split split) const {
  std::vector<const ClipRecord*> out;
  for (const auto& r : records)
    if (r.machine_type == machine_type && r.split == split) out.push_back(&r);
  return out;
}

std::size_t Manifest::count(Split split) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const auto& r) { return r.split == split; }));
}

namespace {

struct ParsedName {
  Label label = Label::unknown;
  std::string machine_id = "id_00";
};

ParsedName parse_dcase_name(const std::string& filename) {
  static const std::regex kLabelled(R"(^(normal|anomaly)_(id_\d+)_\d+\.wav$)",
                                    std::regex::icase);
  static const std::regex kId(R"((id_\d+))");
  ParsedName p;
  std::smatch m;
  if (std::regex_match(filename, m, kLabelled)) {
    p.label = parse_label(m[1].str());
    p.machine_id = m[2].str();
  } else if (std::regex_search(filename, m, kId)) {
    p.machine_id = m[1].str();
  }
  return p;
}

bool has_wav_extension(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".wav";
}

std::vector<fs::path> sorted_wavs(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && has_wav_extension(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::string corpus_fingerprint(const std::vector<ClipRecord>& records, const fs::path& root) {
  Fnv1a h;
  for (const auto& r : records) {
    h.update(fs::relative(r.path, root).generic_string());
    h.update_u64(hash_file(r.path));
  }
  return h.hex();
}

Manifest scan_dcase_corpus(const fs::path& root, const ScanOptions& options,
                           std::vector<ScanWarning>* warnings) {
  if (!fs::is_directory(root)) fail(Errc::corpus_not_found, "no corpus directory at " + root.string());

  std::vector<fs::path> machine_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && (fs::is_directory(e.path() / "train") || fs::is_directory(e.path() / "test")))
      machine_dirs.push_back(e.path());
  std::sort(machine_dirs.begin(), machine_dirs.end());
  if (machine_dirs.empty())
    fail(Errc::corpus_not_found, "no machine-type directories under " + root.string());

  Manifest manifest;
  manifest.seed = options.seed;
  std::size_t seen = 0, excluded = 0;
  for (const auto& mdir : machine_dirs) {
    const std::string machine_type = mdir.filename().string();
    std::size_t n_train = 0;
    for (Split split : {Split::train, Split::test}) {
      for (const auto& path : sorted_wavs(mdir / std::string(to_string(split)))) {
        ++seen;
        WavInfo info;
        try {
          info = read_wav_info(path);
        } catch (const Error& e) {
          ++excluded;
          spdlog::warn("skipping unreadable clip {}: {}", path.string(), e.what());
          if (warnings) warnings->push_back({path, e.what()});
          continue;
        }
        const double duration = static_cast<double>(info.frames) / info.sample_rate_hz;
        if (duration < options.min_duration_s || duration > options.max_duration_s) {
          ++excluded;
          std::ostringstream why;
          why << "duration " << duration << " s outside [" << options.min_duration_s << ", "
              << options.max_duration_s << "]";
          spdlog::warn("skipping clip {}: {}", path.string(), why.str());
          if (warnings) warnings->push_back({path, why.str()});
          continue;
        }
        ParsedName name = parse_dcase_name(path.filename().string());
        ClipRecord r;
        r.path = path;
        r.machine_type = machine_type;
        r.machine_id = name.machine_id;
        r.split = split;
        r.label = split == Split::train ? Label::normal : name.label;
        r.sample_rate_hz = options.sample_rate_hz;
        r.duration_s = duration;
        if (split == Split::train) ++n_train;
        manifest.records.push_back(std::move(r));
      }
    }
    if (n_train == 0) fail(Errc::invalid_corpus, "machine type '" + machine_type + "' has no train clips");
  }
  if (seen > 0 && static_cast<double>(excluded) > options.max_unreadable_fraction * static_cast<double>(seen)) {
    std::ostringstream msg;
    msg << excluded << " of " << seen << " clips excluded (limit "
        << options.max_unreadable_fraction * 100 << "%)";
    fail(Errc::invalid_corpus, msg.str());
  }

  manifest.corpus_fingerprint = corpus_fingerprint(manifest.records, root);
  assign_validation(manifest, options.validation_fraction, options.seed);
  return manifest;
}

void assign_validation(Manifest& manifest, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0)
    fail(Errc::invalid_config, "validation_fraction must lie in [0, 1)");
  std::map<std::pair<std::string, Label>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    auto& r = manifest.records[i];
    if (r.split == Split::validation) r.split = Split::test;
    if (r.split == Split::test && r.label != Label::unknown) groups[{r.machine_type, r.label}].push_back(i);
  }
  if (fraction == 0.0) return;
  std::mt19937_64 rng(seed);
  for (auto& [key, idx] : groups) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = idx.size();
    auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    if (n >= 2) n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    for (std::size_t k = 0; k < n_val; ++k) manifest.records[idx[k]].split = Split::validation;
  }
}

void check_manifest(const Manifest& manifest) {
  for (const auto& r : manifest.records)
    if (r.split == Split::train && r.label != Label::normal)
      fail(Errc::invalid_config, "train clip with non-normal label: " + r.path.string());
  for (const auto& type : manifest.machine_types()) {
    auto test = manifest.select(type, Split::test);
    if (test.empty()) continue;
    for (Split split : {Split::validation, Split::test}) {
      bool normal = false, anomaly = false;
      for (const auto* r : manifest.select(type, split)) {
        normal |= r->label == Label::normal;
        anomaly |= r->label == Label::anomaly;
      }
      if (!normal || !anomaly)
        fail(Errc::invalid_config, "machine type '" + type + "' lacks both classes in the " +
                                       std::string(to_string(split)) + " split");
    }
  }
}

Waveform load_waveform(const ClipRecord& record) {
  Waveform w = read_wav(record.path);
  if (w.sample_rate_hz != record.sample_rate_hz) {
    spdlog::warn("{}: sample rate {} Hz differs from manifest {} Hz, resampling",
                 record.path.string(), w.sample_rate_hz, record.sample_rate_hz);
    w = resample(w, record.sample_rate_hz);
  }
  for (double& s : w.samples) s = std::clamp(s, -1.0, 1.0);
  return w;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot write manifest " + path.string());
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  const fs::path abs_base = fs::weakly_canonical(fs::absolute(base));
  out << "# tldg-manifest v1\n";
  out << "# fingerprint=" << manifest.corpus_fingerprint << " seed=" << manifest.seed << "\n";
  out << "# path\tmachine_type\tmachine_id\tlabel\tsplit\tsample_rate_hz\tduration_s\n";
  for (const auto& r : manifest.records) {
    fs::path abs = fs::weakly_canonical(fs::absolute(r.path));
    fs::path rel = abs.lexically_relative(abs_base);
    fs::path shown = (!rel.empty() && *rel.begin() != "..") ? rel : abs;
    char dur[32];
    std::snprintf(dur, sizeof(dur), "%.6g", r.duration_s);
    out << shown.generic_string() << '\t' << r.machine_type << '\t' << r.machine_id << '\t'
        << to_string(r.label) << '\t' << to_string(r.split) << '\t' << r.sample_rate_hz << '\t'
        << dur << '\n';
  }
  if (!out) fail(Errc::io_error, "write failed for " + path.string());
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::corpus_not_found, "no manifest at " + path.string());
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  Manifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto fp = line.find("fingerprint=");
      if (fp != std::string::npos) {
        std::istringstream hdr(line.substr(fp));
        std::string tok;
        while (hdr >> tok) {
          if (tok.starts_with("fingerprint=")) m.corpus_fingerprint = tok.substr(12);
          if (tok.starts_with("seed=")) m.seed = std::stoull(tok.substr(5));
        }
      }
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, '\t')) cols.push_back(c);
    if (cols.size() != 7)
      fail(Errc::invalid_input, path.string() + ":" + std::to_string(lineno) + ": expected 7 columns");
    ClipRecord r;
    fs::path p(cols[0]);
    r.path = p.is_absolute() ? p : base / p;
    r.machine_type = cols[1];
    r.machine_id = cols[2];
    r.label = parse_label(cols[3]);
    r.split = parse_split(cols[4]);
    r.sample_rate_hz = std::stoi(cols[5]);
    r.duration_s = std::stod(cols[6]);
    m.records.push_back(std::move(r));
  }
  return m;
}

}  // namespace tldg
