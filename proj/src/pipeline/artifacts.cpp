#include "fedperi/pipeline/artifacts.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedperi/common/errors.hpp"
#include "fedperi/common/rng.hpp"
#include "fedperi/preprocess/cohort_io.hpp"

namespace fedperi::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string digest_bytes(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

std::string digest_file(const std::string& path) { return digest_bytes(read_text(path)); }

std::string digest_json(const json& j) { return digest_bytes(j.dump()); }

json Manifest::to_json() const {
  return {{"stage", stage},     {"key", key},         {"subtree", subtree},     {"seed", seed},
          {"version", version}, {"inputs", inputs},   {"outputs", outputs},     {"wall_time", wall_time}};
}

Manifest Manifest::from_json(const json& j) {
  Manifest m;
  try {
    j.at("stage").get_to(m.stage);
    j.at("key").get_to(m.key);
    m.subtree = j.at("subtree");
    j.at("seed").get_to(m.seed);
    j.at("version").get_to(m.version);
    j.at("inputs").get_to(m.inputs);
    j.at("outputs").get_to(m.outputs);
    m.wall_time = j.value("wall_time", 0.0);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return m;
}

std::string stage_dir(const std::string& root, const std::string& stage, const std::string& key) {
  return (fs::path(root) / stage / ("stage-" + key.substr(0, 12))).string();
}

void write_manifest(const Manifest& m, const std::string& dir) {
  write_text((fs::path(dir) / "manifest.json").string(), m.to_json().dump(2) + "\n");
}

Manifest read_manifest(const std::string& dir) {
  const fs::path p = fs::path(dir) / "manifest.json";
  if (!fs::exists(p)) throw StageOrderError("no manifest in " + dir);
  try {
    return Manifest::from_json(json::parse(read_text(p.string())));
  } catch (const json::exception& e) {
    throw StaleCacheError(p.string() + ": unreadable manifest: " + e.what());
  }
}

namespace {

void check_outputs(const Manifest& m, const std::string& dir) {
  for (const auto& [name, digest] : m.outputs) {
    const fs::path p = fs::path(dir) / name;
    if (!fs::exists(p)) throw StaleCacheError(p.string() + " is listed in the manifest but missing");
    if (digest_file(p.string()) != digest)
      throw StaleCacheError(p.string() + " changed after its stage completed; delete " + dir + " to rebuild");
  }
}

}  // namespace

bool cache_valid(const std::string& dir, const std::string& key) {
  if (!fs::exists(fs::path(dir) / "manifest.json")) return false;
  const Manifest m = read_manifest(dir);
  if (m.key != key)
    throw StaleCacheError(dir + " holds stage key " + m.key + ", expected " + key + "; delete it to rebuild");
  check_outputs(m, dir);
  return true;
}

Manifest require_stage(const std::string& dir, const std::string& key, const std::string& produce_with) {
  if (!fs::exists(fs::path(dir) / "manifest.json"))
    throw StageOrderError("missing upstream artifacts in " + dir + "; run '" + produce_with + "' first");
  const Manifest m = read_manifest(dir);
  if (m.key != key)
    throw StaleCacheError(dir + " was built from a different configuration (key " + m.key + ", expected " + key + ")");
  check_outputs(m, dir);
  return m;
}

void record_outputs(Manifest& m, const std::string& dir) {
  m.outputs.clear();
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json") continue;
    m.outputs[name] = digest_file(entry.path().string());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << text;
  if (!out) throw FormatError("write failed for " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_scored_set(const evalstats::ScoredSet& set, const std::string& path) {
  set.validate();
  const auto& names = preprocess::outcome_names();
  std::ostringstream out;
  out << "sex,race,age_years";
  for (std::size_t k = 0; k < set.n_outcomes; ++k) out << ",score_" << names[k];
  for (std::size_t k = 0; k < set.n_outcomes; ++k) out << ",label_" << names[k];
  out << '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& g = set.subgroups[i];
    out << (g.sex == preprocess::Sex::Female ? "F" : "M") << ','
        << (g.race == preprocess::Race::AfricanAmerican ? "AA" : "non-AA") << ','
        << preprocess::format_double(g.age_years);
    for (std::size_t k = 0; k < set.n_outcomes; ++k)
      out << ',' << preprocess::format_double(set.scores[i * set.n_outcomes + k]);
    for (std::size_t k = 0; k < set.n_outcomes; ++k) out << ',' << int(set.labels[i * set.n_outcomes + k]);
    out << '\n';
  }
  write_text(path, out.str());
}

evalstats::ScoredSet load_scored_set(const std::string& path, const std::string& site) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty score file");
  evalstats::ScoredSet set;
  set.site = site;
  const std::size_t K = set.n_outcomes;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 3 + 2 * K) throw FormatError(path + ":" + std::to_string(line_no) + ": wrong column count");
    preprocess::Subgroup g;
    g.sex = cells[0] == "F" ? preprocess::Sex::Female : preprocess::Sex::Male;
    g.race = cells[1] == "AA" ? preprocess::Race::AfricanAmerican : preprocess::Race::NonAfricanAmerican;
    auto parse = [&](const std::string& c) {
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size())
        throw FormatError(path + ":" + std::to_string(line_no) + ": bad number '" + c + "'");
      return v;
    };
    g.age_years = parse(cells[2]);
    set.subgroups.push_back(g);
    for (std::size_t k = 0; k < K; ++k) set.scores.push_back(parse(cells[3 + k]));
    for (std::size_t k = 0; k < K; ++k) set.labels.push_back(cells[3 + K + k] == "1" ? 1 : 0);
  }
  set.validate();
  return set;
}

}  // namespace fedperi::pipeline
