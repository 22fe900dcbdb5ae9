#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "json.hpp"
#include "fedperi/evalstats/metrics.hpp"

namespace fedperi::pipeline {

inline constexpr const char* kToolVersion = "fedperisim 1.0.0";

// 16 hex digits of FNV-1a over the bytes.
std::string digest_bytes(std::string_view bytes);
std::string digest_file(const std::string& path);
// Digest of the canonical (sorted-key, compact) JSON dump.
std::string digest_json(const nlohmann::json& j);

// Every stage directory ends with manifest.json, written last. A directory
// without one is an interrupted run and is rebuilt.
struct Manifest {
  std::string stage;
  std::string key;          // digest of the stage's config subtree and upstream keys
  nlohmann::json subtree;   // what `key` was computed from
  std::uint64_t seed = 0;
  std::string version = kToolVersion;
  std::map<std::string, std::string> inputs;   // upstream manifest path -> key
  std::map<std::string, std::string> outputs;  // file name -> digest
  double wall_time = 0.0;

  nlohmann::json to_json() const;
  static Manifest from_json(const nlohmann::json& j);
};

// <root>/<stage>/stage-<first 12 digits of key>
std::string stage_dir(const std::string& root, const std::string& stage, const std::string& key);

void write_manifest(const Manifest& m, const std::string& dir);
// Throws StageOrderError when the manifest is absent.
Manifest read_manifest(const std::string& dir);

// Reusable when the manifest exists, carries `key`, and every listed output
// still has its recorded digest. A manifest with another key, or an output
// whose bytes changed, is a StaleCacheError; no manifest returns false.
bool cache_valid(const std::string& dir, const std::string& key);

// Opens an upstream stage for reading; a missing directory or manifest is a
// StageOrderError naming `produce_with`, a mismatch is a StaleCacheError.
Manifest require_stage(const std::string& dir, const std::string& key, const std::string& produce_with);

// Records the digest of every regular file in `dir` except manifest.json.
void record_outputs(Manifest& m, const std::string& dir);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

// CSV: sex,race,age_years,score_<outcome>...,label_<outcome>...
void save_scored_set(const evalstats::ScoredSet& set, const std::string& path);
evalstats::ScoredSet load_scored_set(const std::string& path, const std::string& site);

}  // namespace fedperi::pipeline
