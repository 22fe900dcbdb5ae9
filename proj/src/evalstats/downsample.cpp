#include "fedperi/evalstats/downsample.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "fedperi/common/errors.hpp"
#include "fedperi/common/rng.hpp"
#include "fedperi/evalstats/report.hpp"
#include "fedperi/preprocess/schema.hpp"

namespace fedperi::evalstats {

std::vector<std::size_t> downsample_indices(std::size_t n, std::size_t target, std::uint64_t seed,
                                            std::size_t repeat) {
  if (target > n) throw ContractError("downsample: target exceeds population");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  KeyedRng rng(seed, "downsample", {repeat});
  for (std::size_t i = 0; i < target; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(target);
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace {

[[noreturn]] void rethrow_tagged(std::size_t repeat) {
  const std::string tag = "downsample repeat " + std::to_string(repeat) + ": ";
  try {
    throw;
  } catch (const DivergenceError& e) {
    throw DivergenceError(tag + e.what());
  } catch (const ClientError& e) {
    throw ClientError(tag + e.what());
  } catch (const ProtocolError& e) {
    throw ProtocolError(tag + e.what());
  } catch (const Error& e) {
    throw Error(tag + e.what());
  }
}

}  // namespace

DownsampleResult downsample_experiment(std::vector<std::string> sites, std::size_t larger_n, std::size_t target_n,
                                       std::size_t repeats, std::uint64_t seed, const RepeatFn& run) {
  if (repeats < 1) throw ContractError("downsample: repeats must be >= 1");
  DownsampleResult res;
  res.sites = std::move(sites);
  res.repeats = repeats;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto subset = downsample_indices(larger_n, target_n, seed, r);
    std::vector<std::vector<double>> aurocs;
    try {
      aurocs = run(r, subset);
    } catch (const Error&) {
      rethrow_tagged(r);
    }
    if (aurocs.size() != res.sites.size()) throw ContractError("downsample: callback returned wrong site count");
    res.per_repeat.push_back(std::move(aurocs));
  }

  const std::size_t S = res.sites.size();
  const std::size_t K = res.per_repeat[0].empty() ? 0 : res.per_repeat[0][0].size();
  res.mean.assign(S, std::vector<double>(K, 0.0));
  res.sd.assign(S, std::vector<double>(K, 0.0));
  const double R = static_cast<double>(repeats);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t k = 0; k < K; ++k) {
      double total = 0.0;
      for (std::size_t r = 0; r < repeats; ++r) total += res.per_repeat[r][s][k];
      const double m = total / R;
      double ss = 0.0;
      for (std::size_t r = 0; r < repeats; ++r) ss += (res.per_repeat[r][s][k] - m) * (res.per_repeat[r][s][k] - m);
      res.mean[s][k] = m;
      res.sd[s][k] = repeats > 1 ? std::sqrt(ss / (R - 1.0)) : 0.0;
    }
  return res;
}

std::string DownsampleResult::to_markdown() const {
  std::ostringstream out;
  out << "| Outcome |";
  for (const std::string& s : sites) {
    if (!full.empty()) out << ' ' << s << " raw size |";
    out << ' ' << s << " equal size, mean (SD) |";
  }
  out << "\n|---|";
  for (std::size_t i = 0; i < sites.size() * (full.empty() ? 1 : 2); ++i) out << "---|";
  out << '\n';
  const std::size_t K = mean.empty() ? 0 : mean[0].size();
  for (std::size_t k = 0; k < K; ++k) {
    out << "| " << outcome_label(k) << " |";
    for (std::size_t s = 0; s < sites.size(); ++s) {
      if (!full.empty()) out << ' ' << (std::isnan(full[s][k]) ? "n/a" : format_fixed(full[s][k], 2)) << " |";
      out << ' ' << format_mean_sd(mean[s][k], sd[s][k]) << " |";
    }
    out << '\n';
  }
  return out.str();
}

std::string DownsampleResult::to_csv() const {
  std::ostringstream out;
  out << "site,outcome,full,mean,sd\n";
  for (std::size_t s = 0; s < sites.size(); ++s)
    for (std::size_t k = 0; k < mean[s].size(); ++k)
      out << sites[s] << ',' << preprocess::outcome_names()[k] << ','
          << (full.empty() || std::isnan(full[s][k]) ? std::string() : format_fixed(full[s][k], 6)) << ','
          << format_fixed(mean[s][k], 6) << ',' << format_fixed(sd[s][k], 6) << '\n';
  return out.str();
}

nlohmann::json DownsampleResult::to_json() const {
  return {{"sites", sites}, {"repeats", repeats}, {"full", full}, {"mean", mean}, {"sd", sd}, {"per_repeat", per_repeat}};
}

namespace {

double read_number(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::vector<std::vector<double>> read_matrix(const nlohmann::json& j) {
  std::vector<std::vector<double>> m;
  for (const auto& row : j) {
    m.emplace_back();
    for (const auto& v : row) m.back().push_back(read_number(v));
  }
  return m;
}

}  // namespace

DownsampleResult DownsampleResult::from_json(const nlohmann::json& j) {
  DownsampleResult r;
  try {
    j.at("sites").get_to(r.sites);
    j.at("repeats").get_to(r.repeats);
    r.full = read_matrix(j.at("full"));
    r.mean = read_matrix(j.at("mean"));
    r.sd = read_matrix(j.at("sd"));
    for (const auto& rep : j.at("per_repeat")) r.per_repeat.push_back(read_matrix(rep));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("downsample result: ") + e.what());
  }
  return r;
}

}  // namespace fedperi::evalstats
