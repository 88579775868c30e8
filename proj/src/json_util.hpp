#pragma once

// Shared JSON (de)serialization for the config sub-objects exposed in the
// run-config files.

#include <json.hpp>

#include "piic/hyperopt.hpp"
#include "piic/inference.hpp"

namespace piic::jsonutil {

inline nlohmann::ordered_json sampler_to_json(const SamplerConfig& s) {
  return {{"chain_length", s.chain_length},
          {"burn_in", s.burn_in},
          {"thin", s.thin},
          {"seed", s.seed},
          {"target_accept", s.target_accept}};
}

inline void sampler_from_json(const nlohmann::json& j, SamplerConfig& s) {
  if (j.contains("chain_length")) s.chain_length = j["chain_length"].get<int>();
  if (j.contains("burn_in")) s.burn_in = j["burn_in"].get<int>();
  if (j.contains("thin")) s.thin = j["thin"].get<int>();
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("target_accept")) s.target_accept = j["target_accept"].get<double>();
}

inline nlohmann::ordered_json search_to_json(const XiSearchSpace& s) {
  return {{"grid_points", s.grid_points},
          {"log_lo", s.log_lo},
          {"log_hi", s.log_hi},
          {"simplex_budget", s.simplex_budget},
          {"simplex_tol", s.simplex_tol}};
}

inline void search_from_json(const nlohmann::json& j, XiSearchSpace& s) {
  if (j.contains("grid_points")) s.grid_points = j["grid_points"].get<int>();
  if (j.contains("log_lo")) s.log_lo = j["log_lo"].get<double>();
  if (j.contains("log_hi")) s.log_hi = j["log_hi"].get<double>();
  if (j.contains("simplex_budget")) s.simplex_budget = j["simplex_budget"].get<int>();
  if (j.contains("simplex_tol")) s.simplex_tol = j["simplex_tol"].get<double>();
}

}  // namespace piic::jsonutil
