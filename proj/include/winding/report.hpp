#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "suite.hpp"

namespace winding {

// JSON form of a suite run.  Key order is fixed, so equal runs give equal bytes.
inline nlohmann::ordered_json suite_report(const SuiteConfig& cfg, const std::string& suite,
                                           const std::vector<CriterionResult>& res) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["samples"] = cfg.samples;
  j["suite"] = suite;
  auto cr = nlohmann::ordered_json::array();
  bool all = true;
  for (const auto& r : res) {
    auto v = nlohmann::ordered_json::object();
    for (const auto& [k, x] : r.values) v[k] = x;
    cr.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"values", v}});
    all = all && r.pass;
  }
  j["criteria"] = cr;
  j["pass"] = all;
  return j;
}

}  // namespace winding
