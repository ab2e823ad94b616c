#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace snowflake {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured quantity
  double threshold = 0.0;  // bound it is compared against
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;
  bool passed() const;
};

/// "metric-axioms", "thm1-universality", "gradients".
std::vector<std::string> verify_suite_names();

/// Throws InvalidArgument for an unknown suite.
SuiteReport run_verify_suite(std::string_view name, std::uint64_t seed = 0);

void to_json(nlohmann::json& j, const CheckResult& c);
void to_json(nlohmann::json& j, const SuiteReport& r);

}  // namespace snowflake
