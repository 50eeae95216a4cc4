#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cotlsa/theory_checks.hpp"

namespace cotlsa::cli {

struct CheckInfo {
  std::string name;
  std::string summary;
  std::function<Verdict(const nlohmann::json& params, std::uint64_t seed)> run;
};

const std::vector<CheckInfo>& check_registry();

// Throws ConfigError for an unknown name.
const CheckInfo& find_check(const std::string& name);

}  // namespace cotlsa::cli
