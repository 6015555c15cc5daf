#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rwrp {

enum class Profile { Desk, Smoke };

Profile parse_profile(std::string_view s);  // desk | smoke
std::string to_string(Profile p);

struct AcceptanceOptions {
  Profile profile = Profile::Desk;
  int workers = 0;
  std::uint64_t seed = 20260101;
  std::vector<int> only;  // criterion ids; empty runs all
};

struct CriterionResult {
  int id;
  std::string name;
  bool pass;
  std::string detail;
  double seconds;
};

// Runs criteria 1-12 in order. When `log` is set, each line is written as soon
// as its criterion finishes.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts, std::ostream* log = nullptr);

std::string format_result(const CriterionResult& r);

}  // namespace rwrp
