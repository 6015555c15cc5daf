// Acceptance suite: one line per criterion, exit status 1 when any fails.

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <string>

#include "rwrp/acceptance.hpp"

int main(int argc, char** argv) {
  rwrp::AcceptanceOptions opts;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--smoke") opts.profile = rwrp::Profile::Smoke;
    if (a.rfind("--only=", 0) == 0) opts.only.push_back(std::atoi(a.c_str() + 7));
  }
  const auto results = rwrp::run_acceptance(opts, &std::cout);
  const auto passed = std::count_if(results.begin(), results.end(), [](const auto& r) { return r.pass; });
  std::cout << passed << "/" << results.size() << " criteria pass\n";
  return passed == static_cast<long>(results.size()) ? 0 : 1;
}
