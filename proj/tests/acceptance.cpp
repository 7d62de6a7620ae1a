// One PASS/FAIL line per acceptance criterion; nonzero exit if any fails.
// An optional argument filters criteria the same way `wcdiff verify --filter` does.

#include "wcdiff/acceptance.hpp"

#include <iostream>

int main(int argc, char** argv) {
  const std::string filter = argc > 1 ? argv[1] : "";
  const auto results = wcdiff::acceptance::run(filter, {}, &std::cout);
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.passed ? 1 : 0;
  std::cout << passed << "/" << results.size() << " criteria passed\n";
  return wcdiff::acceptance::all_passed(results) ? 0 : 1;
}
