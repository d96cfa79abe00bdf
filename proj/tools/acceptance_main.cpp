#include <algorithm>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "acceptance.hpp"

// Usage: dasphys_acceptance [OUT_DIR] [ID...]
int main(int argc, char** argv) {
  namespace acc = dasphys::acceptance;
  const std::string out = argc > 1 ? argv[1] : "acceptance_out";
  std::vector<std::string> ids(argv + std::min(argc, 2), argv + argc);
  if (ids.empty()) ids = acc::criterion_ids();
  try {
    acc::Context ctx(out, std::cerr);
    std::size_t failed = 0;
    for (const auto& id : ids) {
      const auto r = acc::run_criterion(id, ctx);
      std::cout << acc::result_line(r) << std::endl;
      failed += r.passed ? 0 : 1;
    }
    std::cout << (failed ? "FAILED " : "ALL PASSED ") << ids.size() - failed << "/" << ids.size() << std::endl;
    return failed ? EXIT_FAILURE : EXIT_SUCCESS;
  } catch (const std::exception& e) {
    std::cerr << "acceptance: " << e.what() << "\n";
    return 2;
  }
}
