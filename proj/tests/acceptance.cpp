// Runs every acceptance property and prints one PASS/FAIL line per criterion.
#include "hmhf/checks.hpp"

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) ids.push_back(std::atoi(argv[i]));
  if (ids.empty())
    for (const hmhf::CheckInfo& c : hmhf::check_catalog()) ids.push_back(c.id);
  int failed = 0;
  for (const hmhf::CheckResult& r : hmhf::run_checks(ids)) {
    std::printf("%s\n", hmhf::check_line(r).c_str());
    failed += r.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(ids.size()) - failed, ids.size());
  return failed == 0 ? 0 : 1;
}
