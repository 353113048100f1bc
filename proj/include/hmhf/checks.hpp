#pragma once

#include <string>
#include <vector>

namespace hmhf {

struct CheckInfo {
  int id;
  const char* name;
  const char* summary;
};

struct CheckResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail; // space separated key=value measurements
  double seconds = 0.0;
};

// the acceptance properties, ids 1..14
const std::vector<CheckInfo>& check_catalog();

// Library errors inside a check count as a failure with kind and message in detail.
CheckResult run_check(int id, int threads = 1);
// independent checks run concurrently on up to threads workers (0: hardware concurrency)
std::vector<CheckResult> run_checks(const std::vector<int>& ids, int threads = 0);

// "PASS 05 convergence_detection key=value ..." (FAIL when not passing)
std::string check_line(const CheckResult& r);

} // namespace hmhf
