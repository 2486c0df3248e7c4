#pragma once

#include <string>
#include <vector>

namespace causalkit {

// Self-contained acceptance experiments: each regenerates its data from
// embedded models and fixed seeds, computes the quantities under test and
// compares them against hard-coded expectations. The `repro` CLI subcommand
// and the acceptance test binary both run these.
struct CheckResult {
  enum class Cmp { Within, AtLeast, AtMost };
  std::string name;
  Cmp cmp = Cmp::Within;
  double value = 0.0;
  double expected = 0.0;   // bound for the one-sided kinds
  double tolerance = 0.0;  // Within only
  bool pass = false;

  static CheckResult within(std::string name, double value, double expected,
                            double tolerance);
  static CheckResult at_least(std::string name, double value, double bound);
  static CheckResult at_most(std::string name, double value, double bound);
};

struct ExperimentResult {
  std::string id;
  std::vector<CheckResult> checks;
  bool pass = false;
};

const std::vector<std::string>& experiment_ids();

// Throws std::invalid_argument listing valid ids on an unknown id.
ExperimentResult run_experiment(const std::string& id);

// "PASS id: check=value (expect e ± tol), ..." one line per experiment.
std::string format_experiment_line(const ExperimentResult& r);

}  // namespace causalkit
