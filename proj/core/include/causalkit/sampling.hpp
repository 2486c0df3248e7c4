#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "causalkit/dataset.hpp"
#include "causalkit/dist_table.hpp"
#include "causalkit/rng.hpp"
#include "causalkit/scm.hpp"

namespace causalkit {

// Forward sampling in topological order. Row i draws node v from the stream
// derived from (seed, i, v), so the same (model, n, spec) always yields
// byte-identical datasets and extending the model leaves old columns intact.
Dataset ancestral_sample(const Scm& scm, std::size_t n, const RngSpec& rng);

// Values for a single row without materializing a Dataset; `row` plays the
// same stream-index role as in ancestral_sample. The trial engine drives
// its environments through this.
std::map<std::string, double> sample_row(const Scm& scm, const RngSpec& rng,
                                         std::uint64_t row);

// Rejection predicates: exact value or closed interval.
struct Predicate {
  enum class Kind { Equals, Interval };
  Kind kind = Kind::Equals;
  double value = 0.0;       // Equals
  double lo = 0.0, hi = 0.0;  // Interval, inclusive
  static Predicate equals(double v);
  static Predicate interval(double lo, double hi);
  bool accepts(double v) const;
};

using Evidence = std::map<std::string, Predicate>;

// Draws until `n` rows satisfy all predicates or `max_draws` rows have been
// proposed; the latter raises BudgetExhausted (how positivity violations
// surface here). The acceptance rate is recorded in the provenance.
Dataset rejection_condition(const Scm& scm, const Evidence& evidence,
                            std::size_t n, const RngSpec& rng,
                            std::uint64_t max_draws);

// Smoothed frequency table over the listed discrete variables:
// p(cell) = (count + alpha) / (N + alpha * #cells). Domains supply the cell
// space (values outside a domain are an error).
DistTable fit_table(const Dataset& data,
                    const std::vector<std::string>& variables,
                    const std::map<std::string, Domain>& domains,
                    double alpha);

}  // namespace causalkit
