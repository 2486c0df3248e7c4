#pragma once

#include <map>
#include <string>
#include <vector>

#include "causalkit/scm.hpp"

namespace causalkit {

// Dense probability table over discrete variables. Probabilities are stored
// in row-major order over the domain cross product, last variable fastest.
// A table produced by the library is normalized to within 1e-12.
struct DistTable {
  std::vector<std::string> variables;
  std::vector<Domain> domains;  // parallel to variables, all discrete
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  // Flat index of a full assignment (one value per variable, domain order).
  std::size_t index_of(const std::vector<double>& assignment) const;
  double prob_of(const std::vector<double>& assignment) const;
  // Value tuple at a flat index.
  std::vector<double> assignment_at(std::size_t flat) const;

  double total() const;     // compensated sum
  void normalize();         // divides by total; throws DomainError on zero

  // E[v] for a single-variable table.
  double expectation() const;
};

// Sums out one variable (compensated accumulation); result keeps the
// remaining variable order.
DistTable marginalize(const DistTable& table, const std::string& variable);

// CSV: one column per variable plus `prob`. JSON: objects nested in variable
// order, leaf values are probabilities.
std::string dist_table_csv(const DistTable& table);
std::string dist_table_json(const DistTable& table);

}  // namespace causalkit
