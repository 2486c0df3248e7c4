#include "causalkit/dist_table.hpp"

#include <sstream>
#include <stdexcept>

#include "causalkit/dsl.hpp"  // format_double
#include "causalkit/errors.hpp"

namespace causalkit {

namespace {

// Kahan-compensated accumulator; marginals and normalizers must not drift
// with summation order.
struct Kahan {
  double sum = 0.0, c = 0.0;
  void add(double v) {
    double y = v - c;
    double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

}  // namespace

std::size_t DistTable::index_of(const std::vector<double>& assignment) const {
  if (assignment.size() != variables.size()) {
    throw std::invalid_argument("assignment arity does not match the table");
  }
  std::size_t flat = 0;
  for (std::size_t i = 0; i < variables.size(); ++i) {
    int vi = domains[i].index_of(assignment[i]);
    if (vi < 0) {
      throw std::invalid_argument("value " + format_double(assignment[i]) +
                                  " is outside the domain of '" +
                                  variables[i] + "'");
    }
    flat = flat * domains[i].values.size() + static_cast<std::size_t>(vi);
  }
  return flat;
}

double DistTable::prob_of(const std::vector<double>& assignment) const {
  return probs[index_of(assignment)];
}

std::vector<double> DistTable::assignment_at(std::size_t flat) const {
  std::vector<double> out(variables.size());
  for (std::size_t i = variables.size(); i-- > 0;) {
    std::size_t k = domains[i].values.size();
    out[i] = domains[i].values[flat % k];
    flat /= k;
  }
  return out;
}

double DistTable::total() const {
  Kahan acc;
  for (double p : probs) acc.add(p);
  return acc.sum;
}

void DistTable::normalize() {
  double z = total();
  if (z <= 0.0) {
    throw ZeroProbabilityEvidence("table mass is zero; nothing to normalize");
  }
  for (double& p : probs) p /= z;
}

double DistTable::expectation() const {
  if (variables.size() != 1) {
    throw std::invalid_argument(
        "expectation needs a single-variable table, got " +
        std::to_string(variables.size()));
  }
  Kahan acc;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc.add(domains[0].values[i] * probs[i]);
  }
  return acc.sum;
}

DistTable marginalize(const DistTable& table, const std::string& variable) {
  std::size_t target = table.variables.size();
  for (std::size_t i = 0; i < table.variables.size(); ++i) {
    if (table.variables[i] == variable) target = i;
  }
  if (target == table.variables.size()) {
    throw std::invalid_argument("no variable '" + variable +
                                "' in the table");
  }
  DistTable out;
  std::size_t inner = 1;  // stride of the summed axis
  for (std::size_t i = 0; i < table.variables.size(); ++i) {
    if (i == target) continue;
    out.variables.push_back(table.variables[i]);
    out.domains.push_back(table.domains[i]);
  }
  for (std::size_t i = target + 1; i < table.domains.size(); ++i) {
    inner *= table.domains[i].values.size();
  }
  std::size_t k = table.domains[target].values.size();
  std::size_t result_size = table.probs.size() / k;
  out.probs.assign(result_size, 0.0);
  std::vector<Kahan> acc(result_size);
  for (std::size_t flat = 0; flat < table.probs.size(); ++flat) {
    std::size_t hi = flat / (inner * k);
    std::size_t lo = flat % inner;
    acc[hi * inner + lo].add(table.probs[flat]);
  }
  for (std::size_t i = 0; i < result_size; ++i) out.probs[i] = acc[i].sum;
  return out;
}

std::string dist_table_csv(const DistTable& table) {
  std::ostringstream out;
  for (const auto& v : table.variables) out << v << ",";
  out << "prob\n";
  for (std::size_t flat = 0; flat < table.probs.size(); ++flat) {
    auto assignment = table.assignment_at(flat);
    for (double v : assignment) out << format_double(v) << ",";
    out << format_double(table.probs[flat]) << "\n";
  }
  return out.str();
}

namespace {

void json_level(const DistTable& table, std::size_t var, std::size_t offset,
                std::size_t stride, std::ostringstream& out) {
  if (var == table.variables.size()) {
    out << format_double(table.probs[offset]);
    return;
  }
  std::size_t k = table.domains[var].values.size();
  std::size_t child_stride = stride / k;
  out << "{";
  for (std::size_t i = 0; i < k; ++i) {
    if (i) out << ",";
    out << "\"" << format_double(table.domains[var].values[i]) << "\":";
    json_level(table, var + 1, offset + i * child_stride, child_stride, out);
  }
  out << "}";
}

}  // namespace

std::string dist_table_json(const DistTable& table) {
  std::ostringstream out;
  out << "{\"variables\":[";
  for (std::size_t i = 0; i < table.variables.size(); ++i) {
    out << (i ? "," : "") << "\"" << table.variables[i] << "\"";
  }
  out << "],\"table\":";
  json_level(table, 0, 0, table.probs.size(), out);
  out << "}";
  return out.str();
}

}  // namespace causalkit
