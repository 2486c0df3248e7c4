#include "causalkit/sampling.hpp"

#include <cmath>
#include <stdexcept>

#include "causalkit/dsl.hpp"  // format_double
#include "causalkit/errors.hpp"

namespace causalkit {

namespace {

double sample_node(const Scm& scm, const std::string& node,
                   const std::vector<std::pair<std::string, double>>& env,
                   StreamRng& rng) {
  const Mechanism& mech = scm.mechanisms.at(node);
  const Domain& dom = scm.domains.at(node);
  if (const auto* cpt = std::get_if<DiscreteCpt>(&mech)) {
    std::vector<double> key;
    key.reserve(cpt->parents.size());
    for (const auto& p : cpt->parents) {
      double pv = 0.0;
      bool found = false;
      for (const auto& [name, value] : env) {
        if (name == p) {
          pv = value;
          found = true;
          break;
        }
      }
      if (!found) {
        throw std::logic_error("parent '" + p + "' sampled out of order");
      }
      int vi = scm.domains.at(p).index_of(pv);
      if (vi < 0) {
        throw DomainError("parent '" + p + "' holds value " +
                          format_double(pv) + " outside its domain");
      }
      key.push_back(scm.domains.at(p).values[vi]);
    }
    auto row = cpt->rows.find(key);
    if (row == cpt->rows.end()) {
      throw DomainError("cpt for '" + node + "' has no row for the parent "
                        "assignment drawn");
    }
    double u = rng.u01();
    double cum = 0.0;
    const auto& pmf = row->second;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
      cum += pmf[i];
      if (u < cum) return dom.values[i];
    }
    return dom.values.back();  // u landed in the rounding slack at 1.0
  }
  if (const auto* lg = std::get_if<LinearGaussian>(&mech)) {
    double value = lg->intercept;
    for (const auto& [parent, w] : lg->weights) {
      for (const auto& [name, v] : env) {
        if (name == parent) {
          value += w * v;
          break;
        }
      }
    }
    return value + lg->noise_std * rng.normal();
  }
  if (const auto* det = std::get_if<Deterministic>(&mech)) {
    double noise = noise_of(*det->expr).sample(rng);
    double value = eval_expr(*det->expr, env, noise);
    if (!dom.continuous) {
      int vi = dom.index_of(value);
      if (vi < 0) {
        throw DomainError("'" + node + "' evaluated to " +
                          format_double(value) +
                          ", which is outside its declared domain");
      }
      return dom.values[vi];
    }
    return value;
  }
  return std::get<Constant>(mech).value;
}

}  // namespace

std::map<std::string, double> sample_row(const Scm& scm, const RngSpec& rng,
                                         std::uint64_t row) {
  auto order = topo_order(scm.dag);
  if (!order) throw std::invalid_argument("model graph has a cycle");
  std::vector<std::pair<std::string, double>> env;
  env.reserve(order->size());
  for (const auto& node : *order) {
    StreamRng stream = derive_stream(rng, row, node);
    env.emplace_back(node, sample_node(scm, node, env, stream));
  }
  return {env.begin(), env.end()};
}

namespace {

// Shared driver: samples rows in stream order, hands each to `sink` until it
// says stop. Column order follows node declaration order.
template <typename Sink>
Dataset sample_loop(const Scm& scm, const RngSpec& rng, Sink&& sink) {
  check_algorithm(rng);
  auto order = topo_order(scm.dag);
  if (!order) throw std::invalid_argument("model graph has a cycle");
  Dataset data;
  data.columns = scm.dag.nodes;
  std::vector<std::size_t> position(order->size());  // order -> column
  for (std::size_t i = 0; i < order->size(); ++i) {
    for (std::size_t c = 0; c < data.columns.size(); ++c) {
      if (data.columns[c] == (*order)[i]) position[i] = c;
    }
  }
  std::vector<std::pair<std::string, double>> env(order->size());
  std::vector<double> row(data.columns.size());
  for (std::uint64_t index = 0;; ++index) {
    env.clear();
    for (const auto& node : *order) {
      StreamRng stream = derive_stream(rng, index, node);
      env.emplace_back(node, sample_node(scm, node, env, stream));
    }
    for (std::size_t i = 0; i < env.size(); ++i) {
      row[position[i]] = env[i].second;
    }
    if (!sink(index, row, data)) break;
  }
  return data;
}

}  // namespace

Dataset ancestral_sample(const Scm& scm, std::size_t n, const RngSpec& rng) {
  Dataset data = sample_loop(
      scm, rng, [&](std::uint64_t index, const std::vector<double>& row,
                    Dataset& out) {
        if (index >= n) return false;
        out.values.insert(out.values.end(), row.begin(), row.end());
        return index + 1 < n;
      });
  data.provenance = {"sampler=ancestral seed=" + std::to_string(rng.seed) +
                     " algorithm=" + rng.algorithm +
                     " n=" + std::to_string(n)};
  return data;
}

Predicate Predicate::equals(double v) {
  Predicate p;
  p.kind = Kind::Equals;
  p.value = v;
  return p;
}

Predicate Predicate::interval(double lo, double hi) {
  if (!(lo <= hi)) {
    throw std::invalid_argument("interval bounds out of order");
  }
  Predicate p;
  p.kind = Kind::Interval;
  p.lo = lo;
  p.hi = hi;
  return p;
}

bool Predicate::accepts(double v) const {
  if (kind == Kind::Equals) return v == value;
  return v >= lo && v <= hi;
}

Dataset rejection_condition(const Scm& scm, const Evidence& evidence,
                            std::size_t n, const RngSpec& rng,
                            std::uint64_t max_draws) {
  for (const auto& [node, pred] : evidence) {
    if (!scm.dag.has_node(node)) {
      throw std::invalid_argument("evidence names unknown node '" + node +
                                  "'");
    }
  }
  std::vector<std::size_t> pred_cols;
  std::size_t accepted = 0;
  std::uint64_t proposed = 0;
  Dataset data = sample_loop(
      scm, rng, [&](std::uint64_t index, const std::vector<double>& row,
                    Dataset& out) {
        if (pred_cols.empty()) {
          for (const auto& [node, pred] : evidence) {
            pred_cols.push_back(out.col(node));
          }
        }
        proposed = index + 1;
        bool keep = true;
        std::size_t pi = 0;
        for (const auto& [node, pred] : evidence) {
          if (!pred.accepts(row[pred_cols[pi++]])) {
            keep = false;
            break;
          }
        }
        if (keep) {
          out.values.insert(out.values.end(), row.begin(), row.end());
          accepted++;
        }
        if (accepted >= n) return false;
        if (proposed >= max_draws) {
          throw BudgetExhausted(
              "rejection sampling accepted " + std::to_string(accepted) +
              " of " + std::to_string(n) + " rows after " +
              std::to_string(proposed) +
              " draws; the evidence has (near-)zero probability");
        }
        return true;
      });
  double rate = proposed ? static_cast<double>(accepted) /
                               static_cast<double>(proposed)
                         : 0.0;
  data.provenance = {"sampler=rejection seed=" + std::to_string(rng.seed) +
                     " algorithm=" + rng.algorithm +
                     " n=" + std::to_string(n) +
                     " proposed=" + std::to_string(proposed) +
                     " acceptance_rate=" + format_double(rate)};
  return data;
}

DistTable fit_table(const Dataset& data,
                    const std::vector<std::string>& variables,
                    const std::map<std::string, Domain>& domains,
                    double alpha) {
  if (alpha < 0) throw std::invalid_argument("smoothing must be >= 0");
  DistTable table;
  std::vector<std::size_t> cols;
  std::size_t cells = 1;
  for (const auto& v : variables) {
    auto it = domains.find(v);
    if (it == domains.end() || it->second.continuous) {
      throw std::invalid_argument("fit_table needs a discrete domain for '" +
                                  v + "'");
    }
    table.variables.push_back(v);
    table.domains.push_back(it->second);
    cols.push_back(data.col(v));
    cells *= it->second.values.size();
  }
  std::size_t n = data.rows();
  if (n == 0 && alpha == 0.0) {
    throw DegenerateData("no rows and no smoothing; the table is undefined");
  }
  std::vector<double> counts(cells, 0.0);
  std::vector<double> assignment(variables.size());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      assignment[i] = data.at(r, cols[i]);
    }
    counts[table.index_of(assignment)] += 1.0;  // throws if out of domain
  }
  double denom = static_cast<double>(n) + alpha * static_cast<double>(cells);
  table.probs.resize(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    table.probs[i] = (counts[i] + alpha) / denom;
  }
  return table;
}

}  // namespace causalkit
