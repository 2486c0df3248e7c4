#include <benchmark/benchmark.h>

#include <string>

#include "causalkit/dsl.hpp"
#include "causalkit/estimators.hpp"
#include "causalkit/exact.hpp"
#include "causalkit/sampling.hpp"

namespace {

using namespace causalkit;

Scm parse_or_abort(const std::string& text) {
  ParseResult r = parse_scm(text);
  if (!r.ok()) throw std::runtime_error(format_parse_errors(r.errors));
  return *r.scm;
}

const char kVaccine[] = R"(
var x ~ bernoulli(0.5);
var a : {0, 1} cpt
  | x=0 -> 0.8, 0.2
  | x=1 -> 0.2, 0.8;
var y : {0, 1} cpt
  | a=0, x=0 -> 0.9, 0.1
  | a=0, x=1 -> 0.4, 0.6
  | a=1, x=0 -> 0.6, 0.4
  | a=1, x=1 -> 0.1, 0.9;
)";

// Chain of n binary nodes, each a noisy copy of its predecessor.
std::string chain_model(int n) {
  std::string text = "var v0 ~ bernoulli(0.5);\n";
  for (int i = 1; i < n; ++i) {
    std::string prev = "v" + std::to_string(i - 1);
    std::string cur = "v" + std::to_string(i);
    text += "var " + cur + " : {0, 1} cpt | " + prev + "=0 -> 0.9, 0.1 | " +
            prev + "=1 -> 0.1, 0.9;\n";
  }
  return text;
}

void BM_AncestralSample(benchmark::State& state) {
  Scm scm = parse_or_abort(kVaccine);
  auto n = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) {
    Dataset d = ancestral_sample(scm, n, RngSpec{7});
    benchmark::DoNotOptimize(d.values.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}
BENCHMARK(BM_AncestralSample)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_JointTable(benchmark::State& state) {
  Scm scm = parse_or_abort(chain_model(static_cast<int>(state.range(0))));
  for (auto _ : state) {
    DistTable t = joint_table(scm);
    benchmark::DoNotOptimize(t.probs.data());
  }
}
BENCHMARK(BM_JointTable)->Arg(8)->Arg(12)->Arg(16)->Arg(20);

void BM_ConditionalQuery(benchmark::State& state) {
  Scm scm = parse_or_abort(chain_model(16));
  DistTable joint = joint_table(scm);
  for (auto _ : state) {
    DistTable t = conditional_query(joint, {"v15"}, {{"v0", 1.0}});
    benchmark::DoNotOptimize(t.probs.data());
  }
}
BENCHMARK(BM_ConditionalQuery);

void BM_EstimatorIpw(benchmark::State& state) {
  Scm scm = parse_or_abort(kVaccine);
  Dataset d = ancestral_sample(scm, static_cast<std::uint64_t>(state.range(0)),
                               RngSpec{7});
  for (auto _ : state) {
    EstimateReport r = estimate_ipw(d, "a", "y", {"x"}, PropensityOptions{});
    benchmark::DoNotOptimize(r.estimate);
  }
}
BENCHMARK(BM_EstimatorIpw)->Arg(1000)->Arg(10000);

void BM_EstimatorDml(benchmark::State& state) {
  Scm scm = parse_or_abort(
      "var x ~ normal(0, 1);\n"
      "var a := x + normal(0, 1);\n"
      "var y := 2*a + 3*x + normal(0, 1);\n");
  Dataset d = ancestral_sample(scm, static_cast<std::uint64_t>(state.range(0)),
                               RngSpec{7});
  for (auto _ : state) {
    EstimateReport r = estimate_dml(d, "a", "y", {"x"}, 5, RngSpec{1});
    benchmark::DoNotOptimize(r.estimate);
  }
}
BENCHMARK(BM_EstimatorDml)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
