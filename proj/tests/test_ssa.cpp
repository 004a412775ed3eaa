#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mfwsn/errors.hpp"
#include "mfwsn/ode.hpp"
#include "mfwsn/simplex.hpp"
#include "mfwsn/ssa.hpp"

using namespace mfwsn;

namespace {

const std::string kModelsDir = MFWSN_MODELS_DIR;

Pctmc aloha_pctmc(long long N) {
  const ModelBundle b = parse_model_file(kModelsDir + "/aloha3.json");
  return build_pctmc(b, N, CaptureEvaluator::shared(b.channel));
}

}  // namespace

TEST_CASE("a lone node always generates first") {
  const Pctmc p = aloha_pctmc(1);
  double mean_wait = 0.0;
  const int reps = 400;
  for (int rep = 0; rep < reps; ++rep) {
    const auto t = simulate(p, {1.0, 0.0, 0.0}, 5000.0, derive_stream_seed(1234, rep));
    REQUIRE(t.jump_times.size() >= 2);
    CHECK(p.transitions[t.fired[1]].label == "generate");
    CHECK(t.counts[1] == std::vector<std::int64_t>{0, 1, 0});
    mean_wait += t.jump_times[1];
  }
  mean_wait /= reps;
  // Exp(r_o) waiting time: mean 1/0.0055 ~ 181.8, std/sqrt(400) ~ 9.1
  CHECK(mean_wait > 181.8 - 4 * 9.1);
  CHECK(mean_wait < 181.8 + 4 * 9.1);
}

TEST_CASE("states stay on the lattice and conserve N") {
  const Pctmc p = aloha_pctmc(30);
  const auto t = simulate(p, {1.0, 0.0, 0.0}, 2000.0, 99);
  CHECK(t.jump_times.size() > 10);
  for (std::size_t k = 0; k < t.counts.size(); ++k) {
    std::int64_t sum = 0;
    for (auto c : t.counts[k]) {
      CHECK(c >= 0);
      sum += c;
    }
    CHECK(sum == 30);
    if (k > 0) {
      // Consecutive states differ by one state-change vector.
      int plus = 0, minus = 0, same = 0;
      for (std::size_t j = 0; j < t.counts[k].size(); ++j) {
        const auto d = t.counts[k][j] - t.counts[k - 1][j];
        if (d == 1) ++plus;
        else if (d == -1) ++minus;
        else if (d == 0) ++same;
      }
      CHECK(plus == 1);
      CHECK(minus == 1);
      CHECK(same == static_cast<int>(t.counts[k].size()) - 2);
    }
  }
}

TEST_CASE("off-lattice initial conditions are rejected") {
  const Pctmc p = aloha_pctmc(30);
  CHECK_THROWS_AS(simulate(p, {0.98, 0.015, 0.005}, 10.0, 1), ParameterError);
}

TEST_CASE("identical seeds reproduce identical trajectories") {
  const Pctmc p = aloha_pctmc(50);
  const auto a = simulate(p, {1.0, 0.0, 0.0}, 500.0, 2024);
  const auto b = simulate(p, {1.0, 0.0, 0.0}, 500.0, 2024);
  CHECK(a.jump_times == b.jump_times);
  CHECK(a.counts == b.counts);
  CHECK(a.fired == b.fired);
  const auto c = simulate(p, {1.0, 0.0, 0.0}, 500.0, 2025);
  CHECK(a.jump_times != c.jump_times);
}

TEST_CASE("cadlag interpolation picks the state after the last jump") {
  const Pctmc p = aloha_pctmc(5);
  const auto t = simulate(p, {1.0, 0.0, 0.0}, 3000.0, 7);
  REQUIRE(t.jump_times.size() >= 2);
  const double mid = 0.5 * (t.jump_times[0] + t.jump_times[1]);
  CHECK(t.occupancy_at(mid) == t.occupancy(0));
  CHECK(t.occupancy_at(t.jump_times[1]) == t.occupancy(1));
}

TEST_CASE("replication mean tracks the ODE solution") {
  const Pctmc p = aloha_pctmc(1000);
  const Trajectory ode = integrate(p, {1.0, 0.0, 0.0}, 50.0, OdeSettings{1e-10, 1e-12, 200});
  const double ode_xT = ode.back()[1];

  const int reps = 500;
  double mean = 0.0, m2 = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    const auto t = simulate(p, {1.0, 0.0, 0.0}, 50.0, derive_stream_seed(77, rep));
    const double v = t.occupancy_at(50.0)[1];
    mean += v;
    m2 += v * v;
  }
  mean /= reps;
  const double var = (m2 - reps * mean * mean) / (reps - 1);
  const double se = std::sqrt(var / reps);
  CHECK(std::abs(mean - ode_xT) < 3.0 * se);
}

TEST_CASE("convergence study is deterministic across thread counts") {
  const ModelBundle b = parse_model_file(kModelsDir + "/aloha3.json");
  auto q = CaptureEvaluator::shared(b.channel);
  auto build = [&](long long N) { return build_pctmc(b, N, q); };

  ConvergenceSettings s1;
  s1.threads = 1;
  s1.grid_points = 200;
  ConvergenceSettings s4 = s1;
  s4.threads = 4;

  const auto r1 = convergence_study(build, {20, 80}, {1.0, 0.0, 0.0}, 50.0, 6, 11, s1);
  const auto r4 = convergence_study(build, {20, 80}, {1.0, 0.0, 0.0}, 50.0, 6, 11, s4);
  REQUIRE(r1.entries.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(r1.entries[k].sup_errors == r4.entries[k].sup_errors);
    CHECK(r1.entries[k].mean_sup_error == r4.entries[k].mean_sup_error);
  }
}

TEST_CASE("sup-norm error shrinks with system size") {
  const ModelBundle b = parse_model_file(kModelsDir + "/aloha3.json");
  auto q = CaptureEvaluator::shared(b.channel);
  auto build = [&](long long N) { return build_pctmc(b, N, q); };
  const auto report =
      convergence_study(build, {20, 200, 2000}, {1.0, 0.0, 0.0}, 50.0, 10, 5);
  REQUIRE(report.entries.size() == 3);
  CHECK(report.entries[0].mean_sup_error > report.entries[1].mean_sup_error);
  CHECK(report.entries[1].mean_sup_error > report.entries[2].mean_sup_error);
}

TEST_CASE("convergence study validates its arguments") {
  const ModelBundle b = parse_model_file(kModelsDir + "/aloha3.json");
  auto q = CaptureEvaluator::shared(b.channel);
  auto build = [&](long long N) { return build_pctmc(b, N, q); };
  CHECK_THROWS_AS(convergence_study(build, {100, 50}, {1.0, 0.0, 0.0}, 10.0, 2, 1),
                  ParameterError);
  CHECK_THROWS_AS(convergence_study(build, {50}, {1.0, 0.0, 0.0}, 10.0, 0, 1),
                  ParameterError);
}
