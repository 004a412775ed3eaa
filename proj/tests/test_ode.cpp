#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mfwsn/errors.hpp"
#include "mfwsn/ode.hpp"
#include "mfwsn/simplex.hpp"

using namespace mfwsn;

namespace {

const std::string kModelsDir = MFWSN_MODELS_DIR;

Pctmc aloha_pctmc(long long N, bool uniform_channel = false) {
  ModelBundle b = parse_model_file(kModelsDir + "/aloha3.json");
  if (uniform_channel) b.channel = ChannelModel::uniform(4.0, 10.0);
  return build_pctmc(b, N, CaptureEvaluator::shared(b.channel));
}

Pctmc discovery_pctmc(long long N = 500) {
  const ModelBundle b = parse_model_file(kModelsDir + "/discovery6.json");
  return build_pctmc(b, N, CaptureEvaluator::shared(b.channel));
}

}  // namespace

TEST_CASE("vector field at the all-idle corner") {
  const Pctmc p = aloha_pctmc(100);
  const auto f = vector_field(p, std::vector<double>{1.0, 0.0, 0.0});
  CHECK(f[0] == doctest::Approx(-0.0055).epsilon(1e-12));
  CHECK(f[1] == doctest::Approx(0.0055).epsilon(1e-12));
  CHECK(f[2] == 0.0);
}

TEST_CASE("vector field entries sum to zero") {
  std::mt19937_64 rng(17);
  const Pctmc p = aloha_pctmc(250);
  for (int k = 0; k < 100; ++k) {
    const auto x = random_simplex_point(3, rng);
    const auto f = vector_field(p, x);
    CHECK(std::abs(f[0] + f[1] + f[2]) < 1e-14);
  }
}

TEST_CASE("discovery field at the all-processing corner") {
  const Pctmc p = discovery_pctmc();
  const auto f = vector_field(p, std::vector<double>{1.0, 0, 0, 0, 0, 0});
  CHECK(f[0] == doctest::Approx(-1.0).epsilon(1e-12));  // r_process = 1
  CHECK(f[1] == doctest::Approx(1.0).epsilon(1e-12));
  for (int j = 2; j < 6; ++j) CHECK(f[j] == 0.0);
}

TEST_CASE("trajectories stay on the simplex") {
  const Pctmc p = aloha_pctmc(90);
  const Trajectory t = integrate(p, {0.0, 1.0, 0.0}, 500.0);
  REQUIRE(t.points.size() >= 500);
  for (const auto& x : t.points) CHECK(simplex_defect(x) < 1e-8);
  CHECK(t.max_clipped_defect < 1e-8);
  CHECK(simplex_defect(t.back()) < 1e-8);
}

TEST_CASE("integration self-converges as tolerance halves") {
  const Pctmc p = aloha_pctmc(90);
  OdeSettings coarse{1e-6, 1e-8, 100};
  OdeSettings fine{5e-7, 5e-9, 100};
  const auto a = integrate(p, {0.0, 1.0, 0.0}, 200.0, coarse).back();
  const auto b = integrate(p, {0.0, 1.0, 0.0}, 200.0, fine).back();
  CHECK(linf_distance(a, b) < 1e-6);
}

TEST_CASE("integrate validates inputs") {
  const Pctmc p = aloha_pctmc(90);
  CHECK_THROWS_AS(integrate(p, {0.5, 0.1, 0.1}, 10.0), ParameterError);
  CHECK_THROWS_AS(integrate(p, {1.0, 0.0, 0.0}, -1.0), ParameterError);
}

TEST_CASE("log-normal ALOHA settles with an empty backlog from idle start") {
  const Pctmc p = aloha_pctmc(90);
  const Trajectory t = integrate(p, {1.0, 0.0, 0.0}, 2000.0);
  CHECK(t.back()[2] < 0.01);  // x_R ~ 0: messages nearly always get through
}

TEST_CASE("log-normal ALOHA traps in the backlog state from saturated start") {
  const Pctmc p = aloha_pctmc(90);
  const Trajectory t = integrate(p, {0.0, 1.0, 0.0}, 2000.0);
  CHECK(t.back()[2] > 0.5);  // most nodes stuck retransmitting
}

TEST_CASE("uniform ALOHA reaches one equilibrium from both starts") {
  const Pctmc p = aloha_pctmc(90, /*uniform_channel=*/true);
  const FixpointSettings fs;
  const auto a = find_fixpoint(p, {1.0, 0.0, 0.0}, fs);
  const auto b = find_fixpoint(p, {0.0, 1.0, 0.0}, fs);
  CHECK(linf_distance(a.location, b.location) < 1e-4);
}

TEST_CASE("fixpoints satisfy the residual contract") {
  const Pctmc p = aloha_pctmc(90);
  const FixpointSettings fs;
  const auto good = find_fixpoint(p, {1.0, 0.0, 0.0}, fs);
  CHECK(good.residual < fs.tol);
  const auto f = vector_field(p, good.location);
  double norm = 0.0;
  for (double v : f) norm = std::max(norm, std::abs(v));
  CHECK(norm < fs.tol);

  const auto bad = find_fixpoint(p, {0.0, 1.0, 0.0}, fs);
  CHECK(bad.residual < fs.tol);
  CHECK(linf_distance(good.location, bad.location) > 0.1);
}

TEST_CASE("finite-difference jacobian columns conserve flow") {
  const Pctmc p = aloha_pctmc(120);
  std::mt19937_64 rng(31);
  const double h = 1e-6;
  for (int k = 0; k < 10; ++k) {
    const auto x = random_simplex_point(3, rng);
    for (std::size_t j = 0; j < 3; ++j) {
      auto xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const auto fp = vector_field(p, xp);
      const auto fm = vector_field(p, xm);
      double col_sum = 0.0;
      for (std::size_t r = 0; r < 3; ++r) col_sum += (fp[r] - fm[r]) / (2.0 * h);
      CHECK(std::abs(col_sum) < 1e-6);
    }
  }
}

TEST_CASE("basin grid classifies both attractors") {
  const Pctmc p = aloha_pctmc(90);
  const FixpointSettings fs;
  const std::vector<Fixpoint> fps{find_fixpoint(p, {1.0, 0.0, 0.0}, fs),
                                  find_fixpoint(p, {0.0, 1.0, 0.0}, fs)};
  BasinClosure closure;
  closure.remainder_state = 1;  // leftover occupancy goes to T
  BasinSettings bs;
  bs.t_max = 4000.0;
  const BasinGrid grid = basin_grid(p, 0, 2, 12, closure, fps, bs);

  // Feasible cells fill the triangle a + b <= 1.
  CHECK(grid.cells.size() == 12 * 13 / 2);
  int count[2] = {0, 0};
  int unresolved = 0;
  for (const auto& c : grid.cells) {
    CHECK(c.a + c.b <= 1.0 + 1e-12);
    if (c.label == 0) ++count[0];
    else if (c.label == 1) ++count[1];
    else ++unresolved;
    if (c.a == 1.0 && c.b == 0.0) CHECK(c.label == 0);
  }
  CHECK(count[0] > 0);
  CHECK(count[1] > 0);
  CHECK(unresolved < static_cast<int>(grid.cells.size()) / 10);
}

TEST_CASE("basin grid requires fixpoints") {
  const Pctmc p = aloha_pctmc(90);
  BasinClosure closure;
  closure.remainder_state = 1;
  CHECK_THROWS_AS(basin_grid(p, 0, 2, 10, closure, {}), ParameterError);
}

TEST_CASE("vector field grid export") {
  const Pctmc p = aloha_pctmc(90);
  BasinClosure closure;
  closure.remainder_state = 1;
  const auto samples = export_vector_field_grid(p, 0, 2, 11, closure);
  CHECK(samples.size() == 11 * 12 / 2);

  const FixpointSettings fs;
  const auto good = find_fixpoint(p, {1.0, 0.0, 0.0}, fs);
  for (const auto& s : samples) {
    double sum = 0.0;
    for (double v : s.derivative) sum += v;
    CHECK(std::abs(sum) < 1e-12);  // conservation at every sample
    if (linf_distance(s.point, good.location) < 1e-6) {
      for (double v : s.derivative) CHECK(std::abs(v) < 1e-6);
    }
  }
}

TEST_CASE("trajectory interpolation brackets output times") {
  const Pctmc p = aloha_pctmc(90);
  const Trajectory t = integrate(p, {1.0, 0.0, 0.0}, 100.0, OdeSettings{1e-8, 1e-10, 50});
  const auto mid = t.at(33.3);
  CHECK(simplex_defect(mid) < 1e-6);
  CHECK(t.at(0.0) == t.points.front());
  CHECK(t.at(1e9) == t.points.back());
}
