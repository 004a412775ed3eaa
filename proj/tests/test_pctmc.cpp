#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mfwsn/errors.hpp"
#include "mfwsn/ode.hpp"
#include "mfwsn/pctmc.hpp"
#include "mfwsn/simplex.hpp"
#include "oracles.hpp"

using namespace mfwsn;
using oracles::table1_rhs;
using oracles::table2_rhs;

namespace {

const std::string kModelsDir = MFWSN_MODELS_DIR;

ModelBundle aloha() { return parse_model_file(kModelsDir + "/aloha3.json"); }
ModelBundle discovery() { return parse_model_file(kModelsDir + "/discovery6.json"); }

}  // namespace

TEST_CASE("single-receiver transformation emits one tuple per edge") {
  const auto b = aloha();
  auto q = CaptureEvaluator::shared(b.channel);
  const Pctmc p = transform_single_receiver(b.component, 1000, q,
                                            initial_occupancy(b.initial, b.component));
  CHECK(p.transitions.size() == 4);
  CHECK(p.n == 3);

  SUBCASE("only generate fires when everyone idles") {
    const std::vector<double> x{1.0, 0.0, 0.0};
    for (const auto& t : p.transitions) {
      if (t.label == "generate")
        CHECK(t.rate(x) == doctest::Approx(0.0055 * 1000));
      else
        CHECK(t.rate(x) == 0.0);
    }
  }
  SUBCASE("capture/failure split at full transmission") {
    const std::vector<double> x{0.0, 1.0, 0.0};
    const double qN = (*q)(1000.0);
    for (const auto& t : p.transitions) {
      if (t.label == "capture") CHECK(t.rate(x) == doctest::Approx(qN));
      if (t.label == "failure") CHECK(t.rate(x) == doctest::Approx(1000.0 - qN));
    }
  }
}

TEST_CASE("generated field equals the hand-coded 3-state system") {
  const auto b = aloha();
  auto q = CaptureEvaluator::shared(b.channel);
  std::mt19937_64 rng(42);
  for (long long N : {10LL, 500LL}) {
    const Pctmc p = transform_single_receiver(b.component, N, q,
                                              initial_occupancy(b.initial, b.component));
    for (int k = 0; k < 100; ++k) {
      const auto x = random_simplex_point(3, rng);
      const auto got = vector_field(p, x);
      const auto want = table1_rhs(x, static_cast<double>(N), *q);
      for (int j = 0; j < 3; ++j) CHECK(std::abs(got[j] - want[j]) < 1e-12);
    }
  }
}

TEST_CASE("capture plus failure exhausts the send rate") {
  const auto b = aloha();
  auto q = CaptureEvaluator::shared(b.channel);
  const Pctmc p = transform_single_receiver(b.component, 200, q,
                                            initial_occupancy(b.initial, b.component));
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    const auto x = random_simplex_point(3, rng);
    double capture = 0.0, failure = 0.0;
    for (const auto& t : p.transitions) {
      if (t.label == "capture") capture = t.rate(x);
      if (t.label == "failure") failure = t.rate(x);
    }
    CHECK(capture + failure == doctest::Approx(200.0 * x[1]).epsilon(1e-9));
  }
}

TEST_CASE("unpaired capture or failure is rejected") {
  std::string text = R"({
    "states": ["A", "B", "C"],
    "initial": {"A": 1.0},
    "transitions": [
      {"from": "A", "to": "B", "action": {"kind": "capture"}, "rate": 1.0}
    ],
    "channel": {"beta": 4.0, "z": 10.0, "spatial": "uniform"},
    "N": 10
  })";
  const ModelBundle b = parse_model(text);
  auto q = CaptureEvaluator::shared(b.channel);
  CHECK_THROWS_WITH_AS(
      transform_single_receiver(b.component, 10, q, {1.0, 0.0, 0.0}),
      doctest::Contains("exactly one capture and one failure"), ModelError);
}

TEST_CASE("mismatched capture/failure rates are rejected") {
  std::string text = R"({
    "states": ["A", "B", "C"],
    "initial": {"A": 1.0},
    "transitions": [
      {"from": "A", "to": "B", "action": {"kind": "capture"}, "rate": 1.0},
      {"from": "A", "to": "C", "action": {"kind": "failure"}, "rate": 2.0}
    ],
    "channel": {"beta": 4.0, "z": 10.0, "spatial": "uniform"},
    "N": 10
  })";
  const ModelBundle b = parse_model(text);
  auto q = CaptureEvaluator::shared(b.channel);
  CHECK_THROWS_WITH_AS(transform_single_receiver(b.component, 10, q, {1.0, 0.0, 0.0}),
                       doctest::Contains("rates differ"), ModelError);
}

TEST_CASE("broadcast transformation matches the hand-coded 6-state system") {
  const auto b = discovery();
  auto q = CaptureEvaluator::shared(b.channel);
  const Pctmc p = build_pctmc(b, b.N, q, QArgConvention::InterferenceTotal);
  // The receive(ack) self-loop at state 0 carries a zero state change and
  // is dropped; 9 population transitions remain.
  CHECK(p.transitions.size() == 9);

  std::mt19937_64 rng(11);
  for (int k = 0; k < 100; ++k) {
    const auto x = random_simplex_point(6, rng);
    const auto got = vector_field(p, x);
    const auto want = table2_rhs(x, 500.0, 0.05, *q);
    for (int j = 0; j < 6; ++j) CHECK(std::abs(got[j] - want[j]) < 1e-12);
  }
}

TEST_CASE("broadcast q argument uses d = N*p under the sender-count convention") {
  const auto b = discovery();
  auto q = CaptureEvaluator::shared(b.channel);
  // Same d = 25 from two (N, p) splits: rates per node must agree.
  const Pctmc p500 = build_pctmc(b, 500, q, QArgConvention::SenderCount);
  ModelBundle b2 = b;
  b2.N = 1000;
  b2.broadcast->p = 0.025;
  b2.broadcast->N = 1000;
  const Pctmc p1000 = build_pctmc(b2, 1000, q, QArgConvention::SenderCount);

  std::mt19937_64 rng(5);
  for (int k = 0; k < 20; ++k) {
    const auto x = random_simplex_point(6, rng);
    for (std::size_t f = 0; f < p500.transitions.size(); ++f) {
      const double g500 = p500.transitions[f].rate(x) / 500.0;
      const double g1000 = p1000.transitions[f].rate(x) / 1000.0;
      CHECK(g500 == doctest::Approx(g1000).epsilon(1e-12));
    }
  }
}

TEST_CASE("no senders means receive rates are exactly zero") {
  const auto b = discovery();
  auto q = CaptureEvaluator::shared(b.channel);
  const Pctmc p = build_pctmc(b, 500, q);
  // All msg senders (states 1 and 3) empty: receive(msg) cannot fire.
  const std::vector<double> x{0.5, 0.0, 0.5, 0.0, 0.0, 0.0};
  for (const auto& t : p.transitions) {
    if (t.label == "receive(msg)") CHECK(t.rate(x) == 0.0);
    CHECK_FALSE(std::isnan(t.rate(x)));
  }
  // Every sender state empty: all receives are zero, no NaN anywhere.
  const std::vector<double> y{1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  for (const auto& t : p.transitions)
    if (t.label.rfind("receive", 0) == 0) CHECK(t.rate(y) == 0.0);
}

TEST_CASE("receive without any sender is a model error") {
  const std::string text = R"({
    "states": ["A", "B"],
    "initial": {"A": 1.0},
    "transitions": [
      {"from": "A", "to": "B", "action": {"kind": "receive", "message": "m"}, "rate": null},
      {"from": "B", "to": "A", "action": {"kind": "send", "message": "other"}, "rate": 1.0}
    ],
    "channel": {"beta": 4.0, "z": 10.0, "spatial": "uniform"},
    "broadcast": {"p": 0.5},
    "N": 10
  })";
  const ModelBundle b = parse_model(text);
  auto q = CaptureEvaluator::shared(b.channel);
  CHECK_THROWS_WITH_AS(build_pctmc(b, 10, q), doctest::Contains("no matching sender"),
                       ModelError);
}

TEST_CASE("state-change vectors move one unit of occupancy") {
  for (const auto& bundle : {aloha(), discovery()}) {
    auto q = CaptureEvaluator::shared(bundle.channel);
    const Pctmc p = build_pctmc(bundle, 100, q);
    for (const auto& t : p.transitions) {
      CHECK(t.from != t.to);
      CHECK(t.from >= 0);
      CHECK(t.to < static_cast<int>(p.n));
    }
  }
}

TEST_CASE("rates are nonnegative across the simplex") {
  std::mt19937_64 rng(99);
  for (const auto& bundle : {aloha(), discovery()}) {
    auto q = CaptureEvaluator::shared(bundle.channel);
    const Pctmc p = build_pctmc(bundle, 300, q);
    for (int k = 0; k < 1000; ++k) {
      const auto x = random_simplex_point(p.n, rng);
      for (const auto& t : p.transitions) {
        const double r = t.rate(x);
        CHECK(r >= 0.0);
        CHECK(std::isfinite(r));
      }
    }
  }
}

TEST_CASE("density dependence holds for the broadcast transformation") {
  const auto b = discovery();
  auto q = CaptureEvaluator::shared(b.channel);
  // Fixed neighborhood size d = 5 across system sizes (p = d/N stays <= 1).
  const double d = 5.0;
  auto build = [&](long long N) {
    BroadcastConfig cfg = *b.broadcast;
    cfg.N = N;
    cfg.p = d / static_cast<double>(N);
    return transform_broadcast(b.component, cfg, q,
                               initial_occupancy(b.initial, b.component));
  };
  std::mt19937_64 rng(4);
  std::vector<std::vector<double>> probes;
  for (int k = 0; k < 50; ++k) probes.push_back(random_simplex_point(6, rng));

  const auto report = check_density_dependence(build, {10, 100, 1000}, probes);
  CHECK(report.passes(1e-9));

  SUBCASE("a corrupted rate fails the check") {
    auto corrupt = [&](long long N) {
      Pctmc p = build(N);
      const double Nd = static_cast<double>(N);
      p.transitions[0].rate = [Nd](std::span<const double> x) {
        return Nd * Nd * x[0];  // quadratic in N: not density-dependent
      };
      return p;
    };
    const auto bad = check_density_dependence(corrupt, {10, 100, 1000}, probes);
    CHECK_FALSE(bad.passes(1e-9));
  }
  SUBCASE("structural mismatches are an error") {
    auto mangled = [&](long long N) {
      Pctmc p = build(N);
      if (N > 10) p.transitions.pop_back();
      return p;
    };
    CHECK_THROWS_AS(check_density_dependence(mangled, {10, 100}, probes), ModelError);
  }
}

TEST_CASE("internal transitions are density-dependent under transformation 1") {
  const auto b = aloha();
  auto q = CaptureEvaluator::shared(b.channel);
  auto build = [&](long long N) {
    return transform_single_receiver(b.component, N, q,
                                     initial_occupancy(b.initial, b.component));
  };
  std::mt19937_64 rng(8);
  std::vector<std::vector<double>> probes;
  for (int k = 0; k < 20; ++k) probes.push_back(random_simplex_point(3, rng));

  const auto report = check_density_dependence(build, {10, 100, 1000}, probes);
  for (const auto& t : report.transitions)
    if (t.label == "generate" || t.label == "resend") CHECK(t.max_rel_dev < 1e-12);

  // In the linear regime of q (N*x_T < 1 for every N) the capture and
  // failure rates scale exactly as well.
  const std::vector<std::vector<double>> small{{0.9995, 0.0003, 0.0002}};
  const auto linear = check_density_dependence(build, {10, 100, 1000}, small);
  CHECK(linear.passes(1e-9));
}

TEST_CASE("ode rendering names every state") {
  const auto b = aloha();
  auto q = CaptureEvaluator::shared(b.channel);
  const Pctmc p = build_pctmc(b, 100, q);
  const std::string text = render_ode_system(p);
  CHECK(text.find("dx_O/dt =") != std::string::npos);
  CHECK(text.find("dx_T/dt =") != std::string::npos);
  CHECK(text.find("dx_R/dt =") != std::string::npos);
  CHECK(text.find("q(N*x_T)") != std::string::npos);
}
