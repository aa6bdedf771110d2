#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "evil/evidential.hpp"

using namespace evil;

namespace {

Tensor<double> logit_vec(const std::vector<double>& z) {
  Tensor<double> t(1, static_cast<int64_t>(z.size()), 1, 1);
  t.v = z;
  return t;
}

}  // namespace

TEST_CASE("evidence transform: e = exp(tanh(z)/tau)") {
  auto e = evidence_from_logits(logit_vec({0.0, 0.0}), 0.5);
  CHECK(e.values.v[0] == Catch::Approx(1.0));
  CHECK(e.values.v[1] == Catch::Approx(1.0));

  // saturated tanh: [e^2, e^-2]
  auto e2 = evidence_from_logits(logit_vec({100.0, -100.0}), 0.5);
  CHECK(e2.values.v[0] == Catch::Approx(7.38905609893065).epsilon(1e-10));
  CHECK(e2.values.v[1] == Catch::Approx(0.1353352832366127).epsilon(1e-10));

  auto e4 = evidence_from_logits(logit_vec({0, 0, 0, 0}), 0.25);
  for (double x : e4.values.v) CHECK(x == 1.0);
}

TEST_CASE("evidence transform rejects bad input") {
  CHECK_THROWS_AS(evidence_from_logits(logit_vec({0, 0}), 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(evidence_from_logits(logit_vec({0, 0}), 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(evidence_from_logits(logit_vec({0, 0}), -0.3),
                  std::invalid_argument);
  auto bad = logit_vec({0, 0});
  bad.v[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(evidence_from_logits(bad, 0.5), std::invalid_argument);
  bad.v[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(evidence_from_logits(bad, 0.5), std::invalid_argument);
}

TEST_CASE("belief and uncertainty from evidence") {
  EvidenceMap<double> ev;
  ev.tau = 0.5;

  SECTION("zero evidence is total uncertainty") {
    ev.values = logit_vec({0.0, 0.0});
    auto dp = belief_and_uncertainty(ev);
    CHECK(dp.alpha.v[0] == 1.0);
    CHECK(dp.alpha.v[1] == 1.0);
    CHECK(dp.strength.v[0] == 2.0);
    CHECK(dp.belief.v[0] == 0.0);
    CHECK(dp.belief.v[1] == 0.0);
    CHECK(dp.uncertainty.v[0] == 1.0);
  }

  SECTION("unit evidence") {
    ev.values = logit_vec({1.0, 1.0});
    auto dp = belief_and_uncertainty(ev);
    CHECK(dp.strength.v[0] == 4.0);
    CHECK(dp.belief.v[0] == Catch::Approx(0.25));
    CHECK(dp.belief.v[1] == Catch::Approx(0.25));
    CHECK(dp.uncertainty.v[0] == Catch::Approx(0.5));
  }

  SECTION("saturated evidence example") {
    ev.values = logit_vec({7.3891, 0.1353});
    auto dp = belief_and_uncertainty(ev);
    CHECK(dp.strength.v[0] == Catch::Approx(9.5244).epsilon(1e-4));
    CHECK(dp.belief.v[0] == Catch::Approx(0.7758).epsilon(1e-3));
    CHECK(dp.belief.v[1] == Catch::Approx(0.0142).epsilon(1e-2));
    CHECK(dp.uncertainty.v[0] == Catch::Approx(0.2100).epsilon(1e-3));
  }

  SECTION("negative evidence rejected") {
    ev.values = logit_vec({-0.1, 1.0});
    CHECK_THROWS_AS(belief_and_uncertainty(ev), std::invalid_argument);
  }
}

TEST_CASE("dirichlet pdf") {
  CHECK(dirichlet_pdf({0.3, 0.7}, {1.0, 1.0}) == Catch::Approx(1.0));
  CHECK(dirichlet_pdf({0.5, 0.5}, {2.0, 2.0}) == Catch::Approx(1.5));
  CHECK(dirichlet_pdf({0.5, 0.6}, {2.0, 2.0}) == 0.0);  // off the simplex
  CHECK(dirichlet_pdf({-0.1, 1.1}, {2.0, 2.0}) == 0.0);
  CHECK_THROWS_AS(dirichlet_pdf({0.5, 0.5}, {0.0, 1.0}), std::invalid_argument);

  // boundary conventions
  CHECK(dirichlet_pdf({0.0, 1.0}, {1.0, 1.0}) == Catch::Approx(1.0));
  CHECK(dirichlet_pdf({0.0, 1.0}, {2.0, 2.0}) == 0.0);
  CHECK(dirichlet_pdf({0.0, 1.0}, {0.5, 2.0}) ==
        std::numeric_limits<double>::infinity());
}

TEST_CASE("dirichlet sampling moments and determinism") {
  const int64_t n = 1000000;
  {
    auto draws = sample_dirichlet({1.0, 1.0}, n, 7);
    double mean = 0.0;
    for (const auto& p : draws) mean += p[0];
    mean /= static_cast<double>(n);
    CHECK(std::abs(mean - 0.5) < 0.002);
  }
  {
    auto draws = sample_dirichlet({2.0, 1.0}, n, 11);
    double mean = 0.0;
    for (const auto& p : draws) mean += p[0];
    mean /= static_cast<double>(n);
    CHECK(std::abs(mean - 2.0 / 3.0) < 0.002);
  }
  {
    auto a = sample_dirichlet({5.0, 5.0}, 1, 42);
    auto b = sample_dirichlet({5.0, 5.0}, 1, 42);
    CHECK(a[0][0] == b[0][0]);
    CHECK(a[0][1] == b[0][1]);
  }
  CHECK_THROWS_AS(sample_dirichlet({1.0, 1.0}, 0, 3), std::invalid_argument);

  // every draw is a valid simplex point
  auto draws = sample_dirichlet({0.7, 2.0, 4.0}, 1000, 5);
  for (const auto& p : draws) CHECK(on_simplex(p));
}

TEST_CASE("subjective-logic invariants over random inputs") {
  Rng rng(123);
  for (int trial = 0; trial < 400; ++trial) {
    const int64_t K = 2 + static_cast<int64_t>(rng.below(7));  // 2..8
    const double tau = rng.uniform(0.05, 0.95);
    Tensor<double> z(1, K, 1, 1);
    for (auto& x : z.v) x = rng.uniform(-30.0, 30.0);
    auto ev = evidence_from_logits(z, tau);
    const double lo = std::exp(-1.0 / tau), hi = std::exp(1.0 / tau);
    for (double e : ev.values.v) {
      CHECK(e >= lo - 1e-12);
      CHECK(e <= hi + 1e-9);
    }
    auto dp = belief_and_uncertainty(ev);
    double bsum = 0.0;
    for (int64_t k = 0; k < K; ++k) {
      const double b = dp.belief.v[k];
      CHECK(b >= 0.0);
      CHECK(b < 1.0);
      bsum += b;
    }
    const double u = dp.uncertainty.v[0];
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
    CHECK(std::abs(u + bsum - 1.0) < 1e-6);
  }
}

TEST_CASE("raising one logit raises its belief and lowers uncertainty") {
  Rng rng(321);
  for (int trial = 0; trial < 200; ++trial) {
    const int64_t K = 2 + static_cast<int64_t>(rng.below(3));
    const double tau = rng.uniform(0.1, 0.9);
    Tensor<double> z(1, K, 1, 1);
    for (auto& x : z.v) x = rng.uniform(-3.0, 3.0);
    const int64_t j = static_cast<int64_t>(rng.below(K));
    auto dp0 = belief_and_uncertainty(evidence_from_logits(z, tau));
    Tensor<double> z2 = z;
    z2.v[j] += rng.uniform(0.01, 2.0);
    auto dp1 = belief_and_uncertainty(evidence_from_logits(z2, tau));
    CHECK(dp1.belief.v[j] >= dp0.belief.v[j]);
    CHECK(dp1.uncertainty.v[0] <= dp0.uncertainty.v[0]);
  }
}

TEST_CASE("evidence ops are deterministic across calls") {
  Rng rng(9);
  Tensor<double> z(2, 3, 4, 4);
  for (auto& x : z.v) x = rng.uniform(-5.0, 5.0);
  auto a = belief_and_uncertainty(evidence_from_logits(z, 0.25));
  auto b = belief_and_uncertainty(evidence_from_logits(z, 0.25));
  CHECK(a.alpha.v == b.alpha.v);
  CHECK(a.belief.v == b.belief.v);
  CHECK(a.uncertainty.v == b.uncertainty.v);
}

// Monte-Carlo check that the density integrates to 1 over the simplex.
// Importance sampling with proposal Dir((alpha+1)/2); the proposal density is
// evaluated here from lgamma directly so a normalization bug in
// dirichlet_pdf cannot cancel out.
TEST_CASE("dirichlet pdf integrates to one") {
  Rng rng(2024);
  const int64_t n = 1000000;
  for (int64_t K : {2, 4}) {
    for (int rep = 0; rep < 2; ++rep) {
      std::vector<double> alpha(K);
      for (auto& a : alpha) a = rng.uniform(1.0, 10.0);
      std::vector<double> prop(K);
      for (int64_t k = 0; k < K; ++k) prop[k] = 0.5 * (alpha[k] + 1.0);
      double prop_logb = -std::lgamma(std::accumulate(prop.begin(), prop.end(), 0.0));
      for (double a : prop) prop_logb += std::lgamma(a);
      auto draws = sample_dirichlet(prop, n, 100 + static_cast<uint64_t>(K) + rep);
      double acc = 0.0;
      for (const auto& p : draws) {
        double log_q = -prop_logb;
        for (int64_t k = 0; k < K; ++k)
          log_q += (prop[k] - 1.0) * std::log(std::max(p[k], 1e-300));
        acc += dirichlet_pdf(p, alpha) / std::exp(log_q);
      }
      const double integral = acc / static_cast<double>(n);
      INFO("K=" << K << " rep=" << rep);
      CHECK(std::abs(integral - 1.0) < 1e-2);
    }
  }
}
