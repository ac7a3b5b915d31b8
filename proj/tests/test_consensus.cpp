#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "ppsim/consensus.hpp"
#include "ppsim/errors.hpp"

using namespace ppsim;

namespace {

std::vector<ParamVector> random_ensemble(std::size_t M, std::size_t d, RngStream& rng,
                                         double scale = 1.0) {
  std::vector<ParamVector> w(M, ParamVector(d));
  for (auto& x : w)
    for (double& xi : x) xi = scale * rng.normal();
  return w;
}

// The scalar spread functional whose per-worker gradient the full push term
// claims to be: (lambda_r / M) * sum_j ||x_j - mean(x)||. Finite differences
// of this function are the independent oracle.
double spread_functional(const std::vector<ParamVector>& workers, double lambda_r) {
  const ParamVector xbar = mean_vectors(workers);
  double s = 0.0;
  for (const auto& w : workers) s += distance(w, xbar);
  return lambda_r / static_cast<double>(workers.size()) * s;
}

}  // namespace

TEST_CASE("pull update interpolates toward the target") {
  ParamVector x{3.0, -1.0};
  ParamVector c{1.0, 1.0};
  ParamVector y = pull_update(x, c, 0.25);
  CHECK(y[0] == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(y[1] == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK_THROWS_AS(pull_update(x, ParamVector{1.0}, 0.5), DimensionMismatch);

  // Pulling every worker toward the ensemble mean scales every gap by
  // exactly (1 - alpha) and leaves the mean itself in place.
  RngStream rng(12, 0);
  auto workers = random_ensemble(6, 9, rng);
  const ParamVector xbar = mean_vectors(workers);
  const double alpha = 0.3;
  std::vector<ParamVector> pulled;
  for (const auto& w : workers) pulled.push_back(pull_update(w, xbar, alpha));
  for (std::size_t m = 0; m < workers.size(); ++m)
    CHECK(distance(pulled[m], xbar) ==
          doctest::Approx((1.0 - alpha) * distance(workers[m], xbar)).epsilon(1e-12));
  const ParamVector new_mean = mean_vectors(pulled);
  for (std::size_t i = 0; i < xbar.size(); ++i)
    CHECK(new_mean[i] == doctest::Approx(xbar[i]).epsilon(1e-12));
}

TEST_CASE("simplified push moves exactly lambda outward") {
  ParamVector x{1.0, 2.0};
  ParamVector a{1.0, 0.0};
  ParamVector y = push_update_simplified(x, a, 0.5);
  CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(y[1] == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(distance(y, x) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(distance(y, a) == doctest::Approx(2.5).epsilon(1e-12));

  // At the anchor the direction is undefined: the update is the identity.
  ParamVector at{1.0, 0.0};
  CHECK(push_update_simplified(at, a, 0.5) == at);
  ParamVector nearly{1.0, 1e-13};
  CHECK(push_update_simplified(nearly, a, 0.5) == nearly);

  CHECK_THROWS_AS(push_update_simplified(x, ParamVector{0.0}, 0.5), DimensionMismatch);
  CHECK_THROWS_AS(push_update_simplified(x, a, 0.5, 0.0), InvalidArgument);
}

TEST_CASE("combined update hand-computed value and radius map") {
  // 1-D: x = 3, anchor = 1, gap 2; alpha 0.3, lambda 0.5.
  // coefficient = 0.3 - 0.5/2 = 0.05, new x = 3 + 0.05*(1-3) = 2.9,
  // new gap = 2*(1-0.3) + 0.5 = 1.9.
  ParamVector y = combined_update({3.0}, {1.0}, 0.3, 0.5);
  CHECK(y[0] == doctest::Approx(2.9).epsilon(1e-15));
  CHECK(std::abs(y[0] - 1.0) == doctest::Approx(1.9).epsilon(1e-15));

  SUBCASE("gap maps to gap*(1-alpha)+lambda and the fixed point holds") {
    RngStream rng(31, 0);
    for (int t = 0; t < 50; ++t) {
      const std::size_t d = 3;
      ParamVector a(d), x(d);
      for (std::size_t i = 0; i < d; ++i) a[i] = rng.normal();
      ParamVector dir = sample_unit_sphere(d, rng);
      const double r = 0.01 + 5.0 * rng.uniform01();
      for (std::size_t i = 0; i < d; ++i) x[i] = a[i] + r * dir[i];
      const double alpha = 0.05 + 0.9 * rng.uniform01();
      const double lambda = rng.uniform01();
      ParamVector out = combined_update(x, a, alpha, lambda);
      CHECK(distance(out, a) ==
            doctest::Approx(r * (1.0 - alpha) + lambda).epsilon(1e-10));
    }
    // A worker sitting exactly at radius lambda/alpha stays there.
    const double alpha = 0.1, lambda = 0.5;
    ParamVector fixed = combined_update({lambda / alpha}, {0.0}, alpha, lambda);
    CHECK(fixed[0] == doctest::Approx(lambda / alpha).epsilon(1e-12));
  }

  SUBCASE("below eps0 only the pull acts") {
    ParamVector x{1.0 + 1e-14};
    ParamVector out = combined_update(x, {1.0}, 0.25, 0.5);
    CHECK(out[0] == doctest::Approx(1.0 + 0.75e-14).epsilon(1e-10));
  }

  SUBCASE("argument validation") {
    CHECK_THROWS_AS(combined_update({1.0}, {0.0}, 0.0, 0.1), InvalidArgument);
    CHECK_THROWS_AS(combined_update({1.0}, {0.0}, 1.0, 0.1), InvalidArgument);
    CHECK_THROWS_AS(combined_update({1.0}, {0.0}, 0.5, -0.1), InvalidArgument);
    CHECK_THROWS_AS(combined_update({1.0}, {0.0, 1.0}, 0.5, 0.1), DimensionMismatch);
  }
}

TEST_CASE("combined update equals pull then push against a frozen anchor") {
  RngStream rng(47, 0);
  for (int t = 0; t < 300; ++t) {
    const std::size_t d = 1 + static_cast<std::size_t>(rng.next_u64() % 20);
    ParamVector a(d), x(d);
    for (std::size_t i = 0; i < d; ++i) a[i] = 2.0 * rng.normal();
    ParamVector dir = sample_unit_sphere(d, rng);
    const double gap = 1e-6 + 4.0 * rng.uniform01();
    for (std::size_t i = 0; i < d; ++i) x[i] = a[i] + gap * dir[i];
    const double alpha = 0.01 + 0.97 * rng.uniform01();
    const double lambda = rng.uniform01();

    ParamVector combined = combined_update(x, a, alpha, lambda);
    ParamVector sequential = push_update_simplified(pull_update(x, a, alpha), a, lambda);
    for (std::size_t i = 0; i < d; ++i)
      CHECK(std::abs(combined[i] - sequential[i]) <= 1e-12);
  }
}

TEST_CASE("full push term matches finite differences of the spread functional") {
  RngStream rng(53, 0);
  for (int t = 0; t < 25; ++t) {
    const std::size_t M = 2 + static_cast<std::size_t>(rng.next_u64() % 7);
    const std::size_t d = 2 + static_cast<std::size_t>(rng.next_u64() % 10);
    auto workers = random_ensemble(M, d, rng, 2.0);
    const double lambda_r = 0.1 + rng.uniform01();
    const std::size_t m = static_cast<std::size_t>(rng.next_u64() % M);

    ParamVector g = push_gradient_full(workers, m, lambda_r);
    const double h = 1e-6;
    double err2 = 0.0, ref2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double save = workers[m][i];
      workers[m][i] = save + h;
      const double fp = spread_functional(workers, lambda_r);
      workers[m][i] = save - h;
      const double fm = spread_functional(workers, lambda_r);
      workers[m][i] = save;
      const double fd = (fp - fm) / (2.0 * h);
      err2 += (fd - g[i]) * (fd - g[i]);
      ref2 += g[i] * g[i];
    }
    REQUIRE(ref2 > 0.0);
    CHECK(std::sqrt(err2 / ref2) < 1e-6);
  }
}

TEST_CASE("full push preserves the ensemble mean for any anchor") {
  RngStream rng(59, 0);
  for (int t = 0; t < 20; ++t) {
    const std::size_t M = 2 + static_cast<std::size_t>(rng.next_u64() % 7);
    const std::size_t d = 1 + static_cast<std::size_t>(rng.next_u64() % 16);
    auto workers = random_ensemble(M, d, rng);
    const double lambda_r = rng.uniform01();

    ParamVector sum(d, 0.0);
    for (std::size_t m = 0; m < M; ++m)
      sum = axpy(1.0, push_gradient_full(workers, m, lambda_r), sum);
    for (double s : sum) CHECK(std::abs(s) <= 1e-12);

    // The cancellation is telescoping, so it holds against any frozen anchor,
    // not just the ensemble mean. That is what lets the trainer freeze the
    // anchor for a whole round without drifting the average.
    ParamVector odd_anchor(d);
    for (double& v : odd_anchor) v = 3.0 * rng.normal();
    ParamVector sum2(d, 0.0);
    for (std::size_t m = 0; m < M; ++m)
      sum2 = axpy(1.0, push_gradient_full_at(workers, odd_anchor, m, lambda_r), sum2);
    for (double s : sum2) CHECK(std::abs(s) <= 1e-12);
  }
}

TEST_CASE("push term decomposition recomposes exactly") {
  RngStream rng(61, 0);
  for (int t = 0; t < 20; ++t) {
    const std::size_t M = 2 + static_cast<std::size_t>(rng.next_u64() % 7);
    const std::size_t d = 2 + static_cast<std::size_t>(rng.next_u64() % 8);
    auto workers = random_ensemble(M, d, rng);
    const double lambda = 0.1 + rng.uniform01();
    const std::size_t m = static_cast<std::size_t>(rng.next_u64() % M);

    auto [t1, t2] = decompose_push_terms(workers, m, lambda);
    ParamVector full = push_gradient_full(workers, m, lambda * static_cast<double>(M));
    for (std::size_t i = 0; i < d; ++i)
      CHECK(std::abs(static_cast<double>(M) * (t1[i] + t2[i]) + full[i]) <= 1e-12);
  }
}

TEST_CASE("cross-coupling term vanishes on symmetric arrangements") {
  // Antipodal pair: unit vectors cancel, so the ensemble-coupling piece is
  // identically zero and the full push reduces to the simplified direction.
  std::vector<ParamVector> pair{{1.0, 0.0}, {-1.0, 0.0}};
  auto [t1, t2] = decompose_push_terms(pair, 0, 0.8);
  CHECK(norm2(t2) <= 1e-15);
  CHECK(t1[0] == doctest::Approx(-0.4).epsilon(1e-15));  // -(lambda/2) * u_0

  // Regular square: same cancellation.
  std::vector<ParamVector> square{{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
  auto [s1, s2] = decompose_push_terms(square, 2, 0.8);
  CHECK(norm2(s2) <= 1e-15);
  CHECK(norm2(s1) == doctest::Approx(0.2).epsilon(1e-12));

  // A lopsided cluster does leave a residual coupling term.
  std::vector<ParamVector> skew{{1.0, 0.0}, {0.9, 0.1}, {1.1, -0.2}, {-3.0, 0.0}};
  auto [k1, k2] = decompose_push_terms(skew, 0, 0.8);
  CHECK(norm2(k2) > 1e-3);
}

TEST_CASE("consensus targets") {
  std::vector<ParamVector> workers{{0.0, 0.0}, {4.0, 2.0}};
  ConsensusState state;

  SUBCASE("simple average") {
    ParamVector c = compute_consensus(ConsensusKind::SimpleAvg, workers, {}, {}, state, 0.1);
    CHECK(c[0] == 2.0);
    CHECK(c[1] == 1.0);
  }

  SUBCASE("leader selection picks lowest loss, ties to lowest index") {
    ParamVector c =
        compute_consensus(ConsensusKind::Lsgd, workers, {0.5, 0.2}, {}, state, 0.1);
    CHECK(c == workers[1]);
    ParamVector tie =
        compute_consensus(ConsensusKind::Lsgd, workers, {0.2, 0.2}, {}, state, 0.1);
    CHECK(tie == workers[0]);
    CHECK_THROWS_AS(compute_consensus(ConsensusKind::Lsgd, workers, {0.2}, {}, state, 0.1),
                    DimensionMismatch);
  }

  SUBCASE("gradient-norm weighting favors the flatter worker") {
    ParamVector c =
        compute_consensus(ConsensusKind::Mgrawa, workers, {}, {1.0, 3.0}, state, 0.1);
    // w = (1/(1+1e-8), 1/(3+1e-8)) normalized; x_C = w1 * (4,2).
    const double w0 = 1.0 / (1.0 + 1e-8);
    const double w1 = 1.0 / (3.0 + 1e-8);
    const double expect_x = 4.0 * w1 / (w0 + w1);
    CHECK(c[0] == doctest::Approx(expect_x).epsilon(1e-14));
    CHECK(c[1] == doctest::Approx(expect_x / 2.0).epsilon(1e-14));
    // Exactly-zero gradient norms are legal (regularizer keeps it finite)...
    CHECK_NOTHROW(
        compute_consensus(ConsensusKind::Mgrawa, workers, {}, {0.0, 0.0}, state, 0.1));
    // ...but negative ones are corrupt input.
    CHECK_THROWS_AS(
        compute_consensus(ConsensusKind::Mgrawa, workers, {}, {-1.0, 1.0}, state, 0.1),
        InvalidArgument);
    CHECK_THROWS_AS(compute_consensus(ConsensusKind::Mgrawa, workers, {}, {1.0}, state, 0.1),
                    DimensionMismatch);
  }

  SUBCASE("elastic center tracks the mean across calls") {
    // No center yet: the first call seeds it with the current mean, so the
    // first pull target is the plain average.
    ParamVector c =
        compute_consensus(ConsensusKind::Easgd, workers, {}, {}, state, 0.5);
    CHECK(c[0] == doctest::Approx(2.0).epsilon(1e-15));
    REQUIRE(state.easgd_center.has_value());

    // Workers move; the center follows at rate alpha rather than jumping.
    std::vector<ParamVector> moved{{10.0, 0.0}, {14.0, 2.0}};  // mean (12, 1)
    ParamVector c2 = compute_consensus(ConsensusKind::Easgd, moved, {}, {}, state, 0.5);
    CHECK(c2[0] == doctest::Approx(2.0 + 0.5 * (12.0 - 2.0)).epsilon(1e-15));
    CHECK((*state.easgd_center)[0] == doctest::Approx(7.0).epsilon(1e-15));

    // A pre-seeded center is honored, not overwritten.
    ConsensusState seeded;
    seeded.easgd_center = ParamVector{0.0, 0.0};
    ParamVector c3 =
        compute_consensus(ConsensusKind::Easgd, workers, {}, {}, seeded, 0.25);
    CHECK(c3[0] == doctest::Approx(0.25 * 2.0).epsilon(1e-15));

    ConsensusState bad;
    bad.easgd_center = ParamVector{0.0};
    CHECK_THROWS_AS(compute_consensus(ConsensusKind::Easgd, workers, {}, {}, bad, 0.25),
                    DimensionMismatch);
  }

  SUBCASE("group validation") {
    CHECK_THROWS_AS(compute_consensus(ConsensusKind::SimpleAvg, {}, {}, {}, state, 0.1),
                    InvalidArgument);
    std::vector<ParamVector> ragged{{1.0}, {1.0, 2.0}};
    CHECK_THROWS_AS(compute_consensus(ConsensusKind::SimpleAvg, ragged, {}, {}, state, 0.1),
                    DimensionMismatch);
  }
}

TEST_CASE("push coefficient schedules") {
  const long long T = 300;
  CHECK(lambda_at(123, T, 0.7, LambdaSchedule::Fixed) == 0.7);

  CHECK(lambda_at(0, T, 1.0, LambdaSchedule::CosineIncreasing) ==
        doctest::Approx(0.0).epsilon(1e-15));
  CHECK(lambda_at(T, T, 1.0, LambdaSchedule::CosineIncreasing) ==
        doctest::Approx(1.0).epsilon(1e-15));
  // Quarter of the way up the half-cosine: 0.5*(1 - cos(pi/3)) = 0.25.
  CHECK(lambda_at(100, T, 1.0, LambdaSchedule::CosineIncreasing) ==
        doctest::Approx(0.25).epsilon(1e-12));

  CHECK(lambda_at(0, T, 1.0, LambdaSchedule::CosineDecreasing) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(lambda_at(T, T, 1.0, LambdaSchedule::CosineDecreasing) ==
        doctest::Approx(0.0).epsilon(1e-15));

  // The two ramps are mirror images: inc(t) + dec(t) = lambda_max.
  for (long long t = 0; t <= T; t += 17) {
    const double sum = lambda_at(t, T, 0.8, LambdaSchedule::CosineIncreasing) +
                       lambda_at(t, T, 0.8, LambdaSchedule::CosineDecreasing);
    CHECK(sum == doctest::Approx(0.8).epsilon(1e-14));
  }

  CHECK_THROWS_AS(lambda_at(-1, T, 1.0, LambdaSchedule::Fixed), InvalidArgument);
  CHECK_THROWS_AS(lambda_at(T + 1, T, 1.0, LambdaSchedule::Fixed), InvalidArgument);
  CHECK_THROWS_AS(lambda_at(0, 0, 1.0, LambdaSchedule::Fixed), InvalidArgument);
  CHECK_THROWS_AS(lambda_at(0, T, -1.0, LambdaSchedule::Fixed), InvalidArgument);
}

TEST_CASE("quadratic synchronization rule") {
  CHECK(qsr_period(0.05, 1, 0.25) == 25);
  CHECK(qsr_period(0.8, 2, 0.25) == 2);
  CHECK(qsr_period(1.0, 1, 0.0) == 1);  // beta 0 disables the dynamic part
  CHECK(qsr_period(0.1, 7, 0.0) == 7);

  // Monotone non-increasing in the learning rate.
  long long prev = std::numeric_limits<long long>::max();
  for (double eta = 0.001; eta < 1.0; eta *= 1.7) {
    const long long tau = qsr_period(eta, 1, 0.25);
    CHECK(tau <= prev);
    prev = tau;
  }

  // Tiny learning rates would square to past the integer range; the period
  // saturates instead of overflowing.
  CHECK(qsr_period(1e-300, 1, 1.0) == std::numeric_limits<long long>::max());

  CHECK_THROWS_AS(qsr_period(0.0, 1, 0.25), InvalidArgument);
  CHECK_THROWS_AS(qsr_period(-0.1, 1, 0.25), InvalidArgument);
  CHECK_THROWS_AS(qsr_period(0.1, 0, 0.25), InvalidArgument);
  CHECK_THROWS_AS(qsr_period(0.1, 1, -0.25), InvalidArgument);
}

TEST_CASE("pull push config validation") {
  PullPushConfig ok;
  CHECK_NOTHROW(ok.validate());

  PullPushConfig bad = ok;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad.alpha = 1.1;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);

  bad = ok;
  bad.lambda = -0.5;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);

  bad = ok;
  bad.tau = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  // With the dynamic schedule active the fixed period is ignored entirely.
  bad.qsr = QsrConfig{4, 0.25};
  CHECK_NOTHROW(bad.validate());

  bad.qsr = QsrConfig{0, 0.25};
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad.qsr = QsrConfig{1, -1.0};
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}
