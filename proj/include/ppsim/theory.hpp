#pragma once

#include <cstddef>
#include <vector>

#include "ppsim/param_space.hpp"
#include "ppsim/trainer.hpp"

namespace ppsim {

enum class RecurrenceMode { Deterministic, Stochastic };

// One-step consensus-gap recurrence r_{k+1} = C r_k + drift, C = 1 - alpha.
// Deterministic mode drives the drift with the push alone (drift = lambda).
// Stochastic mode adds the worst-case noise and finite-ensemble envelope:
// drift = eta C sqrt(tau) sigma0 sqrt((M+1)/M) + lambda (1 + 1/sqrt(M)).
struct GapRecurrenceConfig {
  double alpha = 0.1;
  double lambda = 0.0;
  double eta = 0.0;
  double sigma0 = 0.0;
  long long tau = 1;
  int M = 1;
  long long rounds = 1;  // K
  RecurrenceMode mode = RecurrenceMode::Deterministic;

  void validate() const;
};

// Returns r_0, r_1, ..., r_K (K + 1 values) with r_0 = 0.
std::vector<double> gap_recurrence(const GapRecurrenceConfig& cfg);

// Limiting consensus gap lambda / alpha.
double valley_width_limit(double alpha, double lambda);

struct PacBayesParams {
  long long d = 1;      // parameter dimension
  double c = 1.0;       // >= 1
  double D0 = 1.0;      // > 0
  double beta = 0.0;    // in [0, 1)
  double sigma0 = 1.0;  // > 0
  long long n = 2;      // sample count, >= 2
  double delta = 0.05;  // in (0, 1)
  long long J = 1;      // grid size, >= 1

  void validate() const;
};

// gap(r) = sqrt[(d/2 (c - 1 - log c) + D0 / (2 sigma0^2 r^(1-beta))
//                + log(n J / delta)) / (2 (n - 1))]
// Strictly decreasing in r whenever beta < 1.
double pac_bayes_gap(double r, const PacBayesParams& p);

// r_j = r_min (1+gamma)^j for j = 0..J, J = ceil(log_{1+gamma}(r_max/r_min)),
// so the last point reaches or passes r_max. r_min = r_max gives one point.
std::vector<double> geometric_grid(double r_min, double r_max, double gamma);

struct CircleSpread {
  double direct = 0.0;    // sum over points of squared distance to their mean
  double identity = 0.0;  // M C^2 - M (xbar^2 + ybar^2)
};

// Spread of points on a radius-C circle at the given angles, computed both
// directly and through the closed-form identity. Maximum M C^2 at equal
// spacing.
CircleSpread circle_spread(const std::vector<double>& angles, double C);

struct NonconvexBound {
  double value = 0.0;
  bool side_condition_ok = false;  // (1 - alpha - lambda - 3 L eta) > 0
};

// 2 (f0 - f*) / (eta T) + 3 L eta (alpha^2 Delta^2 + lambda^2 + sigma^2)
//   + alpha Delta^2 + lambda
NonconvexBound nonconvex_bound_rhs(double f0_minus_fstar, double eta, long long T,
                                   double L, double alpha, double lambda, double Delta,
                                   double sigma);

struct MeanUnitVectorReport {
  double mean_norm = 0.0;  // Monte Carlo E||mean of M iid unit vectors||
  double bound = 0.0;      // 1 / sqrt(M)
  double std_error = 0.0;
  bool pass = false;  // mean_norm <= bound + 3 std_error
};

MeanUnitVectorReport mean_unit_vector_check(int M, std::size_t d, int trials,
                                            RngStream& rng);

struct ValleyWidthReport {
  double terminal = 0.0;  // measured terminal consensus distance
  double limit = 0.0;     // lambda / alpha
  double slack = 0.0;     // noise envelope, eta C sqrt(tau) sigma0 sqrt((M+1)/M) / alpha
  double lower = 0.0;     // limit (1 - 1/sqrt(M)) - slack
  double upper = 0.0;     // limit (1 + 1/sqrt(M)) + slack
  bool pass = false;
};

// Checks a finished run's terminal consensus distance against the predicted
// band around lambda / alpha. tau is taken from the run's final round.
// Requires a run with the push enabled.
ValleyWidthReport empirical_valley_width_check(const RunResult& run, double alpha,
                                               double lambda, double eta, double sigma0,
                                               int M);

}  // namespace ppsim
