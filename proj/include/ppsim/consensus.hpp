#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "ppsim/param_space.hpp"

namespace ppsim {

enum class ConsensusKind { SimpleAvg, Easgd, Lsgd, Mgrawa };
enum class PushMode { Off, Simplified, FullGradient };
enum class LambdaSchedule { Fixed, CosineIncreasing, CosineDecreasing };

// Quadratic synchronization rule: the communication period grows as the
// learning rate decays, tau_t = max(tau_base, floor((beta / eta_t)^2)).
struct QsrConfig {
  long long tau_base = 1;
  double beta = 0.0;
};

struct PullPushConfig {
  double alpha = 0.1;   // pull strength, (0, 1]
  double lambda = 0.0;  // push distance per round, >= 0
  long long tau = 1;    // fixed communication period (ignored when qsr is set)
  ConsensusKind consensus_kind = ConsensusKind::SimpleAvg;
  PushMode push_mode = PushMode::Off;
  LambdaSchedule lambda_schedule = LambdaSchedule::Fixed;
  std::optional<QsrConfig> qsr;

  void validate() const;
};

struct ConsensusState {
  std::optional<ParamVector> easgd_center;
  long round_index = 0;
};

// The pull target x_C. SimpleAvg returns the exact mean; Lsgd the parameters
// of the lowest-loss worker (ties break to the lowest index); Mgrawa a
// weighted mean with w_m proportional to 1/(grad_norm_m + 1e-8); Easgd a
// moving center updated as z <- z + alpha * mean(x_m - z) and returned after
// the update. Reductions run in ascending worker order.
ParamVector compute_consensus(ConsensusKind kind, const std::vector<ParamVector>& params,
                              const std::vector<double>& losses,
                              const std::vector<double>& grad_norms, ConsensusState& state,
                              double alpha);

// x <- (1 - alpha) x + alpha x_C
ParamVector pull_update(const ParamVector& x_m, const ParamVector& x_C, double alpha);

// x <- x + lambda (x - x_A)/||x - x_A||. Gaps below eps0 skip the push (the
// direction is undefined at zero gap and the skip is its continuous limit).
ParamVector push_update_simplified(const ParamVector& x_m, const ParamVector& x_A,
                                   double lambda, double eps0 = 1e-12);

// Exact ensemble push term for worker m:
//   (lambda_r / M^2) * (M u_m - sum_j u_j),  u_j = (x_j - x_A)/||x_j - x_A||
// with x_A the mean of the given replicas. Workers with a gap below eps0
// contribute a zero unit term. Summed over m this is the zero vector, so the
// replica mean is invariant under the full push.
ParamVector push_gradient_full(const std::vector<ParamVector>& workers, std::size_t m,
                               double lambda_r, double eps0 = 1e-12);

// Same, against an explicitly supplied (frozen) x_A. The trainer uses this
// form so one communication round sees a single consistent snapshot.
ParamVector push_gradient_full_at(const std::vector<ParamVector>& workers,
                                  const ParamVector& x_A, std::size_t m, double lambda_r,
                                  double eps0 = 1e-12);

// The two pieces of the full push term under the lambda = lambda_r / M
// absorption: T1 = -(lambda/M) u_m and T2 = (lambda/M^2) sum_j u_j. T2 decays
// as the replicas spread symmetrically, which is why the simplified push
// keeps only T1. Exactly: M*(T1 + T2) = -push_gradient_full(lambda_r = lambda*M).
std::pair<ParamVector, ParamVector> decompose_push_terms(
    const std::vector<ParamVector>& workers, std::size_t m, double lambda,
    double eps0 = 1e-12);

// One-line pull+push against a frozen x_A:
//   x <- x + (x_A - x)(alpha - lambda/||x - x_A||)
// Along the gap direction the radius maps to |r(1-alpha) + lambda|, fixed
// point at r = lambda/alpha. Below eps0 only the pull applies.
ParamVector combined_update(const ParamVector& x_m, const ParamVector& x_A, double alpha,
                            double lambda, double eps0 = 1e-12);

// Push coefficient schedule over global iterations 0..T.
// Fixed: lambda_max. Decreasing: (lambda_max/2)(1 + cos(t pi / T)).
// Increasing: (lambda_max/2)(1 - cos(t pi / T)).
double lambda_at(long long t, long long T, double lambda_max, LambdaSchedule kind);

// max(tau_base, floor((beta/eta_t)^2)); clamped at the integer limit.
long long qsr_period(double eta_t, long long tau_base, double beta);

}  // namespace ppsim
