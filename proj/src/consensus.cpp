#include "ppsim/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "ppsim/errors.hpp"

namespace ppsim {

void PullPushConfig::validate() const {
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw InvalidArgument("pull strength alpha must lie in (0, 1]");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw InvalidArgument("push coefficient lambda must be finite and >= 0");
  }
  if (!qsr && tau < 1) {
    throw InvalidArgument("communication period tau must be >= 1");
  }
  if (qsr) {
    if (qsr->tau_base < 1) {
      throw InvalidArgument("qsr tau_base must be >= 1");
    }
    if (!(qsr->beta >= 0.0) || !std::isfinite(qsr->beta)) {
      throw InvalidArgument("qsr beta must be finite and >= 0");
    }
  }
}

namespace {

void check_group(const std::vector<ParamVector>& params) {
  if (params.empty()) {
    throw InvalidArgument("consensus requires at least one worker");
  }
  const std::size_t d = params.front().size();
  for (const auto& p : params) {
    if (p.size() != d) {
      throw DimensionMismatch("worker parameter vectors differ in dimension");
    }
  }
}

}  // namespace

ParamVector compute_consensus(ConsensusKind kind, const std::vector<ParamVector>& params,
                              const std::vector<double>& losses,
                              const std::vector<double>& grad_norms, ConsensusState& state,
                              double alpha) {
  check_group(params);
  const std::size_t M = params.size();
  switch (kind) {
    case ConsensusKind::SimpleAvg:
      return mean_vectors(params);
    case ConsensusKind::Lsgd: {
      if (losses.size() != M) {
        throw DimensionMismatch("loss vector must have one entry per worker");
      }
      std::size_t best = 0;
      for (std::size_t m = 1; m < M; ++m) {
        if (losses[m] < losses[best]) best = m;  // ties keep the lowest index
      }
      return params[best];
    }
    case ConsensusKind::Mgrawa: {
      if (grad_norms.size() != M) {
        throw DimensionMismatch("gradient norm vector must have one entry per worker");
      }
      std::vector<double> w(M);
      double wsum = 0.0;
      for (std::size_t m = 0; m < M; ++m) {
        if (!(grad_norms[m] >= 0.0)) {
          throw InvalidArgument("gradient norms must be non-negative");
        }
        w[m] = 1.0 / (grad_norms[m] + 1e-8);
        wsum += w[m];
      }
      ParamVector out(params.front().size(), 0.0);
      for (std::size_t m = 0; m < M; ++m) {
        const double wm = w[m] / wsum;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += wm * params[m][i];
      }
      return out;
    }
    case ConsensusKind::Easgd: {
      if (!state.easgd_center) {
        state.easgd_center = mean_vectors(params);
      }
      ParamVector& z = *state.easgd_center;
      if (z.size() != params.front().size()) {
        throw DimensionMismatch("elastic center dimension does not match workers");
      }
      const ParamVector xbar = mean_vectors(params);
      for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] += alpha * (xbar[i] - z[i]);
      }
      return z;
    }
  }
  throw InvalidArgument("unknown consensus kind");
}

ParamVector pull_update(const ParamVector& x_m, const ParamVector& x_C, double alpha) {
  if (x_m.size() != x_C.size()) {
    throw DimensionMismatch("pull target dimension does not match worker");
  }
  ParamVector out(x_m.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (1.0 - alpha) * x_m[i] + alpha * x_C[i];
  }
  return out;
}

ParamVector push_update_simplified(const ParamVector& x_m, const ParamVector& x_A,
                                   double lambda, double eps0) {
  if (x_m.size() != x_A.size()) {
    throw DimensionMismatch("push anchor dimension does not match worker");
  }
  if (!(eps0 > 0.0)) {
    throw InvalidArgument("eps0 must be positive");
  }
  const double gap = distance(x_m, x_A);
  if (gap < eps0) {
    return x_m;  // direction undefined at the anchor; skip
  }
  ParamVector out(x_m.size());
  const double scale = lambda / gap;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = x_m[i] + scale * (x_m[i] - x_A[i]);
  }
  return out;
}

ParamVector push_gradient_full_at(const std::vector<ParamVector>& workers,
                                  const ParamVector& x_A, std::size_t m, double lambda_r,
                                  double eps0) {
  check_group(workers);
  if (m >= workers.size()) {
    throw InvalidArgument("worker index out of range");
  }
  if (x_A.size() != workers.front().size()) {
    throw DimensionMismatch("anchor dimension does not match workers");
  }
  if (!(eps0 > 0.0)) {
    throw InvalidArgument("eps0 must be positive");
  }
  const std::size_t M = workers.size();
  const std::size_t d = x_A.size();
  ParamVector usum(d, 0.0);
  ParamVector um(d, 0.0);
  for (std::size_t j = 0; j < M; ++j) {
    const double gap = distance(workers[j], x_A);
    if (gap < eps0) continue;  // zero unit contribution
    const double inv = 1.0 / gap;
    for (std::size_t i = 0; i < d; ++i) {
      const double u = (workers[j][i] - x_A[i]) * inv;
      usum[i] += u;
      if (j == m) um[i] = u;
    }
  }
  const double Md = static_cast<double>(M);
  ParamVector out(d);
  const double scale = lambda_r / (Md * Md);
  for (std::size_t i = 0; i < d; ++i) {
    out[i] = scale * (Md * um[i] - usum[i]);
  }
  return out;
}

ParamVector push_gradient_full(const std::vector<ParamVector>& workers, std::size_t m,
                               double lambda_r, double eps0) {
  check_group(workers);
  return push_gradient_full_at(workers, mean_vectors(workers), m, lambda_r, eps0);
}

std::pair<ParamVector, ParamVector> decompose_push_terms(
    const std::vector<ParamVector>& workers, std::size_t m, double lambda, double eps0) {
  check_group(workers);
  if (m >= workers.size()) {
    throw InvalidArgument("worker index out of range");
  }
  if (!(eps0 > 0.0)) {
    throw InvalidArgument("eps0 must be positive");
  }
  const std::size_t M = workers.size();
  const std::size_t d = workers.front().size();
  const ParamVector x_A = mean_vectors(workers);
  ParamVector usum(d, 0.0);
  ParamVector um(d, 0.0);
  for (std::size_t j = 0; j < M; ++j) {
    const double gap = distance(workers[j], x_A);
    if (gap < eps0) continue;
    const double inv = 1.0 / gap;
    for (std::size_t i = 0; i < d; ++i) {
      const double u = (workers[j][i] - x_A[i]) * inv;
      usum[i] += u;
      if (j == m) um[i] = u;
    }
  }
  const double Md = static_cast<double>(M);
  ParamVector t1(d), t2(d);
  for (std::size_t i = 0; i < d; ++i) {
    t1[i] = -(lambda / Md) * um[i];
    t2[i] = (lambda / (Md * Md)) * usum[i];
  }
  return {std::move(t1), std::move(t2)};
}

ParamVector combined_update(const ParamVector& x_m, const ParamVector& x_A, double alpha,
                            double lambda, double eps0) {
  if (!(alpha > 0.0) || !(alpha < 1.0)) {
    throw InvalidArgument("combined update requires alpha in (0, 1)");
  }
  if (!(lambda >= 0.0)) {
    throw InvalidArgument("lambda must be >= 0");
  }
  if (x_m.size() != x_A.size()) {
    throw DimensionMismatch("anchor dimension does not match worker");
  }
  if (!(eps0 > 0.0)) {
    throw InvalidArgument("eps0 must be positive");
  }
  const double gap = distance(x_m, x_A);
  ParamVector out(x_m.size());
  if (gap < eps0) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = x_m[i] + alpha * (x_A[i] - x_m[i]);
    }
    return out;
  }
  const double coeff = alpha - lambda / gap;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = x_m[i] + coeff * (x_A[i] - x_m[i]);
  }
  return out;
}

double lambda_at(long long t, long long T, double lambda_max, LambdaSchedule kind) {
  if (T < 1) {
    throw InvalidArgument("schedule horizon T must be >= 1");
  }
  if (t < 0 || t > T) {
    throw InvalidArgument("schedule time t must lie in [0, T]");
  }
  if (!(lambda_max >= 0.0) || !std::isfinite(lambda_max)) {
    throw InvalidArgument("lambda_max must be finite and >= 0");
  }
  const double phase = static_cast<double>(t) * 3.14159265358979323846 / static_cast<double>(T);
  switch (kind) {
    case LambdaSchedule::Fixed:
      return lambda_max;
    case LambdaSchedule::CosineDecreasing:
      return 0.5 * lambda_max * (1.0 + std::cos(phase));
    case LambdaSchedule::CosineIncreasing:
      return 0.5 * lambda_max * (1.0 - std::cos(phase));
  }
  throw InvalidArgument("unknown lambda schedule");
}

long long qsr_period(double eta_t, long long tau_base, double beta) {
  if (!(eta_t > 0.0)) {
    throw InvalidArgument("qsr requires a positive learning rate");
  }
  if (tau_base < 1) {
    throw InvalidArgument("tau_base must be >= 1");
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw InvalidArgument("beta must be finite and >= 0");
  }
  const double ratio = beta / eta_t;
  const double sq = ratio * ratio;
  long long dyn;
  if (!(sq < static_cast<double>(std::numeric_limits<long long>::max()))) {
    dyn = std::numeric_limits<long long>::max();
  } else {
    dyn = static_cast<long long>(std::floor(sq));
  }
  return std::max(tau_base, dyn);
}

}  // namespace ppsim
