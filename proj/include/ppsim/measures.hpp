#pragma once

#include <map>
#include <string>
#include <vector>

#include "ppsim/objectives.hpp"
#include "ppsim/param_space.hpp"

namespace ppsim {

struct MeasureResult {
  std::string name;
  double value = 0.0;
  std::map<std::string, double> params;  // knobs the measure was computed with
  std::vector<double> betas;  // per-worker boundary distances, valley measures only
};

// Scales each layout segment to unit Frobenius norm. Zero-norm segments are
// an error. Idempotent on already-normalized input.
ParamVector normalize_layers(const ParamVector& x, const LayerLayout& layout);

// Valley size around the worker average, reported negated so that larger
// (better) valleys give smaller values, like the other sharpness measures.
// For each worker, walks from x_A along the unit direction toward x_m in
// steps of s until the value reaches kappa * f(x_A); beta_m is that walk
// distance and the result value is -mean(beta_m). When a layout is given,
// workers are normalized per segment first and x_A is the mean of the
// normalized points. Requires f(x_A) > 0 and at least two distinct workers.
MeasureResult inverse_mean_valley(const std::vector<ParamVector>& workers,
                                  const Objective& obj, double kappa = 2.0, double s = 0.1,
                                  long long max_steps = 1000000,
                                  const LayerLayout* layout = nullptr);

// f(x + eps * sign(g)) - f(x) with g the full gradient and sign(0) := +1.
// The box variant scales the perturbation per coordinate by (|x_i| + 1).
double epsilon_sharpness(const ParamVector& x, const Objective& obj, double eps,
                         bool per_coordinate_box = false);

// Monte Carlo estimate of the Gaussian-smoothed value: mean of f(x + sigma z)
// over n_mc standard normal draws. sigma = 0 returns f(x) without consuming
// the stream.
double lpf_measure(const ParamVector& x, const Objective& obj, double sigma, int n_mc,
                   RngStream& rng);

// <x, H(x) x> via one Hessian-vector product.
double fisher_rao(const ParamVector& x, const Objective& obj);

enum class TraceProbe {
  Rademacher,  // mean of <v, Hv> over random sign vectors (unbiased estimate)
  Basis,       // sum of the first n_probes diagonal entries (exact at n_probes = d)
};

double hessian_trace(const ParamVector& x, const Objective& obj, int n_probes,
                     RngStream& rng, TraceProbe probe = TraceProbe::Rademacher);

struct LambdaMaxResult {
  double value = 0.0;  // dominant-magnitude eigenvalue estimate (signed)
  bool converged = false;
  int iters = 0;
};

// Power iteration on the Hessian-vector product, Rayleigh-quotient stopping
// rule. Returns the best estimate with a convergence flag; never throws on
// non-convergence.
LambdaMaxResult hessian_lambda_max(const ParamVector& x, const Objective& obj, int iters,
                                   double tol, RngStream& rng);

// Kendall rank correlation, tau-a: (concordant - discordant) / C(n,2), ties
// contributing zero. O(n log n) via merge-sort inversion counting.
double kendall_tau(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace ppsim
