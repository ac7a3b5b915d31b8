#include "ppsim/measures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "ppsim/errors.hpp"

namespace ppsim {

ParamVector normalize_layers(const ParamVector& x, const LayerLayout& layout) {
  layout.validate(x.size());
  ParamVector out = x;
  for (const auto& seg : layout.segments) {
    double sq = 0.0;
    for (std::size_t i = seg.offset; i < seg.offset + seg.length; ++i) sq += x[i] * x[i];
    const double n = std::sqrt(sq);
    if (!(n > 0.0)) {
      throw InvalidArgument("segment '" + seg.name + "' has zero norm, cannot normalize");
    }
    const double inv = 1.0 / n;
    for (std::size_t i = seg.offset; i < seg.offset + seg.length; ++i) out[i] *= inv;
  }
  return out;
}

MeasureResult inverse_mean_valley(const std::vector<ParamVector>& workers,
                                  const Objective& obj, double kappa, double s,
                                  long long max_steps, const LayerLayout* layout) {
  if (workers.size() < 2) {
    throw InvalidArgument("valley measure needs at least two workers");
  }
  if (!(kappa > 1.0)) {
    throw InvalidArgument("kappa must be > 1");
  }
  if (!(s > 0.0)) {
    throw InvalidArgument("step size s must be > 0");
  }
  if (max_steps < 1) {
    throw InvalidArgument("max_steps must be >= 1");
  }
  std::vector<ParamVector> pts;
  pts.reserve(workers.size());
  for (const auto& w : workers) {
    if (w.size() != obj.dim()) {
      throw DimensionMismatch("worker dimension does not match the objective");
    }
    pts.push_back(layout ? normalize_layers(w, *layout) : w);
  }
  const ParamVector x_A = mean_vectors(pts);
  const double L_A = obj.value(x_A);
  if (!(L_A > 0.0)) {
    throw InvalidArgument("valley measure requires a positive value at the worker average");
  }
  const double threshold = kappa * L_A;
  const std::size_t d = x_A.size();
  std::vector<double> betas(pts.size());
  ParamVector probe(d);
  for (std::size_t m = 0; m < pts.size(); ++m) {
    const ParamVector delta = unit_direction(x_A, pts[m]);
    bool found = false;
    for (long long j = 1; j <= max_steps; ++j) {
      const double b = static_cast<double>(j) * s;
      for (std::size_t i = 0; i < d; ++i) probe[i] = x_A[i] + b * delta[i];
      if (obj.value(probe) >= threshold) {
        betas[m] = b;
        found = true;
        break;
      }
    }
    if (!found) {
      throw BoundaryNotFound("no boundary within max_steps along worker " +
                             std::to_string(m) + "'s direction");
    }
  }
  const double mean_beta =
      std::accumulate(betas.begin(), betas.end(), 0.0) / static_cast<double>(betas.size());
  MeasureResult res;
  res.name = "inverse_mean_valley";
  res.value = -mean_beta;
  res.params = {{"kappa", kappa},
                {"s", s},
                {"max_steps", static_cast<double>(max_steps)},
                {"normalized", layout ? 1.0 : 0.0}};
  res.betas = std::move(betas);
  return res;
}

double epsilon_sharpness(const ParamVector& x, const Objective& obj, double eps,
                         bool per_coordinate_box) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) {
    throw InvalidArgument("eps must be finite and >= 0");
  }
  const ParamVector g = obj.full_grad(x);
  ParamVector probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double sign = g[i] < 0.0 ? -1.0 : 1.0;  // sign(0) := +1
    const double box = per_coordinate_box ? (std::abs(x[i]) + 1.0) : 1.0;
    probe[i] += eps * box * sign;
  }
  return obj.value(probe) - obj.value(x);
}

double lpf_measure(const ParamVector& x, const Objective& obj, double sigma, int n_mc,
                   RngStream& rng) {
  if (n_mc < 1) {
    throw InvalidArgument("n_mc must be >= 1");
  }
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("sigma must be finite and >= 0");
  }
  if (sigma == 0.0) {
    return obj.value(x);
  }
  ParamVector probe(x.size());
  double acc = 0.0;
  for (int k = 0; k < n_mc; ++k) {
    for (std::size_t i = 0; i < x.size(); ++i) probe[i] = x[i] + sigma * rng.normal();
    acc += obj.value(probe);
  }
  return acc / static_cast<double>(n_mc);
}

double fisher_rao(const ParamVector& x, const Objective& obj) {
  if (!all_finite(x)) {
    throw InvalidArgument("point must be finite");
  }
  return dot(x, obj.hvp(x, x));
}

double hessian_trace(const ParamVector& x, const Objective& obj, int n_probes,
                     RngStream& rng, TraceProbe probe) {
  if (n_probes < 1) {
    throw InvalidArgument("n_probes must be >= 1");
  }
  const std::size_t d = obj.dim();
  if (probe == TraceProbe::Basis) {
    if (static_cast<std::size_t>(n_probes) > d) {
      throw InvalidArgument("basis probes cannot exceed the dimension");
    }
    double acc = 0.0;
    ParamVector e(d, 0.0);
    for (int k = 0; k < n_probes; ++k) {
      e[static_cast<std::size_t>(k)] = 1.0;
      acc += obj.hvp(x, e)[static_cast<std::size_t>(k)];
      e[static_cast<std::size_t>(k)] = 0.0;
    }
    return acc;
  }
  double acc = 0.0;
  ParamVector v(d);
  for (int k = 0; k < n_probes; ++k) {
    for (std::size_t i = 0; i < d; ++i) v[i] = (rng.next_u64() & 1u) ? 1.0 : -1.0;
    acc += dot(v, obj.hvp(x, v));
  }
  return acc / static_cast<double>(n_probes);
}

LambdaMaxResult hessian_lambda_max(const ParamVector& x, const Objective& obj, int iters,
                                   double tol, RngStream& rng) {
  if (iters < 1) {
    throw InvalidArgument("iters must be >= 1");
  }
  if (!(tol > 0.0)) {
    throw InvalidArgument("tol must be > 0");
  }
  const std::size_t d = obj.dim();
  ParamVector v = sample_unit_sphere(d, rng);
  LambdaMaxResult res;
  double prev = 0.0;
  bool have_prev = false;
  for (int k = 1; k <= iters; ++k) {
    const ParamVector w = obj.hvp(x, v);
    const double rq = dot(v, w);
    const double wn = norm2(w);
    res.value = rq;
    res.iters = k;
    if (wn < 1e-300) {
      // The operator annihilates the iterate; the estimate is settled.
      res.converged = true;
      return res;
    }
    if (have_prev && std::abs(rq - prev) < tol) {
      res.converged = true;
      return res;
    }
    prev = rq;
    have_prev = true;
    const double inv = 1.0 / wn;
    for (std::size_t i = 0; i < d; ++i) v[i] = w[i] * inv;
  }
  return res;  // best estimate, converged = false
}

namespace {

// Counts strict inversions (pairs i < j with v[i] > v[j]) by merge sort.
std::int64_t count_inversions(std::vector<double>& v, std::vector<double>& tmp,
                              std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t inv = count_inversions(v, tmp, lo, mid) + count_inversions(v, tmp, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += static_cast<std::int64_t>(mid - i);
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo),
            tmp.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

std::int64_t tie_pairs(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::int64_t acc = 0;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    const std::int64_t t = static_cast<std::int64_t>(j - i);
    acc += t * (t - 1) / 2;
    i = j;
  }
  return acc;
}

}  // namespace

double kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("rank lists must have equal length");
  }
  const std::size_t n = a.size();
  if (n < 2) {
    throw InvalidArgument("rank correlation needs at least two entries");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (a[i] != a[j]) return a[i] < a[j];
    return b[i] < b[j];
  });

  // Joint-tie and a-tie bookkeeping over the (a, b)-sorted sequence.
  std::int64_t ties_a = 0, ties_ab = 0;
  {
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j < n && a[order[j]] == a[order[i]]) ++j;
      const std::int64_t t = static_cast<std::int64_t>(j - i);
      ties_a += t * (t - 1) / 2;
      std::size_t u = i;
      while (u < j) {
        std::size_t v = u;
        while (v < j && b[order[v]] == b[order[u]]) ++v;
        const std::int64_t tb = static_cast<std::int64_t>(v - u);
        ties_ab += tb * (tb - 1) / 2;
        u = v;
      }
      i = j;
    }
  }
  const std::int64_t ties_b = tie_pairs(b);

  std::vector<double> seq(n), tmp(n);
  for (std::size_t i = 0; i < n; ++i) seq[i] = b[order[i]];
  const std::int64_t inversions = count_inversions(seq, tmp, 0, n);

  const std::int64_t n0 = static_cast<std::int64_t>(n) * (static_cast<std::int64_t>(n) - 1) / 2;
  const std::int64_t numerator = n0 - ties_a - ties_b + ties_ab - 2 * inversions;
  return static_cast<double>(numerator) / static_cast<double>(n0);
}

}  // namespace ppsim
