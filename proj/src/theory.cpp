#include "ppsim/theory.hpp"

#include <cmath>

#include "ppsim/errors.hpp"

namespace ppsim {

void GapRecurrenceConfig::validate() const {
  if (!(alpha > 0.0) || !(alpha < 1.0)) {
    throw InvalidArgument("alpha must lie in (0, 1)");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw InvalidArgument("lambda must be finite and >= 0");
  }
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw InvalidArgument("eta must be finite and >= 0");
  }
  if (!(sigma0 >= 0.0) || !std::isfinite(sigma0)) {
    throw InvalidArgument("sigma0 must be finite and >= 0");
  }
  if (tau < 1) {
    throw InvalidArgument("tau must be >= 1");
  }
  if (M < 1) {
    throw InvalidArgument("M must be >= 1");
  }
  if (rounds < 1) {
    throw InvalidArgument("rounds must be >= 1");
  }
}

std::vector<double> gap_recurrence(const GapRecurrenceConfig& cfg) {
  cfg.validate();
  const double C = 1.0 - cfg.alpha;
  double drift = cfg.lambda;
  if (cfg.mode == RecurrenceMode::Stochastic) {
    const double Md = static_cast<double>(cfg.M);
    drift = cfg.eta * C * std::sqrt(static_cast<double>(cfg.tau)) * cfg.sigma0 *
                std::sqrt((Md + 1.0) / Md) +
            cfg.lambda * (1.0 + 1.0 / std::sqrt(Md));
  }
  std::vector<double> r;
  r.reserve(static_cast<std::size_t>(cfg.rounds) + 1);
  r.push_back(0.0);
  for (long long k = 0; k < cfg.rounds; ++k) {
    r.push_back(C * r.back() + drift);
  }
  return r;
}

double valley_width_limit(double alpha, double lambda) {
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw InvalidArgument("alpha must lie in (0, 1]");
  }
  if (!(lambda >= 0.0)) {
    throw InvalidArgument("lambda must be >= 0");
  }
  return lambda / alpha;
}

void PacBayesParams::validate() const {
  if (d < 1) throw InvalidArgument("d must be >= 1");
  if (!(c >= 1.0) || !std::isfinite(c)) throw InvalidArgument("c must be >= 1");
  if (!(D0 > 0.0) || !std::isfinite(D0)) throw InvalidArgument("D0 must be > 0");
  if (!(beta >= 0.0) || beta >= 1.0) throw InvalidArgument("beta must lie in [0, 1)");
  if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) throw InvalidArgument("sigma0 must be > 0");
  if (n < 2) throw InvalidArgument("n must be >= 2");
  if (!(delta > 0.0) || !(delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  if (J < 1) throw InvalidArgument("J must be >= 1");
}

double pac_bayes_gap(double r, const PacBayesParams& p) {
  p.validate();
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw InvalidArgument("radius r must be finite and > 0");
  }
  const double kl_term = 0.5 * static_cast<double>(p.d) * (p.c - 1.0 - std::log(p.c));
  const double radius_term =
      p.D0 / (2.0 * p.sigma0 * p.sigma0 * std::pow(r, 1.0 - p.beta));
  const double union_term =
      std::log(static_cast<double>(p.n) * static_cast<double>(p.J) / p.delta);
  return std::sqrt((kl_term + radius_term + union_term) /
                   (2.0 * (static_cast<double>(p.n) - 1.0)));
}

std::vector<double> geometric_grid(double r_min, double r_max, double gamma) {
  if (!(r_min > 0.0) || !(r_max >= r_min)) {
    throw InvalidArgument("need 0 < r_min <= r_max");
  }
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw InvalidArgument("gamma must be finite and > 0");
  }
  if (r_min == r_max) {
    return {r_min};
  }
  const double steps = std::log(r_max / r_min) / std::log1p(gamma);
  const double snapped = std::round(steps);
  const long long J = std::abs(steps - snapped) < 1e-9
                          ? static_cast<long long>(snapped)
                          : static_cast<long long>(std::ceil(steps));
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(J) + 1);
  for (long long j = 0; j <= J; ++j) {
    grid.push_back(r_min * std::pow(1.0 + gamma, static_cast<double>(j)));
  }
  return grid;
}

CircleSpread circle_spread(const std::vector<double>& angles, double C) {
  if (angles.empty()) {
    throw InvalidArgument("need at least one angle");
  }
  if (!(C > 0.0) || !std::isfinite(C)) {
    throw InvalidArgument("radius C must be finite and > 0");
  }
  const std::size_t M = angles.size();
  std::vector<double> xs(M), ys(M);
  double xbar = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    xs[i] = C * std::cos(angles[i]);
    ys[i] = C * std::sin(angles[i]);
    xbar += xs[i];
    ybar += ys[i];
  }
  xbar /= static_cast<double>(M);
  ybar /= static_cast<double>(M);
  CircleSpread out;
  for (std::size_t i = 0; i < M; ++i) {
    const double dx = xs[i] - xbar;
    const double dy = ys[i] - ybar;
    out.direct += dx * dx + dy * dy;
  }
  out.identity =
      static_cast<double>(M) * C * C - static_cast<double>(M) * (xbar * xbar + ybar * ybar);
  return out;
}

NonconvexBound nonconvex_bound_rhs(double f0_minus_fstar, double eta, long long T,
                                   double L, double alpha, double lambda, double Delta,
                                   double sigma) {
  if (!(eta > 0.0)) throw InvalidArgument("eta must be > 0");
  if (T < 1) throw InvalidArgument("T must be >= 1");
  NonconvexBound out;
  out.value = 2.0 * f0_minus_fstar / (eta * static_cast<double>(T)) +
              3.0 * L * eta * (alpha * alpha * Delta * Delta + lambda * lambda + sigma * sigma) +
              alpha * Delta * Delta + lambda;
  out.side_condition_ok = (1.0 - alpha - lambda - 3.0 * L * eta) > 0.0;
  return out;
}

MeanUnitVectorReport mean_unit_vector_check(int M, std::size_t d, int trials,
                                            RngStream& rng) {
  if (M < 1) throw InvalidArgument("M must be >= 1");
  if (d < 1) throw InvalidArgument("d must be >= 1");
  if (trials < 2) throw InvalidArgument("need at least two trials");
  double sum = 0.0, sumsq = 0.0;
  ParamVector acc(d);
  for (int t = 0; t < trials; ++t) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int m = 0; m < M; ++m) {
      const ParamVector u = sample_unit_sphere(d, rng);
      for (std::size_t i = 0; i < d; ++i) acc[i] += u[i];
    }
    for (std::size_t i = 0; i < d; ++i) acc[i] /= static_cast<double>(M);
    const double nm = norm2(acc);
    sum += nm;
    sumsq += nm * nm;
  }
  MeanUnitVectorReport rep;
  const double n = static_cast<double>(trials);
  rep.mean_norm = sum / n;
  rep.bound = 1.0 / std::sqrt(static_cast<double>(M));
  const double var = std::max(0.0, (sumsq - n * rep.mean_norm * rep.mean_norm) / (n - 1.0));
  rep.std_error = std::sqrt(var / n);
  rep.pass = rep.mean_norm <= rep.bound + 3.0 * rep.std_error;
  return rep;
}

ValleyWidthReport empirical_valley_width_check(const RunResult& run, double alpha,
                                               double lambda, double eta, double sigma0,
                                               int M) {
  if (run.pull_push.push_mode == PushMode::Off) {
    throw InvalidArgument("valley width check requires a run with the push enabled");
  }
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw InvalidArgument("alpha must lie in (0, 1]");
  }
  if (M < 1) throw InvalidArgument("M must be >= 1");
  const double tau = run.metrics.empty()
                         ? static_cast<double>(run.pull_push.tau)
                         : static_cast<double>(run.metrics.back().tau_t);
  const double C = 1.0 - alpha;
  const double Md = static_cast<double>(M);
  ValleyWidthReport rep;
  rep.terminal = run.terminal_consensus_distance;
  rep.limit = lambda / alpha;
  rep.slack = eta * C * std::sqrt(tau) * sigma0 * std::sqrt((Md + 1.0) / Md) / alpha;
  rep.lower = rep.limit * (1.0 - 1.0 / std::sqrt(Md)) - rep.slack;
  rep.upper = rep.limit * (1.0 + 1.0 / std::sqrt(Md)) + rep.slack;
  rep.pass = rep.lower <= rep.terminal && rep.terminal <= rep.upper;
  return rep;
}

}  // namespace ppsim
