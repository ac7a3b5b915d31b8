#include "ppsim/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <iostream>
#include <thread>
#include <utility>

#include "ppsim/errors.hpp"
#include "ppsim/fmt.hpp"

namespace ppsim {

void LocalOptConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw InvalidArgument("learning rate eta must be finite and > 0");
  }
  if (!(momentum >= 0.0) || momentum >= 1.0) {
    throw InvalidArgument("momentum must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw InvalidArgument("weight_decay must be finite and >= 0");
  }
  if (sam_rho && (!(*sam_rho >= 0.0) || !std::isfinite(*sam_rho))) {
    throw InvalidArgument("sam_rho must be finite and >= 0");
  }
}

double eta_at(long long t, long long T, const LocalOptConfig& cfg) {
  if (T < 1) throw InvalidArgument("schedule horizon T must be >= 1");
  if (t < 0 || t > T) throw InvalidArgument("schedule time t must lie in [0, T]");
  switch (cfg.lr_schedule) {
    case LrSchedule::Constant:
      return cfg.eta;
    case LrSchedule::Cosine: {
      const double phase =
          static_cast<double>(t) * 3.14159265358979323846 / static_cast<double>(T);
      return 0.5 * cfg.eta * (1.0 + std::cos(phase));
    }
  }
  throw InvalidArgument("unknown learning rate schedule");
}

namespace {

void apply_sgd_update(WorkerState& w, const LocalOptConfig& cfg, const ParamVector& g,
                      double eta_t) {
  const std::size_t d = w.params.size();
  if (w.momentum_buf.size() != d) w.momentum_buf.assign(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    const double step_g = g[i] + cfg.weight_decay * w.params[i];
    w.momentum_buf[i] = cfg.momentum * w.momentum_buf[i] + step_g;
    w.params[i] -= eta_t * w.momentum_buf[i];
  }
  if (!all_finite(w.params)) {
    throw NumericalOverflow("worker parameters left the finite range");
  }
}

void finish_step(WorkerState& w, double loss, double grad_norm) {
  if (!std::isfinite(loss)) {
    throw NumericalOverflow("local loss left the finite range");
  }
  w.last_loss = loss;
  w.last_grad_norm = grad_norm;
  w.local_step += 1;
}

}  // namespace

void local_step_sgd(WorkerState& w, const Objective& obj, const LocalOptConfig& cfg,
                    const NoiseModel& noise, double eta_t, int shard) {
  const StochEval ev = obj.stoch_eval(w.params, shard, w.rng, noise);
  apply_sgd_update(w, cfg, ev.grad, eta_t);
  finish_step(w, ev.loss, norm2(ev.grad));
}

void local_step_sam(WorkerState& w, const Objective& obj, const LocalOptConfig& cfg,
                    const NoiseModel& noise, double eta_t, int shard) {
  if (!cfg.sam_rho) {
    throw InvalidArgument("two-step local optimizer requires sam_rho");
  }
  const double rho = *cfg.sam_rho;
  const StochEval first = obj.stoch_eval(w.params, shard, w.rng, noise);
  const double g1_norm = norm2(first.grad);
  if (rho == 0.0 || g1_norm == 0.0) {
    // Degenerate radius: identical to the plain step, including stream use.
    apply_sgd_update(w, cfg, first.grad, eta_t);
    finish_step(w, first.loss, g1_norm);
    return;
  }
  ParamVector probe = w.params;
  const double scale = rho / g1_norm;
  for (std::size_t i = 0; i < probe.size(); ++i) probe[i] += scale * first.grad[i];
  const StochEval second = obj.stoch_eval(probe, shard, w.rng, noise);
  apply_sgd_update(w, cfg, second.grad, eta_t);
  finish_step(w, first.loss, norm2(second.grad));
}

namespace {

double group_consensus_distance(const std::vector<ParamVector>& params,
                                const ParamVector& center) {
  double acc = 0.0;
  for (const auto& p : params) acc += distance(p, center);
  return acc / static_cast<double>(params.size());
}

}  // namespace

RunResult run(const Objective& obj, int M, const PullPushConfig& pp,
              const LocalOptConfig& opt, const NoiseModel& noise, long long total_iters,
              std::uint64_t seed, int threads, const TrainerFlags& flags) {
  if (M < 1) throw InvalidArgument("need at least one worker");
  if (total_iters < 1) throw InvalidArgument("total_iters must be >= 1");
  if (threads < 1) throw InvalidArgument("threads must be >= 1");
  pp.validate();
  opt.validate();
  if (!(noise.sigma0 >= 0.0) || !std::isfinite(noise.sigma0)) {
    throw InvalidArgument("sigma0 must be finite and >= 0");
  }
  const std::size_t d = obj.dim();
  if (flags.init_center && flags.init_center->size() != d) {
    throw DimensionMismatch("init_center dimension does not match the objective");
  }
  if (!std::isfinite(flags.init_scale)) {
    throw InvalidArgument("init_scale must be finite");
  }
  if (pp.push_mode != PushMode::Off && pp.consensus_kind == ConsensusKind::Lsgd) {
    std::cerr << "warning: leader-pull consensus with the push enabled is known to be "
                 "unstable (the pull is not directed at the repulsion anchor)\n";
  }

  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed = [&t_start]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
        .count();
  };

  // Initialization: a single shared draw by default, sequential per-worker
  // draws from the same stream when independent_init is set.
  RngStream init_rng(seed, kInitStream);
  auto make_init = [&](const ParamVector& raw) {
    ParamVector x(d);
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = flags.init_scale * raw[i];
      if (flags.init_center) x[i] += (*flags.init_center)[i];
    }
    return x;
  };
  std::vector<WorkerState> workers;
  workers.reserve(static_cast<std::size_t>(M));
  if (flags.independent_init) {
    for (int m = 0; m < M; ++m) {
      workers.push_back(WorkerState{m, make_init(obj.init_point(init_rng)),
                                    ParamVector(d, 0.0), 0,
                                    RngStream(seed, static_cast<std::uint32_t>(m)), 0.0,
                                    0.0});
    }
  } else {
    const ParamVector x0 = make_init(obj.init_point(init_rng));
    for (int m = 0; m < M; ++m) {
      workers.push_back(WorkerState{m, x0, ParamVector(d, 0.0), 0,
                                    RngStream(seed, static_cast<std::uint32_t>(m)), 0.0,
                                    0.0});
    }
  }

  ConsensusState state;
  if (pp.consensus_kind == ConsensusKind::Easgd) {
    std::vector<ParamVector> initial;
    initial.reserve(workers.size());
    for (const auto& w : workers) initial.push_back(w.params);
    state.easgd_center = mean_vectors(initial);
  }

  RunResult result;
  result.workers = M;
  result.total_iters = total_iters;
  result.seed = seed;
  result.threads = threads;
  result.pull_push = pp;
  result.local_opt = opt;
  result.noise = noise;
  result.flags = flags;

  const int nthreads = std::min<int>(threads, M);
  const int shards = obj.num_shards();
  long long t = 0;
  long long round = 0;

  while (t < total_iters && !result.aborted) {
    long long tau_cur;
    if (pp.qsr) {
      tau_cur = qsr_period(eta_at(t, total_iters, opt), pp.qsr->tau_base, pp.qsr->beta);
    } else {
      tau_cur = pp.tau;
    }
    tau_cur = std::min(tau_cur, total_iters - t);

    // Local segment: workers advance tau_cur lockstep steps, independently.
    std::vector<std::exception_ptr> worker_error(workers.size());
    auto segment = [&](std::size_t m) {
      try {
        WorkerState& w = workers[m];
        const int shard = static_cast<int>(m % static_cast<std::size_t>(shards));
        for (long long k = 0; k < tau_cur; ++k) {
          const double eta_t = eta_at(t + k, total_iters, opt);
          if (opt.sam_rho) {
            local_step_sam(w, obj, opt, noise, eta_t, shard);
          } else {
            local_step_sgd(w, obj, opt, noise, eta_t, shard);
          }
        }
      } catch (...) {
        worker_error[m] = std::current_exception();
      }
    };
    if (nthreads <= 1) {
      for (std::size_t m = 0; m < workers.size(); ++m) segment(m);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(nthreads));
      for (int tid = 0; tid < nthreads; ++tid) {
        pool.emplace_back([&, tid]() {
          for (std::size_t m = static_cast<std::size_t>(tid); m < workers.size();
               m += static_cast<std::size_t>(nthreads)) {
            segment(m);
          }
        });
      }
      for (auto& th : pool) th.join();
    }
    for (std::size_t m = 0; m < worker_error.size(); ++m) {
      if (!worker_error[m]) continue;
      try {
        std::rethrow_exception(worker_error[m]);
      } catch (const NumericalOverflow& e) {
        result.aborted = true;
        result.abort_reason = e.what();
        break;
      }
      // Anything else is a caller error; let it propagate.
    }
    if (result.aborted) break;
    t += tau_cur;
    round += 1;

    // Communication round. The coordinator alone touches worker state here.
    std::vector<ParamVector> snapshot;
    snapshot.reserve(workers.size());
    std::vector<double> losses(workers.size()), grad_norms(workers.size());
    for (std::size_t m = 0; m < workers.size(); ++m) {
      snapshot.push_back(workers[m].params);
      losses[m] = workers[m].last_loss;
      grad_norms[m] = workers[m].last_grad_norm;
    }
    const ParamVector x_A = mean_vectors(snapshot);
    const ParamVector x_C =
        compute_consensus(pp.consensus_kind, snapshot, losses, grad_norms, state, pp.alpha);
    const double lambda_t = pp.push_mode == PushMode::Off
                                ? 0.0
                                : lambda_at(t, total_iters, pp.lambda, pp.lambda_schedule);

    RoundRecord rec;
    rec.round = round;
    rec.iter = t;
    rec.losses = losses;
    double loss_acc = 0.0;
    for (double v : losses) loss_acc += v;
    rec.mean_loss = loss_acc / static_cast<double>(losses.size());
    rec.pull_mags.resize(workers.size());
    rec.push_mags.assign(workers.size(), 0.0);
    rec.lambda_t = lambda_t;
    rec.tau_t = tau_cur;

    for (std::size_t m = 0; m < workers.size(); ++m) {
      rec.pull_mags[m] = pp.alpha * distance(workers[m].params, x_A);
      workers[m].params = pull_update(workers[m].params, x_C, pp.alpha);
    }
    if (pp.push_mode == PushMode::Simplified) {
      for (std::size_t m = 0; m < workers.size(); ++m) {
        const double gap = distance(workers[m].params, x_A);
        if (gap >= 1e-12) {
          workers[m].params = push_update_simplified(workers[m].params, x_A, lambda_t);
          rec.push_mags[m] = lambda_t;
        }
      }
    } else if (pp.push_mode == PushMode::FullGradient) {
      // Two passes so every worker's term is computed from the same
      // post-pull ensemble; their sum is the zero vector, so the mean is
      // untouched.
      std::vector<ParamVector> post_pull;
      post_pull.reserve(workers.size());
      for (const auto& w : workers) post_pull.push_back(w.params);
      const double lambda_r = lambda_t * static_cast<double>(M);
      for (std::size_t m = 0; m < workers.size(); ++m) {
        const ParamVector disp = push_gradient_full_at(post_pull, x_A, m, lambda_r);
        for (std::size_t i = 0; i < d; ++i) workers[m].params[i] += disp[i];
        rec.push_mags[m] = norm2(disp);
      }
    }
    if (flags.average_momentum) {
      std::vector<ParamVector> bufs;
      bufs.reserve(workers.size());
      for (const auto& w : workers) bufs.push_back(w.momentum_buf);
      const ParamVector mixed = mean_vectors(bufs);
      for (auto& w : workers) w.momentum_buf = mixed;
    }

    std::vector<ParamVector> post;
    post.reserve(workers.size());
    for (const auto& w : workers) post.push_back(w.params);
    rec.consensus_distance = group_consensus_distance(post, mean_vectors(post));
    rec.wall_time_s = elapsed();
    result.metrics.push_back(std::move(rec));
  }

  result.rounds = round;
  result.completed_iters = t;
  result.communication_volume =
      t > 0 ? static_cast<double>(round) / static_cast<double>(t) : 0.0;
  result.final_params.reserve(workers.size());
  for (auto& w : workers) result.final_params.push_back(w.params);
  result.final_mean = mean_vectors(result.final_params);
  result.terminal_losses.resize(workers.size());
  for (std::size_t m = 0; m < workers.size(); ++m) {
    result.terminal_losses[m] = workers[m].last_loss;
  }
  result.terminal_consensus_distance =
      group_consensus_distance(result.final_params, result.final_mean);
  if (!result.aborted) {
    if (const auto* mlp = dynamic_cast<const MlpObjective*>(&obj)) {
      result.terminal_train_error =
          mlp->classification_error(result.final_mean, MlpObjective::Split::Train);
      result.terminal_test_error =
          mlp->classification_error(result.final_mean, MlpObjective::Split::Test);
    }
  }
  result.wall_time_s = elapsed();
  return result;
}

std::vector<InterplayRow> force_interplay_log(const RunResult& result, int worker) {
  if (result.pull_push.push_mode == PushMode::Off) {
    throw InvalidArgument("force interplay requires a run with the push enabled");
  }
  if (worker < 0 || worker >= result.workers) {
    throw InvalidArgument("worker index out of range");
  }
  std::vector<InterplayRow> rows;
  rows.reserve(result.metrics.size());
  for (const auto& rec : result.metrics) {
    InterplayRow row;
    row.round = rec.round;
    row.iter = rec.iter;
    row.pull_mag = rec.pull_mags[static_cast<std::size_t>(worker)];
    row.push_mag = rec.push_mags[static_cast<std::size_t>(worker)];
    row.pull_dominates = row.pull_mag > row.push_mag;
    rows.push_back(row);
  }
  return rows;
}

void write_metrics_csv(std::ostream& os, const RunResult& result) {
  os << "round,iter,worker_id,loss,consensus_distance,pull_mag,push_mag,lambda_t,tau_t\n";
  for (const auto& rec : result.metrics) {
    for (std::size_t m = 0; m < rec.losses.size(); ++m) {
      os << rec.round << ',' << rec.iter << ',' << m << ',' << fmt_double(rec.losses[m])
         << ',' << fmt_double(rec.consensus_distance) << ','
         << fmt_double(rec.pull_mags[m]) << ',' << fmt_double(rec.push_mags[m]) << ','
         << fmt_double(rec.lambda_t) << ',' << rec.tau_t << '\n';
    }
  }
}

}  // namespace ppsim
