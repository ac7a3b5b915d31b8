#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ppsim/consensus.hpp"
#include "ppsim/objectives.hpp"
#include "ppsim/param_space.hpp"

namespace ppsim {

enum class LrSchedule { Constant, Cosine };

struct LocalOptConfig {
  double eta = 0.1;
  LrSchedule lr_schedule = LrSchedule::Constant;
  double momentum = 0.0;      // in [0, 1)
  double weight_decay = 0.0;  // >= 0
  std::optional<double> sam_rho;  // set => two-step ascent-descent local steps

  void validate() const;
};

// Learning rate at global iteration t of a T-iteration run.
// Constant: eta. Cosine: eta * (1 + cos(t pi / T)) / 2.
double eta_at(long long t, long long T, const LocalOptConfig& cfg);

struct WorkerState {
  int id = 0;
  ParamVector params;
  ParamVector momentum_buf;
  long long local_step = 0;
  RngStream rng;
  double last_loss = 0.0;       // latest local minibatch loss
  double last_grad_norm = 0.0;  // norm of the latest applied stochastic gradient
};

// One local step, mutating the worker in place. eta_t is the already-resolved
// learning rate for this step (schedules are the caller's job); shard selects
// the worker's data shard on sharded surfaces.
//   buf <- momentum * buf + g + weight_decay * x;  x <- x - eta_t * buf
// Throws NumericalOverflow if the loss or parameters leave the finite range.
void local_step_sgd(WorkerState& w, const Objective& obj, const LocalOptConfig& cfg,
                    const NoiseModel& noise, double eta_t, int shard = 0);

// Two-step variant: g1 at x, ascend to x + rho * g1/||g1||, re-evaluate g2
// there, then apply the SGD update at x using g2. rho = 0 or a zero g1 norm
// short-circuits to the plain step above (identical stream consumption).
// last_loss records the loss observed at x.
void local_step_sam(WorkerState& w, const Objective& obj, const LocalOptConfig& cfg,
                    const NoiseModel& noise, double eta_t, int shard = 0);

struct TrainerFlags {
  bool independent_init = false;  // per-worker draws instead of one shared point
  bool average_momentum = false;  // mix momentum buffers at each round
  double init_scale = 1.0;
  std::optional<ParamVector> init_center;  // added after scaling
};

// One record per communication round.
struct RoundRecord {
  long long round = 0;  // 1-based round index
  long long iter = 0;   // global iterations completed when the round fired
  std::vector<double> losses;  // per-worker latest local minibatch loss
  double mean_loss = 0.0;
  double consensus_distance = 0.0;  // (1/M) sum ||x_m - x_A||, post-round
  std::vector<double> pull_mags;    // alpha * ||x_m - x_A|| at round entry
  std::vector<double> push_mags;    // applied push displacement magnitude
  double lambda_t = 0.0;
  long long tau_t = 1;
  double wall_time_s = 0.0;  // elapsed since run start
};

struct RunResult {
  ParamVector final_mean;  // average of final worker params (fixed order)
  std::vector<ParamVector> final_params;
  std::vector<RoundRecord> metrics;
  std::vector<double> terminal_losses;
  double terminal_consensus_distance = 0.0;
  std::optional<double> terminal_train_error;  // percent, classifier surfaces only
  std::optional<double> terminal_test_error;
  long long rounds = 0;
  long long completed_iters = 0;
  double communication_volume = 0.0;  // rounds / completed local iterations
  double wall_time_s = 0.0;
  bool aborted = false;  // numerical overflow stopped the run early
  std::string abort_reason;

  // Config echo
  int workers = 0;
  long long total_iters = 0;
  std::uint64_t seed = 0;
  int threads = 1;
  PullPushConfig pull_push;
  LocalOptConfig local_opt;
  NoiseModel noise;
  TrainerFlags flags;
};

// Runs M workers for total_iters lockstep local iterations with barrier
// communication rounds every tau_t steps. Output is bit-identical for the
// same (seed, config) regardless of threads. A numerical overflow in any
// worker aborts the run and returns partial metrics with aborted set.
RunResult run(const Objective& obj, int M, const PullPushConfig& pp,
              const LocalOptConfig& opt, const NoiseModel& noise, long long total_iters,
              std::uint64_t seed, int threads = 1, const TrainerFlags& flags = {});

struct InterplayRow {
  long long round = 0;
  long long iter = 0;
  double pull_mag = 0.0;
  double push_mag = 0.0;
  bool pull_dominates = false;  // pull_mag > push_mag
};

// Per-round pull vs push magnitudes for one worker. Requires a run with the
// push enabled.
std::vector<InterplayRow> force_interplay_log(const RunResult& result, int worker = 0);

// One row per (round, worker):
// round,iter,worker_id,loss,consensus_distance,pull_mag,push_mag,lambda_t,tau_t
void write_metrics_csv(std::ostream& os, const RunResult& result);

}  // namespace ppsim
