#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "ppsim/param_space.hpp"

namespace ppsim {

// Additive isotropic Gaussian gradient noise. Per-coordinate std is
// sigma0/sqrt(d) so the total injected variance is exactly sigma0^2.
struct NoiseModel {
  double sigma0 = 0.0;
};

// A stochastic gradient together with the loss observed for the same draw.
struct StochEval {
  ParamVector grad;
  double loss = 0.0;
};

class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::size_t dim() const = 0;

  // Loss at x. Throws NumericalOverflow if the result is not finite.
  virtual double value(const ParamVector& x) const = 0;

  virtual ParamVector full_grad(const ParamVector& x) const = 0;

  // Stochastic gradient plus the matching observed loss. Synthetic surfaces
  // have no minibatches: they return the exact gradient plus noise, and the
  // exact loss. Unbiased with respect to the shard gradient by construction.
  virtual StochEval stoch_eval(const ParamVector& x, int shard, RngStream& rng,
                               const NoiseModel& noise) const;

  ParamVector stoch_grad(const ParamVector& x, int shard, RngStream& rng,
                         const NoiseModel& noise) const {
    return stoch_eval(x, shard, rng, noise).grad;
  }

  // Hessian-vector product. Default is a scale-aware central difference on
  // full_grad; surfaces with a cheap exact form override it.
  virtual ParamVector hvp(const ParamVector& x, const ParamVector& v) const;

  // Raw initialization draw in this surface's natural scale. The trainer
  // applies any user scaling/centering on top.
  virtual ParamVector init_point(RngStream& rng) const;

  // Number of data shards this surface exposes; shardless surfaces report 1
  // and accept any non-negative shard id in stoch_eval.
  virtual int num_shards() const { return 1; }

 protected:
  void check_dim(const ParamVector& x) const;
  void add_noise(ParamVector& g, RngStream& rng, const NoiseModel& noise) const;
  double checked(double v) const;  // throws NumericalOverflow on non-finite
};

// f(x) = 1/2 sum_i c_i (x_i - mu_i)^2 + f0, with c_i > 0.
class QuadraticObjective : public Objective {
 public:
  QuadraticObjective(ParamVector curvatures, ParamVector center, double f0);

  // Curvatures drawn uniformly from [c_min, c_max], center at the origin.
  static QuadraticObjective random(std::size_t d, double c_min, double c_max,
                                   double f0, RngStream& rng);

  std::size_t dim() const override { return curvatures_.size(); }
  double value(const ParamVector& x) const override;
  ParamVector full_grad(const ParamVector& x) const override;
  ParamVector hvp(const ParamVector& x, const ParamVector& v) const override;

  const ParamVector& curvatures() const { return curvatures_; }
  const ParamVector& center() const { return center_; }
  double offset() const { return f0_; }

 private:
  ParamVector curvatures_;
  ParamVector center_;
  double f0_;
};

// Smooth multi-well surface:
//   f(x) = -T log sum_j w_j exp(-||x - mu_j||^2 / (2 s_j^2 T)) + log sum_j w_j
// The shift keeps the global minimum nonnegative (the mixture sum never
// exceeds sum w_j). T is a smoothing temperature, default 1.
class MultiBasinObjective : public Objective {
 public:
  struct Basin {
    ParamVector center;
    double width = 1.0;
    double weight = 1.0;
  };

  explicit MultiBasinObjective(std::vector<Basin> basins, double temperature = 1.0);

  std::size_t dim() const override { return basins_[0].center.size(); }
  double value(const ParamVector& x) const override;
  ParamVector full_grad(const ParamVector& x) const override;

  const std::vector<Basin>& basins() const { return basins_; }
  double temperature() const { return temperature_; }
  // Which basin center is nearest to x. Handy for basin-selection studies.
  std::size_t nearest_basin(const ParamVector& x) const;

 private:
  std::vector<Basin> basins_;
  double temperature_;
  double shift_;
  // log-mixture value and per-basin softmax responsibilities at x
  double log_mixture(const ParamVector& x, std::vector<double>* resp) const;
};

// One-hidden-layer rectifier classifier over synthetic Gaussian blobs with
// softmax cross-entropy loss. The training split is cut into disjoint,
// class-balanced shards (round robin over sample index).
struct MlpSpec {
  int in_dim = 2;
  int hidden = 16;
  int num_classes = 3;
  int n_train = 256;
  int n_test = 128;
  double blob_spread = 2.0;  // class centers sit on a circle of this radius
  double blob_noise = 0.5;   // within-class std per coordinate
  int num_shards = 4;
  int batch_size = 32;
  std::uint64_t data_seed = 1234;
};

class MlpObjective : public Objective {
 public:
  enum class Split { Train, Test };

  explicit MlpObjective(const MlpSpec& spec);

  std::size_t dim() const override { return dim_; }
  // Mean cross-entropy over the full training split.
  double value(const ParamVector& x) const override;
  double test_value(const ParamVector& x) const;
  ParamVector full_grad(const ParamVector& x) const override;
  StochEval stoch_eval(const ParamVector& x, int shard, RngStream& rng,
                       const NoiseModel& noise) const override;
  // Exact mean gradient over one shard (no sampling, no noise).
  ParamVector shard_grad(const ParamVector& x, int shard) const;

  // Misclassification rate in percent, range [0, 100].
  double classification_error(const ParamVector& x, Split split) const;

  ParamVector init_point(RngStream& rng) const override;

  const MlpSpec& spec() const { return spec_; }
  const LayerLayout& layout() const { return layout_; }
  int num_shards() const override { return spec_.num_shards; }
  const std::vector<int>& shard_ids() const { return train_shard_; }

  // Audit dump: feature_0..feature_k,label,shard_id. Training rows carry
  // their shard id, test rows use -1.
  void dump_dataset_csv(std::ostream& os) const;

 private:
  MlpSpec spec_;
  std::size_t dim_;
  LayerLayout layout_;
  std::vector<double> train_x_, test_x_;  // row-major [n][in_dim]
  std::vector<int> train_y_, test_y_;
  std::vector<int> train_shard_;
  std::vector<std::vector<int>> shard_index_;

  double batch_loss_grad(const ParamVector& p, const double* xs, const int* ys,
                         const int* idx, int count, ParamVector* grad) const;
};

}  // namespace ppsim
