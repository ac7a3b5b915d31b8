#include "ppsim/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "ppsim/fmt.hpp"

namespace ppsim {

void Objective::check_dim(const ParamVector& x) const {
  if (x.size() != dim())
    throw DimensionMismatch("objective dim " + std::to_string(dim()) +
                            ", got vector of " + std::to_string(x.size()));
}

void Objective::add_noise(ParamVector& g, RngStream& rng, const NoiseModel& noise) const {
  if (noise.sigma0 < 0) throw InvalidArgument("sigma0 must be >= 0");
  if (noise.sigma0 == 0.0) return;
  const double s = noise.sigma0 / std::sqrt(static_cast<double>(g.size()));
  for (double& gi : g) gi += s * rng.normal();
}

double Objective::checked(double v) const {
  if (!std::isfinite(v)) throw NumericalOverflow("objective value is not finite");
  return v;
}

StochEval Objective::stoch_eval(const ParamVector& x, int shard, RngStream& rng,
                                const NoiseModel& noise) const {
  if (shard < 0) throw InvalidArgument("shard id must be >= 0");
  StochEval out{full_grad(x), value(x)};
  add_noise(out.grad, rng, noise);
  return out;
}

ParamVector Objective::hvp(const ParamVector& x, const ParamVector& v) const {
  check_dim(x);
  check_dim(v);
  const double eps = 1e-4 * (1.0 + norm2(x)) / std::max(norm2(v), 1e-12);
  ParamVector gp = full_grad(axpy(eps, v, x));
  ParamVector gm = full_grad(axpy(-eps, v, x));
  ParamVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (gp[i] - gm[i]) / (2.0 * eps);
  return out;
}

ParamVector Objective::init_point(RngStream& rng) const {
  ParamVector x(dim());
  for (double& xi : x) xi = rng.normal();
  return x;
}

// ---------------------------------------------------------------- quadratic

QuadraticObjective::QuadraticObjective(ParamVector curvatures, ParamVector center, double f0)
    : curvatures_(std::move(curvatures)), center_(std::move(center)), f0_(f0) {
  if (curvatures_.empty()) throw InvalidArgument("quadratic: empty curvature vector");
  if (center_.size() != curvatures_.size())
    throw DimensionMismatch("quadratic: center/curvature dim mismatch");
  if (f0_ < 0) throw InvalidArgument("quadratic: f0 must be >= 0");
  for (double c : curvatures_)
    if (!(c > 0)) throw InvalidArgument("quadratic: curvatures must be strictly positive");
}

QuadraticObjective QuadraticObjective::random(std::size_t d, double c_min, double c_max,
                                              double f0, RngStream& rng) {
  if (!(c_min > 0) || c_max < c_min)
    throw InvalidArgument("quadratic: need 0 < c_min <= c_max");
  ParamVector c(d);
  for (double& ci : c) ci = c_min + (c_max - c_min) * rng.uniform01();
  return QuadraticObjective(std::move(c), ParamVector(d, 0.0), f0);
}

double QuadraticObjective::value(const ParamVector& x) const {
  check_dim(x);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double g = x[i] - center_[i];
    s += curvatures_[i] * g * g;
  }
  return checked(0.5 * s + f0_);
}

ParamVector QuadraticObjective::full_grad(const ParamVector& x) const {
  check_dim(x);
  ParamVector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = curvatures_[i] * (x[i] - center_[i]);
  return g;
}

ParamVector QuadraticObjective::hvp(const ParamVector& x, const ParamVector& v) const {
  check_dim(x);
  check_dim(v);
  ParamVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = curvatures_[i] * v[i];
  return out;
}

// --------------------------------------------------------------- multibasin

MultiBasinObjective::MultiBasinObjective(std::vector<Basin> basins, double temperature)
    : basins_(std::move(basins)), temperature_(temperature) {
  if (basins_.empty()) throw InvalidArgument("multibasin: need at least one basin");
  if (!(temperature_ > 0)) throw InvalidArgument("multibasin: temperature must be > 0");
  const std::size_t d = basins_[0].center.size();
  if (d == 0) throw InvalidArgument("multibasin: empty basin center");
  double wsum = 0.0;
  for (const auto& b : basins_) {
    if (b.center.size() != d) throw DimensionMismatch("multibasin: ragged basin centers");
    if (!(b.width > 0)) throw InvalidArgument("multibasin: widths must be > 0");
    if (!(b.weight > 0)) throw InvalidArgument("multibasin: weights must be > 0");
    wsum += b.weight;
  }
  shift_ = std::log(wsum);
}

double MultiBasinObjective::log_mixture(const ParamVector& x, std::vector<double>* resp) const {
  // z_j = log w_j - ||x - mu_j||^2 / (2 s_j^2 T), combined with the usual
  // max-shifted log-sum-exp so far-field points stay finite.
  const std::size_t J = basins_.size();
  std::vector<double> z(J);
  for (std::size_t j = 0; j < J; ++j) {
    const auto& b = basins_[j];
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double gi = x[i] - b.center[i];
      sq += gi * gi;
    }
    z[j] = std::log(b.weight) - sq / (2.0 * b.width * b.width * temperature_);
  }
  const double zmax = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (std::size_t j = 0; j < J; ++j) s += std::exp(z[j] - zmax);
  if (resp) {
    resp->resize(J);
    for (std::size_t j = 0; j < J; ++j) (*resp)[j] = std::exp(z[j] - zmax) / s;
  }
  return zmax + std::log(s);
}

double MultiBasinObjective::value(const ParamVector& x) const {
  check_dim(x);
  return checked(-temperature_ * log_mixture(x, nullptr) + shift_);
}

ParamVector MultiBasinObjective::full_grad(const ParamVector& x) const {
  check_dim(x);
  std::vector<double> resp;
  log_mixture(x, &resp);
  // The temperature cancels: grad = sum_j p_j (x - mu_j) / s_j^2.
  ParamVector g(x.size(), 0.0);
  for (std::size_t j = 0; j < basins_.size(); ++j) {
    const auto& b = basins_[j];
    const double scale = resp[j] / (b.width * b.width);
    for (std::size_t i = 0; i < x.size(); ++i) g[i] += scale * (x[i] - b.center[i]);
  }
  return g;
}

std::size_t MultiBasinObjective::nearest_basin(const ParamVector& x) const {
  check_dim(x);
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < basins_.size(); ++j) {
    const double d = distance(x, basins_[j].center);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

// ---------------------------------------------------------------------- mlp

MlpObjective::MlpObjective(const MlpSpec& spec) : spec_(spec) {
  if (spec_.in_dim < 2) throw InvalidArgument("mlp: in_dim must be >= 2");
  if (spec_.hidden < 1) throw InvalidArgument("mlp: hidden must be >= 1");
  if (spec_.num_classes < 2) throw InvalidArgument("mlp: num_classes must be >= 2");
  if (spec_.n_train < 1) throw InvalidArgument("mlp: n_train must be >= 1");
  if (spec_.n_test < 0) throw InvalidArgument("mlp: n_test must be >= 0");
  if (spec_.num_shards < 1 || spec_.num_shards > spec_.n_train)
    throw InvalidArgument("mlp: num_shards must be in [1, n_train]");
  if (spec_.batch_size < 1) throw InvalidArgument("mlp: batch_size must be >= 1");
  if (!(spec_.blob_spread > 0)) throw InvalidArgument("mlp: blob_spread must be > 0");
  if (spec_.blob_noise < 0) throw InvalidArgument("mlp: blob_noise must be >= 0");

  const std::size_t in = spec_.in_dim, hid = spec_.hidden, cls = spec_.num_classes;
  layout_.segments = {{"w1", 0, hid * in},
                      {"b1", hid * in, hid},
                      {"w2", hid * in + hid, cls * hid},
                      {"b2", hid * in + hid + cls * hid, cls}};
  dim_ = hid * in + hid + cls * hid + cls;
  layout_.validate(dim_);

  // Class centers sit on a circle in the first two feature coordinates; the
  // generator stream is fully determined by data_seed, so the same spec
  // always rebuilds the identical dataset.
  RngStream rng(spec_.data_seed, kDatasetStream);
  std::vector<double> centers(cls * in, 0.0);
  for (std::size_t k = 0; k < cls; ++k) {
    const double ang = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(cls);
    centers[k * in + 0] = spec_.blob_spread * std::cos(ang);
    centers[k * in + 1] = spec_.blob_spread * std::sin(ang);
  }
  auto gen_split = [&](int n, std::vector<double>& xs, std::vector<int>& ys) {
    xs.resize(static_cast<std::size_t>(n) * in);
    ys.resize(n);
    for (int i = 0; i < n; ++i) {
      const int label = i % spec_.num_classes;
      ys[i] = label;
      for (std::size_t f = 0; f < in; ++f)
        xs[static_cast<std::size_t>(i) * in + f] =
            centers[static_cast<std::size_t>(label) * in + f] + spec_.blob_noise * rng.normal();
    }
  };
  gen_split(spec_.n_train, train_x_, train_y_);
  gen_split(spec_.n_test, test_x_, test_y_);

  train_shard_.resize(spec_.n_train);
  shard_index_.resize(spec_.num_shards);
  for (int i = 0; i < spec_.n_train; ++i) {
    const int s = i % spec_.num_shards;
    train_shard_[i] = s;
    shard_index_[s].push_back(i);
  }
}

double MlpObjective::batch_loss_grad(const ParamVector& p, const double* xs, const int* ys,
                                     const int* idx, int count, ParamVector* grad) const {
  const std::size_t in = spec_.in_dim, hid = spec_.hidden, cls = spec_.num_classes;
  const double* w1 = p.data();
  const double* b1 = w1 + hid * in;
  const double* w2 = b1 + hid;
  const double* b2 = w2 + cls * hid;
  double* dw1 = nullptr;
  double* db1 = nullptr;
  double* dw2 = nullptr;
  double* db2 = nullptr;
  if (grad) {
    grad->assign(dim_, 0.0);
    dw1 = grad->data();
    db1 = dw1 + hid * in;
    dw2 = db1 + hid;
    db2 = dw2 + cls * hid;
  }

  std::vector<double> pre(hid), act(hid), logits(cls), dlogits(cls), dpre(hid);
  double loss_sum = 0.0;
  for (int t = 0; t < count; ++t) {
    const int row = idx ? idx[t] : t;
    const double* x = xs + static_cast<std::size_t>(row) * in;
    const int y = ys[row];

    for (std::size_t j = 0; j < hid; ++j) {
      double s = b1[j];
      const double* wrow = w1 + j * in;
      for (std::size_t i = 0; i < in; ++i) s += wrow[i] * x[i];
      pre[j] = s;
      act[j] = s > 0.0 ? s : 0.0;
    }
    for (std::size_t c = 0; c < cls; ++c) {
      double s = b2[c];
      const double* wrow = w2 + c * hid;
      for (std::size_t j = 0; j < hid; ++j) s += wrow[j] * act[j];
      logits[c] = s;
    }
    const double lmax = *std::max_element(logits.begin(), logits.end());
    double expsum = 0.0;
    for (std::size_t c = 0; c < cls; ++c) expsum += std::exp(logits[c] - lmax);
    const double lse = lmax + std::log(expsum);
    loss_sum += lse - logits[y];

    if (grad) {
      for (std::size_t c = 0; c < cls; ++c)
        dlogits[c] = std::exp(logits[c] - lse) - (static_cast<int>(c) == y ? 1.0 : 0.0);
      for (std::size_t j = 0; j < hid; ++j) {
        double dh = 0.0;
        for (std::size_t c = 0; c < cls; ++c) dh += dlogits[c] * w2[c * hid + j];
        dpre[j] = pre[j] > 0.0 ? dh : 0.0;
      }
      for (std::size_t c = 0; c < cls; ++c) {
        double* wrow = dw2 + c * hid;
        for (std::size_t j = 0; j < hid; ++j) wrow[j] += dlogits[c] * act[j];
        db2[c] += dlogits[c];
      }
      for (std::size_t j = 0; j < hid; ++j) {
        if (dpre[j] == 0.0) continue;
        double* wrow = dw1 + j * in;
        for (std::size_t i = 0; i < in; ++i) wrow[i] += dpre[j] * x[i];
        db1[j] += dpre[j];
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(count);
  if (grad)
    for (double& g : *grad) g *= inv;
  return loss_sum * inv;
}

double MlpObjective::value(const ParamVector& x) const {
  check_dim(x);
  return checked(batch_loss_grad(x, train_x_.data(), train_y_.data(), nullptr,
                                 spec_.n_train, nullptr));
}

double MlpObjective::test_value(const ParamVector& x) const {
  check_dim(x);
  if (spec_.n_test == 0) throw InvalidSplit("mlp: test split is empty");
  return checked(batch_loss_grad(x, test_x_.data(), test_y_.data(), nullptr,
                                 spec_.n_test, nullptr));
}

ParamVector MlpObjective::full_grad(const ParamVector& x) const {
  check_dim(x);
  ParamVector g;
  batch_loss_grad(x, train_x_.data(), train_y_.data(), nullptr, spec_.n_train, &g);
  return g;
}

ParamVector MlpObjective::shard_grad(const ParamVector& x, int shard) const {
  check_dim(x);
  if (shard < 0 || shard >= spec_.num_shards)
    throw InvalidArgument("mlp: shard id out of range");
  const auto& idx = shard_index_[shard];
  ParamVector g;
  batch_loss_grad(x, train_x_.data(), train_y_.data(), idx.data(),
                  static_cast<int>(idx.size()), &g);
  return g;
}

StochEval MlpObjective::stoch_eval(const ParamVector& x, int shard, RngStream& rng,
                                   const NoiseModel& noise) const {
  check_dim(x);
  if (shard < 0 || shard >= spec_.num_shards)
    throw InvalidArgument("mlp: shard id out of range");
  const auto& pool = shard_index_[shard];
  // Uniform draws with replacement keep the estimate unbiased for the shard
  // gradient and make rng consumption a fixed batch_size ticks per call.
  std::vector<int> idx(spec_.batch_size);
  for (int& t : idx) t = pool[rng.next_u64() % pool.size()];
  StochEval out;
  out.loss = checked(batch_loss_grad(x, train_x_.data(), train_y_.data(), idx.data(),
                                     spec_.batch_size, &out.grad));
  add_noise(out.grad, rng, noise);
  return out;
}

double MlpObjective::classification_error(const ParamVector& x, Split split) const {
  check_dim(x);
  const auto& xs = split == Split::Train ? train_x_ : test_x_;
  const auto& ys = split == Split::Train ? train_y_ : test_y_;
  if (ys.empty()) throw InvalidSplit("mlp: requested split is empty");

  const std::size_t in = spec_.in_dim, hid = spec_.hidden, cls = spec_.num_classes;
  const double* w1 = x.data();
  const double* b1 = w1 + hid * in;
  const double* w2 = b1 + hid;
  const double* b2 = w2 + cls * hid;
  int wrong = 0;
  std::vector<double> act(hid), logits(cls);
  for (std::size_t r = 0; r < ys.size(); ++r) {
    const double* row = xs.data() + r * in;
    for (std::size_t j = 0; j < hid; ++j) {
      double s = b1[j];
      for (std::size_t i = 0; i < in; ++i) s += w1[j * in + i] * row[i];
      act[j] = s > 0.0 ? s : 0.0;
    }
    for (std::size_t c = 0; c < cls; ++c) {
      double s = b2[c];
      for (std::size_t j = 0; j < hid; ++j) s += w2[c * hid + j] * act[j];
      logits[c] = s;
    }
    const auto arg = std::max_element(logits.begin(), logits.end()) - logits.begin();
    if (static_cast<int>(arg) != ys[r]) ++wrong;
  }
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(ys.size());
}

ParamVector MlpObjective::init_point(RngStream& rng) const {
  const std::size_t in = spec_.in_dim, hid = spec_.hidden, cls = spec_.num_classes;
  ParamVector p(dim_, 0.0);
  const double s1 = std::sqrt(2.0 / static_cast<double>(in));
  const double s2 = std::sqrt(2.0 / static_cast<double>(hid));
  for (std::size_t i = 0; i < hid * in; ++i) p[i] = s1 * rng.normal();
  const std::size_t w2_off = hid * in + hid;
  for (std::size_t i = 0; i < cls * hid; ++i) p[w2_off + i] = s2 * rng.normal();
  return p;
}

void MlpObjective::dump_dataset_csv(std::ostream& os) const {
  const std::size_t in = spec_.in_dim;
  for (std::size_t f = 0; f < in; ++f) os << "feature_" << f << ",";
  os << "label,shard_id\n";
  auto write_rows = [&](const std::vector<double>& xs, const std::vector<int>& ys,
                        const std::vector<int>* shards) {
    for (std::size_t r = 0; r < ys.size(); ++r) {
      for (std::size_t f = 0; f < in; ++f) os << fmt_double(xs[r * in + f]) << ",";
      os << ys[r] << "," << (shards ? (*shards)[r] : -1) << "\n";
    }
  };
  write_rows(train_x_, train_y_, &train_shard_);
  write_rows(test_x_, test_y_, nullptr);
}

}  // namespace ppsim
