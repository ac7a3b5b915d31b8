#include "ppsim/landscape.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "ppsim/errors.hpp"
#include "ppsim/fmt.hpp"

namespace ppsim {

namespace {

// Largest-magnitude coordinate made positive; first such coordinate on ties.
void fix_sign(ParamVector& v) {
  std::size_t best = 0;
  double best_abs = -1.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > best_abs) {
      best_abs = a;
      best = i;
    }
  }
  if (v[best] < 0.0) {
    for (double& x : v) x = -x;
  }
}

void normalize_or_throw(ParamVector& v, const char* what) {
  const double n = norm2(v);
  if (!(n > 1e-300)) {
    throw DegenerateGeometry(std::string(what) + " has no usable direction");
  }
  const double inv = 1.0 / n;
  for (double& x : v) x *= inv;
}

struct SurfaceEval {
  double train_loss = 0.0;
  double test_loss = 0.0;
  std::optional<double> train_err;
  std::optional<double> test_err;
};

SurfaceEval eval_surface(const Objective& obj, const MlpObjective* mlp,
                         const ParamVector& x) {
  SurfaceEval e;
  e.train_loss = obj.value(x);
  if (mlp) {
    e.test_loss = mlp->test_value(x);
    e.train_err = mlp->classification_error(x, MlpObjective::Split::Train);
    e.test_err = mlp->classification_error(x, MlpObjective::Split::Test);
  } else {
    e.test_loss = e.train_loss;
  }
  return e;
}

void check_unit_basis(const ParamVector& x_A, const ParamVector& dx,
                      const ParamVector& dy) {
  if (dx.size() != x_A.size() || dy.size() != x_A.size()) {
    throw DimensionMismatch("basis dimensions do not match the origin");
  }
  if (std::abs(norm2(dx) - 1.0) > 1e-6 || std::abs(norm2(dy) - 1.0) > 1e-6 ||
      std::abs(dot(dx, dy)) > 1e-6) {
    throw InvalidArgument("basis must be orthonormal");
  }
}

}  // namespace

SvdBasis svd_basis(const std::vector<ParamVector>& workers) {
  if (workers.size() < 2) {
    throw InvalidArgument("plane construction needs at least two workers");
  }
  const std::size_t d = workers.front().size();
  for (const auto& w : workers) {
    if (w.size() != d) {
      throw DimensionMismatch("worker parameter vectors differ in dimension");
    }
  }
  if (d < 2) {
    throw DegenerateGeometry("need at least two dimensions for a plane");
  }
  const std::size_t M = workers.size();
  SvdBasis basis;
  basis.x_A = mean_vectors(workers);
  std::vector<ParamVector> gaps(M);
  double max_gap_sq = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    gaps[m].resize(d);
    for (std::size_t i = 0; i < d; ++i) gaps[m][i] = workers[m][i] - basis.x_A[i];
    max_gap_sq = std::max(max_gap_sq, dot(gaps[m], gaps[m]));
  }
  if (max_gap_sq < 1e-24) {
    throw DegenerateGeometry("all workers coincide; the gap plane is undefined");
  }

  Eigen::MatrixXd G(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = i; j < M; ++j) {
      const double g = dot(gaps[i], gaps[j]);
      G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g;
      G(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = g;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  if (es.info() != Eigen::Success) {
    throw DegenerateGeometry("gap Gram matrix eigendecomposition failed");
  }
  const auto& evals = es.eigenvalues();  // ascending
  const auto& evecs = es.eigenvectors();
  const Eigen::Index top = static_cast<Eigen::Index>(M) - 1;
  const double lam1 = evals(top);
  const double lam2 = evals(top - 1);

  auto combine = [&](Eigen::Index col) {
    ParamVector v(d, 0.0);
    for (std::size_t m = 0; m < M; ++m) {
      const double w = evecs(static_cast<Eigen::Index>(m), col);
      if (w == 0.0) continue;
      for (std::size_t i = 0; i < d; ++i) v[i] += w * gaps[m][i];
    }
    return v;
  };

  basis.dx = combine(top);
  normalize_or_throw(basis.dx, "leading gap direction");
  fix_sign(basis.dx);

  if (lam2 <= 1e-12 * lam1) {
    // Collinear gaps: complete the plane from the standard basis vector
    // least aligned with dx.
    std::size_t k = 0;
    double k_abs = std::abs(basis.dx[0]);
    for (std::size_t i = 1; i < d; ++i) {
      const double a = std::abs(basis.dx[i]);
      if (a < k_abs) {
        k_abs = a;
        k = i;
      }
    }
    ParamVector w(d, 0.0);
    w[k] = 1.0;
    const double proj = dot(w, basis.dx);
    for (std::size_t i = 0; i < d; ++i) w[i] -= proj * basis.dx[i];
    normalize_or_throw(w, "completed second direction");
    basis.dy = std::move(w);
  } else {
    basis.dy = combine(top - 1);
    const double proj = dot(basis.dy, basis.dx);
    for (std::size_t i = 0; i < d; ++i) basis.dy[i] -= proj * basis.dx[i];
    normalize_or_throw(basis.dy, "second gap direction");
  }
  fix_sign(basis.dy);
  return basis;
}

LandscapeGrid scan_grid(const Objective& obj, const ParamVector& x_A,
                        const ParamVector& dx, const ParamVector& dy, double L, double s,
                        int threads) {
  if (x_A.size() != obj.dim()) {
    throw DimensionMismatch("origin dimension does not match the objective");
  }
  check_unit_basis(x_A, dx, dy);
  if (!(L > 0.0) || !std::isfinite(L)) {
    throw InvalidArgument("grid limit L must be finite and > 0");
  }
  if (!(s > 0.0) || s > L) {
    throw InvalidArgument("grid step s must satisfy 0 < s <= L");
  }
  if (threads < 1) {
    throw InvalidArgument("threads must be >= 1");
  }
  const long long half = static_cast<long long>(std::floor(L / s + 1e-9));
  const long long side = 2 * half + 1;
  const long long total = side * side;
  if (total > 1000000) {
    throw InvalidArgument("grid would exceed the one-million-node budget");
  }

  LandscapeGrid grid;
  grid.basis = SvdBasis{x_A, dx, dy};
  grid.limit = L;
  grid.step = s;
  grid.half = half;
  grid.nodes.resize(static_cast<std::size_t>(total));

  const MlpObjective* mlp = dynamic_cast<const MlpObjective*>(&obj);
  const std::size_t d = x_A.size();

  auto eval_node = [&](long long flat) {
    const long long i = flat / side - half;
    const long long j = flat % side - half;
    GridNode node;
    node.i = i;
    node.j = j;
    node.a = static_cast<double>(i) * s;
    node.b = static_cast<double>(j) * s;
    SurfaceEval e;
    if (i == 0 && j == 0) {
      e = eval_surface(obj, mlp, x_A);  // origin is the anchor itself, bit-exact
    } else {
      ParamVector x(d);
      for (std::size_t k = 0; k < d; ++k) {
        x[k] = x_A[k] + node.a * dx[k] + node.b * dy[k];
      }
      e = eval_surface(obj, mlp, x);
    }
    node.train_loss = e.train_loss;
    node.test_loss = e.test_loss;
    node.train_err = e.train_err;
    node.test_err = e.test_err;
    grid.nodes[static_cast<std::size_t>(flat)] = node;
  };

  const int nthreads = static_cast<int>(std::min<long long>(threads, total));
  if (nthreads <= 1) {
    for (long long flat = 0; flat < total; ++flat) eval_node(flat);
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nthreads));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int tid = 0; tid < nthreads; ++tid) {
      pool.emplace_back([&, tid]() {
        try {
          for (long long flat = tid; flat < total; flat += nthreads) eval_node(flat);
        } catch (...) {
          errors[static_cast<std::size_t>(tid)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  }
  return grid;
}

std::vector<WorkerProjection> project_workers(const std::vector<ParamVector>& workers,
                                              const ParamVector& x_A,
                                              const ParamVector& dx,
                                              const ParamVector& dy) {
  check_unit_basis(x_A, dx, dy);
  const std::size_t d = x_A.size();
  std::vector<WorkerProjection> rows;
  rows.reserve(workers.size());
  ParamVector gap(d), resid(d);
  for (std::size_t m = 0; m < workers.size(); ++m) {
    if (workers[m].size() != d) {
      throw DimensionMismatch("worker dimension does not match the origin");
    }
    for (std::size_t i = 0; i < d; ++i) gap[i] = workers[m][i] - x_A[i];
    WorkerProjection row;
    row.worker = static_cast<int>(m);
    row.a = dot(gap, dx);
    row.b = dot(gap, dy);
    for (std::size_t i = 0; i < d; ++i) {
      resid[i] = gap[i] - row.a * dx[i] - row.b * dy[i];
    }
    row.residual = norm2(resid);
    rows.push_back(row);
  }
  return rows;
}

std::vector<InterpPoint> interpolation_scan(const ParamVector& x_a, const ParamVector& x_b,
                                            const Objective& obj, int n) {
  if (x_a.size() != obj.dim() || x_b.size() != obj.dim()) {
    throw DimensionMismatch("endpoint dimensions do not match the objective");
  }
  if (n < 2) {
    throw InvalidArgument("interpolation needs at least two points");
  }
  const MlpObjective* mlp = dynamic_cast<const MlpObjective*>(&obj);
  const std::size_t d = x_a.size();
  std::vector<InterpPoint> out;
  out.reserve(static_cast<std::size_t>(n));
  ParamVector x(d);
  for (int k = 0; k < n; ++k) {
    const double alpha = static_cast<double>(k) / static_cast<double>(n - 1);
    SurfaceEval e;
    if (k == 0) {
      e = eval_surface(obj, mlp, x_a);
    } else if (k == n - 1) {
      e = eval_surface(obj, mlp, x_b);
    } else {
      for (std::size_t i = 0; i < d; ++i) {
        x[i] = (1.0 - alpha) * x_a[i] + alpha * x_b[i];
      }
      e = eval_surface(obj, mlp, x);
    }
    InterpPoint p;
    p.alpha = alpha;
    p.train_loss = e.train_loss;
    p.test_loss = e.test_loss;
    p.train_err = e.train_err;
    p.test_err = e.test_err;
    out.push_back(p);
  }
  return out;
}

namespace {

void put_optional(std::ostream& os, const std::optional<double>& v) {
  if (v) os << fmt_double(*v);
}

}  // namespace

void write_grid_csv(std::ostream& os, const LandscapeGrid& grid) {
  os << "i,j,a,b,train_loss,test_loss,train_err,test_err\n";
  for (const auto& node : grid.nodes) {
    os << node.i << ',' << node.j << ',' << fmt_double(node.a) << ',' << fmt_double(node.b)
       << ',' << fmt_double(node.train_loss) << ',' << fmt_double(node.test_loss) << ',';
    put_optional(os, node.train_err);
    os << ',';
    put_optional(os, node.test_err);
    os << '\n';
  }
}

void write_projections_csv(std::ostream& os, const std::vector<WorkerProjection>& rows) {
  os << "worker_id,a,b,residual\n";
  for (const auto& row : rows) {
    os << row.worker << ',' << fmt_double(row.a) << ',' << fmt_double(row.b) << ','
       << fmt_double(row.residual) << '\n';
  }
}

void write_interpolation_csv(std::ostream& os, const std::vector<InterpPoint>& points) {
  os << "alpha,train_loss,test_loss,train_err,test_err\n";
  for (const auto& p : points) {
    os << fmt_double(p.alpha) << ',' << fmt_double(p.train_loss) << ','
       << fmt_double(p.test_loss) << ',';
    put_optional(os, p.train_err);
    os << ',';
    put_optional(os, p.test_err);
    os << '\n';
  }
}

}  // namespace ppsim
