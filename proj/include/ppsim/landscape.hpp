#pragma once

#include <optional>
#include <ostream>
#include <vector>

#include "ppsim/objectives.hpp"
#include "ppsim/param_space.hpp"

namespace ppsim {

struct SvdBasis {
  ParamVector x_A;  // worker average, the plane origin
  ParamVector dx;   // leading gap direction, unit norm
  ParamVector dy;   // second direction, unit norm, orthogonal to dx
};

// Builds the projection plane from the worker gap vectors d_m = x_m - x_A:
// the top-2 right singular directions of the stacked gaps, computed through
// the M x M Gram matrix. Signs are fixed so each direction's
// largest-magnitude coordinate is positive (first such coordinate on ties).
// When the gaps are collinear, dy is completed deterministically by
// orthogonalizing the standard basis vector least aligned with dx. All
// workers coincident is an error.
SvdBasis svd_basis(const std::vector<ParamVector>& workers);

struct GridNode {
  long long i = 0;  // signed step index along dx
  long long j = 0;  // signed step index along dy
  double a = 0.0;   // i * step
  double b = 0.0;   // j * step
  double train_loss = 0.0;
  double test_loss = 0.0;
  std::optional<double> train_err;  // percent, classifier surfaces only
  std::optional<double> test_err;
};

struct LandscapeGrid {
  SvdBasis basis;
  double limit = 0.0;
  double step = 0.0;
  long long half = 0;           // floor(limit / step); indices span [-half, half]
  std::vector<GridNode> nodes;  // ordered by (i, j) ascending
};

// Evaluates the objective over the inclusive symmetric grid
// x_A + (i*s) dx + (j*s) dy, i, j in [-floor(L/s), floor(L/s)]. The origin
// node reuses x_A itself, so its value is exactly f(x_A). Classifier
// surfaces also report test loss and train/test error. Node budget: at most
// one million evaluations. threads parallelizes the evaluation without
// changing output order.
LandscapeGrid scan_grid(const Objective& obj, const ParamVector& x_A,
                        const ParamVector& dx, const ParamVector& dy, double L, double s,
                        int threads = 1);

struct WorkerProjection {
  int worker = 0;
  double a = 0.0;
  double b = 0.0;
  double residual = 0.0;  // ||d_m - a dx - b dy||
};

std::vector<WorkerProjection> project_workers(const std::vector<ParamVector>& workers,
                                              const ParamVector& x_A,
                                              const ParamVector& dx, const ParamVector& dy);

struct InterpPoint {
  double alpha = 0.0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  std::optional<double> train_err;
  std::optional<double> test_err;
};

// Values along the segment (1 - alpha) x_a + alpha x_b at n evenly spaced
// alphas in [0, 1]. Endpoints evaluate x_a and x_b exactly.
std::vector<InterpPoint> interpolation_scan(const ParamVector& x_a, const ParamVector& x_b,
                                            const Objective& obj, int n);

// i,j,a,b,train_loss,test_loss,train_err,test_err (error columns blank when absent)
void write_grid_csv(std::ostream& os, const LandscapeGrid& grid);
// worker_id,a,b,residual
void write_projections_csv(std::ostream& os, const std::vector<WorkerProjection>& rows);
// alpha,train_loss,test_loss,train_err,test_err
void write_interpolation_csv(std::ostream& os, const std::vector<InterpPoint>& points);

}  // namespace ppsim
