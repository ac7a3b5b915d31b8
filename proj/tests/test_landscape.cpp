#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "ppsim/errors.hpp"
#include "ppsim/landscape.hpp"
#include "ppsim/objectives.hpp"
#include "ppsim/param_space.hpp"

using namespace ppsim;

namespace {

std::vector<ParamVector> random_workers(std::size_t M, std::size_t d, RngStream& rng) {
  std::vector<ParamVector> ws(M);
  for (auto& w : ws) {
    w.resize(d);
    for (double& v : w) v = rng.normal();
  }
  return ws;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("plane basis is orthonormal and anchored at the worker mean") {
  RngStream rng(101, 0);
  auto workers = random_workers(6, 9, rng);
  SvdBasis basis = svd_basis(workers);

  CHECK(basis.x_A == mean_vectors(workers));
  CHECK(std::abs(norm2(basis.dx) - 1.0) <= 1e-12);
  CHECK(std::abs(norm2(basis.dy) - 1.0) <= 1e-12);
  CHECK(std::abs(dot(basis.dx, basis.dy)) <= 1e-10);

  SUBCASE("the sign convention pins the largest coordinate positive") {
    auto check_sign = [](const ParamVector& v) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < v.size(); ++i) {
        if (std::abs(v[i]) > std::abs(v[best])) best = i;
      }
      CHECK(v[best] > 0.0);
    };
    check_sign(basis.dx);
    check_sign(basis.dy);
  }
}

TEST_CASE("plane basis recovers a known two dimensional arrangement") {
  // Workers live in span{e0, e1} around a fixed anchor, with more spread along
  // e0 than e1, so dx must align with e0 and dy with e1.
  const std::size_t d = 7;
  ParamVector c(d, 0.0);
  c[3] = 2.5;
  auto place = [&](double a, double b) {
    ParamVector w = c;
    w[0] += a;
    w[1] += b;
    return w;
  };
  std::vector<ParamVector> workers = {place(4.0, 0.5), place(-4.0, -0.5),
                                      place(2.0, -1.0), place(-2.0, 1.0)};
  SvdBasis basis = svd_basis(workers);

  for (std::size_t i = 0; i < d; ++i) {
    CHECK(basis.x_A[i] == doctest::Approx(c[i]).epsilon(1e-15));
  }
  CHECK(std::abs(basis.dx[0]) > 0.99);
  CHECK(std::abs(basis.dy[1]) > 0.99);
  CHECK(basis.dx[0] > 0.0);
  CHECK(basis.dy[1] > 0.0);

  SUBCASE("projections reproduce the gaps with negligible residual") {
    auto rows = project_workers(workers, basis.x_A, basis.dx, basis.dy);
    REQUIRE(rows.size() == workers.size());
    for (const auto& row : rows) {
      CHECK(row.residual <= 1e-10);
    }
    // Worker 0 sits at roughly (+4, +0.5) in plane coordinates.
    CHECK(rows[0].a == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(rows[0].b == doctest::Approx(0.5).epsilon(1e-4));
  }

  SUBCASE("the basis is invariant under worker reordering") {
    std::vector<ParamVector> shuffled = {workers[2], workers[0], workers[3],
                                         workers[1]};
    SvdBasis other = svd_basis(shuffled);
    for (std::size_t i = 0; i < d; ++i) {
      CHECK(other.x_A[i] == doctest::Approx(basis.x_A[i]).epsilon(1e-15));
      CHECK(other.dx[i] == doctest::Approx(basis.dx[i]).epsilon(1e-10));
      CHECK(other.dy[i] == doctest::Approx(basis.dy[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("collinear gaps trigger the deterministic completion") {
  // Two workers produce exactly opposite gaps along (0.6, 0.8, 0): the leading
  // direction is forced and the second one must be completed from the standard
  // basis vector least aligned with it, here e2.
  ParamVector c{1.0, 2.0, 3.0};
  ParamVector g{1.5, 2.0, 0.0};
  std::vector<ParamVector> workers = {axpy(1.0, g, c), axpy(-1.0, g, c)};
  SvdBasis basis = svd_basis(workers);

  CHECK(basis.x_A == c);
  CHECK(basis.dx[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(basis.dx[1] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(basis.dx[2] == 0.0);
  CHECK(basis.dy == ParamVector{0.0, 0.0, 1.0});

  SUBCASE("flipping the gap sign leaves the fixed-sign output unchanged") {
    std::vector<ParamVector> flipped = {axpy(-1.0, g, c), axpy(1.0, g, c)};
    SvdBasis other = svd_basis(flipped);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(other.dx[i] == doctest::Approx(basis.dx[i]).epsilon(1e-12));
    }
    CHECK(other.dy == basis.dy);
  }

  SUBCASE("three collinear workers take the same branch") {
    std::vector<ParamVector> three = {axpy(2.0, g, c), axpy(-1.0, g, c),
                                      axpy(-1.0, g, c)};
    SvdBasis other = svd_basis(three);
    CHECK(std::abs(std::abs(dot(other.dx, basis.dx)) - 1.0) <= 1e-12);
    CHECK(other.dy == ParamVector{0.0, 0.0, 1.0});
  }
}

TEST_CASE("plane construction rejects degenerate input") {
  CHECK_THROWS_AS(svd_basis({ParamVector{1.0, 2.0}}), InvalidArgument);
  CHECK_THROWS_AS(svd_basis({ParamVector{1.0, 2.0}, ParamVector{1.0}}),
                  DimensionMismatch);
  CHECK_THROWS_AS(svd_basis({ParamVector{1.0}, ParamVector{2.0}}),
                  DegenerateGeometry);
  std::vector<ParamVector> same(3, ParamVector{0.4, -0.2, 7.0});
  CHECK_THROWS_AS(svd_basis(same), DegenerateGeometry);
}

TEST_CASE("worker projections along an axis-aligned basis are exact") {
  const std::size_t d = 4;
  ParamVector x_A{0.5, -1.0, 2.0, 0.0};
  ParamVector dx{1.0, 0.0, 0.0, 0.0};
  ParamVector dy{0.0, 1.0, 0.0, 0.0};
  std::vector<ParamVector> workers = {
      axpy(2.0, dx, x_A),
      axpy(3.0, dy, axpy(-0.5, dx, x_A)),
      axpy(1.0, ParamVector{0.0, 0.0, 1.0, 0.0}, x_A),
  };
  auto rows = project_workers(workers, x_A, dx, dy);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].worker == 0);
  CHECK(rows[0].a == 2.0);
  CHECK(rows[0].b == 0.0);
  CHECK(rows[0].residual == 0.0);
  CHECK(rows[1].a == -0.5);
  CHECK(rows[1].b == 3.0);
  CHECK(rows[1].residual == 0.0);
  CHECK(rows[2].a == 0.0);
  CHECK(rows[2].b == 0.0);
  CHECK(rows[2].residual == 1.0);

  SUBCASE("a skewed basis is rejected") {
    ParamVector skew{1.0, 0.5, 0.0, 0.0};
    CHECK_THROWS_AS(project_workers(workers, x_A, dx, skew), InvalidArgument);
    ParamVector shrunk{0.5, 0.0, 0.0, 0.0};
    CHECK_THROWS_AS(project_workers(workers, x_A, shrunk, dy), InvalidArgument);
  }

  SUBCASE("a mis-sized worker is rejected") {
    CHECK_THROWS_AS(project_workers({ParamVector{1.0}}, x_A, dx, dy),
                    DimensionMismatch);
  }
}

TEST_CASE("grid scan enumerates the inclusive symmetric lattice in order") {
  QuadraticObjective obj({1.0, 1.0}, {0.0, 0.0}, 0.0);
  ParamVector x_A{0.0, 0.0};
  ParamVector dx{1.0, 0.0};
  ParamVector dy{0.0, 1.0};
  LandscapeGrid grid = scan_grid(obj, x_A, dx, dy, 1.0, 0.5);

  CHECK(grid.half == 2);
  CHECK(grid.limit == 1.0);
  CHECK(grid.step == 0.5);
  REQUIRE(grid.nodes.size() == 25);
  CHECK(grid.nodes.front().i == -2);
  CHECK(grid.nodes.front().j == -2);
  CHECK(grid.nodes.back().i == 2);
  CHECK(grid.nodes.back().j == 2);

  for (std::size_t flat = 0; flat < grid.nodes.size(); ++flat) {
    const auto& node = grid.nodes[flat];
    CHECK(node.i == static_cast<long long>(flat / 5) - 2);
    CHECK(node.j == static_cast<long long>(flat % 5) - 2);
    CHECK(node.a == static_cast<double>(node.i) * 0.5);
    CHECK(node.b == static_cast<double>(node.j) * 0.5);
    CHECK(node.test_loss == node.train_loss);
    CHECK_FALSE(node.train_err.has_value());
    CHECK_FALSE(node.test_err.has_value());
  }

  SUBCASE("an isotropic bowl renders a symmetric surface") {
    auto at = [&](long long i, long long j) {
      return grid.nodes[static_cast<std::size_t>((i + 2) * 5 + (j + 2))].train_loss;
    };
    for (long long i = -2; i <= 2; ++i) {
      for (long long j = -2; j <= 2; ++j) {
        CHECK(at(i, j) == at(-i, j));
        CHECK(at(i, j) == at(i, -j));
        CHECK(at(i, j) == at(j, i));
      }
    }
    CHECK(at(2, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(at(1, 1) == doctest::Approx(0.25).epsilon(1e-15));
  }
}

TEST_CASE("grid origin reuses the anchor point bit for bit") {
  QuadraticObjective obj({0.7, 1.3, 2.1}, {0.1, -0.2, 0.3}, 0.25);
  ParamVector x_A{0.3, -0.7, 1.9};
  RngStream rng(55, 3);
  ParamVector dx = sample_unit_sphere(3, rng);
  // Orthogonalize a second random direction against dx by hand.
  ParamVector dy = sample_unit_sphere(3, rng);
  const double proj = dot(dy, dx);
  dy = axpy(-proj, dx, dy);
  ParamVector unit = unit_direction(ParamVector(3, 0.0), dy);
  LandscapeGrid grid = scan_grid(obj, x_A, dx, unit, 0.4, 0.2);

  REQUIRE(grid.nodes.size() == 25);
  const auto& origin = grid.nodes[12];
  CHECK(origin.i == 0);
  CHECK(origin.j == 0);
  CHECK(origin.train_loss == obj.value(x_A));
}

TEST_CASE("grid half width survives inexact division") {
  QuadraticObjective obj({1.0, 1.0}, {0.0, 0.0}, 0.0);
  ParamVector x_A{0.0, 0.0};
  ParamVector dx{1.0, 0.0};
  ParamVector dy{0.0, 1.0};
  // 1.0 / 0.1 lands just below 10 in floating point; the scan must still
  // produce the full 21 x 21 lattice rather than dropping the outer ring.
  LandscapeGrid grid = scan_grid(obj, x_A, dx, dy, 1.0, 0.1);
  CHECK(grid.half == 10);
  CHECK(grid.nodes.size() == 441);
}

TEST_CASE("grid scan validates its inputs") {
  QuadraticObjective obj({1.0, 1.0}, {0.0, 0.0}, 0.0);
  ParamVector x_A{0.0, 0.0};
  ParamVector dx{1.0, 0.0};
  ParamVector dy{0.0, 1.0};

  CHECK_THROWS_AS(scan_grid(obj, ParamVector{0.0}, dx, dy, 1.0, 0.5),
                  DimensionMismatch);
  CHECK_THROWS_AS(scan_grid(obj, x_A, ParamVector{1.0}, dy, 1.0, 0.5),
                  DimensionMismatch);
  CHECK_THROWS_AS(scan_grid(obj, x_A, ParamVector{0.5, 0.0}, dy, 1.0, 0.5),
                  InvalidArgument);
  CHECK_THROWS_AS(scan_grid(obj, x_A, dx, ParamVector{0.9, 0.4}, 1.0, 0.5),
                  InvalidArgument);
  CHECK_THROWS_AS(scan_grid(obj, x_A, dx, dy, 0.0, 0.5), InvalidArgument);
  CHECK_THROWS_AS(scan_grid(obj, x_A, dx, dy, -1.0, 0.5), InvalidArgument);
  CHECK_THROWS_AS(scan_grid(obj, x_A, dx, dy, 1.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(scan_grid(obj, x_A, dx, dy, 1.0, 2.0), InvalidArgument);
  CHECK_THROWS_AS(scan_grid(obj, x_A, dx, dy, 1.0, 0.5, 0), InvalidArgument);
  // 2001 x 2001 nodes blow the one-million budget.
  CHECK_THROWS_AS(scan_grid(obj, x_A, dx, dy, 1.0, 0.001), InvalidArgument);
}

TEST_CASE("grid scan is thread count invariant on classifier surfaces") {
  MlpSpec spec;
  spec.hidden = 4;
  spec.n_train = 24;
  spec.n_test = 12;
  MlpObjective mlp(spec);
  RngStream rng(9, 0);
  ParamVector x_A = mlp.init_point(rng);
  ParamVector dx(mlp.dim(), 0.0);
  ParamVector dy(mlp.dim(), 0.0);
  dx[0] = 1.0;
  dy[1] = 1.0;

  LandscapeGrid one = scan_grid(mlp, x_A, dx, dy, 0.8, 0.4, 1);
  LandscapeGrid four = scan_grid(mlp, x_A, dx, dy, 0.8, 0.4, 4);
  REQUIRE(one.nodes.size() == 25);
  REQUIRE(four.nodes.size() == 25);
  for (std::size_t k = 0; k < one.nodes.size(); ++k) {
    const auto& a = one.nodes[k];
    const auto& b = four.nodes[k];
    CHECK(a.i == b.i);
    CHECK(a.j == b.j);
    CHECK(a.train_loss == b.train_loss);
    CHECK(a.test_loss == b.test_loss);
    REQUIRE(a.train_err.has_value());
    REQUIRE(a.test_err.has_value());
    REQUIRE(b.train_err.has_value());
    REQUIRE(b.test_err.has_value());
    CHECK(*a.train_err == *b.train_err);
    CHECK(*a.test_err == *b.test_err);
    CHECK(*a.train_err >= 0.0);
    CHECK(*a.train_err <= 100.0);
  }
  // Classifier surfaces price train and test splits separately.
  CHECK(one.nodes[12].test_loss != one.nodes[12].train_loss);
}

TEST_CASE("interpolation endpoints evaluate the inputs bit for bit") {
  QuadraticObjective obj({1.0, 2.0}, {0.5, -0.5}, 1.0);
  ParamVector x_a{3.0, 1.0};
  ParamVector x_b{-2.0, 0.7};
  auto points = interpolation_scan(x_a, x_b, obj, 5);

  REQUIRE(points.size() == 5);
  CHECK(points[0].alpha == 0.0);
  CHECK(points[1].alpha == 0.25);
  CHECK(points[2].alpha == 0.5);
  CHECK(points[3].alpha == 0.75);
  CHECK(points[4].alpha == 1.0);
  CHECK(points.front().train_loss == obj.value(x_a));
  CHECK(points.back().train_loss == obj.value(x_b));
  CHECK_FALSE(points[2].train_err.has_value());

  SUBCASE("a convex bowl keeps the interior below the worse endpoint") {
    const double cap = std::max(points.front().train_loss, points.back().train_loss);
    for (const auto& p : points) CHECK(p.train_loss <= cap + 1e-12);
  }
}

TEST_CASE("interpolation exposes the barrier between two basins") {
  MultiBasinObjective mb({{{-2.0, 0.0}, 0.3, 1.0}, {{2.0, 0.0}, 1.4, 0.5}});
  ParamVector x_a{-2.0, 0.0};
  ParamVector x_b{2.0, 0.0};
  auto points = interpolation_scan(x_a, x_b, mb, 41);

  REQUIRE(points.size() == 41);
  double interior_max = -1.0;
  for (std::size_t k = 1; k + 1 < points.size(); ++k) {
    interior_max = std::max(interior_max, points[k].train_loss);
  }
  CHECK(interior_max > points.front().train_loss);
  CHECK(interior_max > points.back().train_loss);
}

TEST_CASE("interpolation validates its inputs") {
  QuadraticObjective obj({1.0, 2.0}, {0.0, 0.0}, 0.0);
  ParamVector a{1.0, 1.0};
  ParamVector b{2.0, 2.0};
  CHECK_THROWS_AS(interpolation_scan(a, b, obj, 1), InvalidArgument);
  CHECK_THROWS_AS(interpolation_scan(ParamVector{1.0}, b, obj, 5),
                  DimensionMismatch);
  CHECK_THROWS_AS(interpolation_scan(a, ParamVector{1.0}, obj, 5),
                  DimensionMismatch);
}

TEST_CASE("surface tables serialize with stable headers") {
  QuadraticObjective obj({1.0, 1.0}, {0.0, 0.0}, 0.0);
  ParamVector x_A{0.0, 0.0};
  ParamVector dx{1.0, 0.0};
  ParamVector dy{0.0, 1.0};

  SUBCASE("grid rows leave classifier columns blank for plain objectives") {
    LandscapeGrid grid = scan_grid(obj, x_A, dx, dy, 0.5, 0.5);
    std::ostringstream os;
    write_grid_csv(os, grid);
    auto lines = split_lines(os.str());
    REQUIRE(lines.size() == 1 + grid.nodes.size());
    CHECK(lines[0] == "i,j,a,b,train_loss,test_loss,train_err,test_err");
    for (std::size_t k = 1; k < lines.size(); ++k) {
      CHECK(lines[k].substr(lines[k].size() - 2) == ",,");
    }
    CHECK(lines[1].substr(0, 6) == "-1,-1,");
  }

  SUBCASE("grid rows carry classifier columns when present") {
    MlpSpec spec;
    spec.hidden = 3;
    spec.n_train = 12;
    spec.n_test = 6;
    MlpObjective mlp(spec);
    RngStream rng(3, 0);
    ParamVector anchor = mlp.init_point(rng);
    ParamVector mdx(mlp.dim(), 0.0), mdy(mlp.dim(), 0.0);
    mdx[0] = 1.0;
    mdy[1] = 1.0;
    LandscapeGrid grid = scan_grid(mlp, anchor, mdx, mdy, 0.3, 0.3);
    std::ostringstream os;
    write_grid_csv(os, grid);
    auto lines = split_lines(os.str());
    REQUIRE(lines.size() == 10);
    for (std::size_t k = 1; k < lines.size(); ++k) {
      CHECK(lines[k].back() != ',');
      CHECK(std::count(lines[k].begin(), lines[k].end(), ',') == 7);
    }
  }

  SUBCASE("projection rows list worker ids in order") {
    std::vector<ParamVector> workers = {axpy(1.5, dx, x_A), axpy(-2.0, dy, x_A)};
    auto rows = project_workers(workers, x_A, dx, dy);
    std::ostringstream os;
    write_projections_csv(os, rows);
    auto lines = split_lines(os.str());
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "worker_id,a,b,residual");
    CHECK(lines[1] == "0,1.5,0,0");
    CHECK(lines[2] == "1,0,-2,0");
  }

  SUBCASE("interpolation rows start at alpha zero and end at alpha one") {
    auto points = interpolation_scan(ParamVector{1.0, 0.0}, ParamVector{0.0, 1.0}, obj, 3);
    std::ostringstream os;
    write_interpolation_csv(os, points);
    auto lines = split_lines(os.str());
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "alpha,train_loss,test_loss,train_err,test_err");
    CHECK(lines[1].substr(0, 2) == "0,");
    CHECK(lines[3].substr(0, 2) == "1,");
    for (std::size_t k = 1; k < lines.size(); ++k) {
      CHECK(lines[k].substr(lines[k].size() - 2) == ",,");
    }
  }
}
