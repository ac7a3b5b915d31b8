#include "ppsim/param_space.hpp"

#include <cmath>
#include <numbers>

namespace ppsim {

namespace {

// splitmix64 finalizer. Passes the usual statistical batteries when driven by
// a strided counter, which is exactly how we use it.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::uint32_t stream_id)
    : master_seed_(master_seed), stream_id_(stream_id) {
  // Two mixing rounds decorrelate streams whose ids differ in few bits.
  key_ = mix64(mix64(master_seed) ^
               (0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(stream_id) + 1)));
}

std::uint64_t RngStream::next_u64() { return mix64(key_ + counter_++ * 0xA0761D6478BD642Full); }

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  // u1 in (0, 1] so the log is finite; u2 in [0, 1).
  double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void LayerLayout::validate(std::size_t dim) const {
  if (segments.empty()) throw InvalidArgument("layout has no segments");
  std::size_t expect = 0;
  for (const auto& seg : segments) {
    if (seg.offset != expect)
      throw InvalidArgument("layout segment '" + seg.name + "' is not contiguous");
    if (seg.length == 0)
      throw InvalidArgument("layout segment '" + seg.name + "' is empty");
    expect += seg.length;
  }
  if (expect != dim)
    throw InvalidArgument("layout covers " + std::to_string(expect) +
                          " elements, vector has " + std::to_string(dim));
}

ParamVector axpy(double a, const ParamVector& x, const ParamVector& y) {
  if (x.size() != y.size())
    throw DimensionMismatch("axpy: " + std::to_string(x.size()) + " vs " +
                            std::to_string(y.size()));
  ParamVector out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = a * x[i] + y[i];
  return out;
}

ParamVector mean_vectors(const std::vector<ParamVector>& vs) {
  if (vs.empty()) throw InvalidArgument("mean_vectors: empty list");
  const std::size_t d = vs[0].size();
  ParamVector out(d, 0.0);
  for (const auto& v : vs) {
    if (v.size() != d) throw DimensionMismatch("mean_vectors: ragged input");
    for (std::size_t i = 0; i < d; ++i) out[i] += v[i];
  }
  const double inv = 1.0 / static_cast<double>(vs.size());
  for (double& x : out) x *= inv;
  return out;
}

ParamVector unit_direction(const ParamVector& from, const ParamVector& to, double eps0) {
  if (from.size() != to.size()) throw DimensionMismatch("unit_direction: dim mismatch");
  if (eps0 <= 0) throw InvalidArgument("unit_direction: eps0 must be positive");
  ParamVector gap(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) gap[i] = to[i] - from[i];
  const double n = norm2(gap);
  if (n < eps0)
    throw DegenerateDirection("unit_direction: gap norm " + std::to_string(n) +
                              " below eps0");
  for (double& x : gap) x /= n;
  return gap;
}

ParamVector sample_unit_sphere(std::size_t d, RngStream& rng) {
  if (d < 1) throw InvalidArgument("sample_unit_sphere: d must be >= 1");
  ParamVector v(d);
  double n = 0.0;
  // A fresh Gaussian vector is zero with probability 0; loop anyway so the
  // postcondition (unit norm) can't be violated.
  do {
    for (std::size_t i = 0; i < d; ++i) v[i] = rng.normal();
    n = norm2(v);
  } while (n == 0.0);
  for (double& x : v) x /= n;
  return v;
}

double dot(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("dot: dim mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const ParamVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double distance(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("distance: dim mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

bool all_finite(const ParamVector& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace ppsim
