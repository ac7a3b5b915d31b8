#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ppsim/errors.hpp"

namespace ppsim {

// Flat 64-bit float parameter vector. Every module works on this one shape.
using ParamVector = std::vector<double>;

// Reserved stream ids. Worker m draws from stream id m, so utility streams
// live in the high half of the id space and can never collide with a worker.
inline constexpr std::uint32_t kInitStream = 0x80000000u;
inline constexpr std::uint32_t kDatasetStream = 0x80000001u;
inline constexpr std::uint32_t kMeasureStream = 0x80000002u;
inline constexpr std::uint32_t kLandscapeStream = 0x80000003u;

// Counter-based random stream: the n-th output is a pure function of
// (master_seed, stream_id, n). Replay is bit-identical, draws are independent
// of thread scheduling, and a stream can be reconstructed from three integers.
// The mixer is the splitmix64 finalizer, keyed per stream.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint32_t stream_id);

  std::uint64_t next_u64();
  // Uniform on [0, 1), 53-bit resolution.
  double uniform01();
  // Standard normal via Box-Muller. Consumes exactly two counter ticks, so a
  // stream's position is always counter-derivable (no cached spare).
  double normal();

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint32_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t master_seed_;
  std::uint32_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Contiguous named segments spanning a parameter vector, e.g. per-layer views
// of a network. Offsets are in elements, not bytes.
struct LayerSegment {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;
};

struct LayerLayout {
  std::vector<LayerSegment> segments;
  // Segments must be contiguous, non-overlapping, and cover [0, dim).
  void validate(std::size_t dim) const;
};

// a*x + y, elementwise.
ParamVector axpy(double a, const ParamVector& x, const ParamVector& y);

// Elementwise mean, summed in list order (fixed reduction order so results
// are bit-identical across runs and thread counts).
ParamVector mean_vectors(const std::vector<ParamVector>& vs);

// (to - from) / ||to - from||. Throws DegenerateDirection below eps0.
ParamVector unit_direction(const ParamVector& from, const ParamVector& to,
                           double eps0 = 1e-12);

// Gaussian draw normalized to unit norm.
ParamVector sample_unit_sphere(std::size_t d, RngStream& rng);

double dot(const ParamVector& a, const ParamVector& b);
double norm2(const ParamVector& v);
double distance(const ParamVector& a, const ParamVector& b);
bool all_finite(const ParamVector& v);

}  // namespace ppsim
