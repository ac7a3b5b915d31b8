#pragma once

#include <cstdint>
#include <filesystem>

#include "ppsim/param_space.hpp"

namespace ppsim {

// Parameter snapshot file: a 16-byte header (magic "PPSV", format version as
// a little-endian u32, dimension as a little-endian u64) followed by the
// coordinates as little-endian IEEE-754 doubles.
inline constexpr std::uint32_t kSnapshotVersion = 1;

void write_snapshot(const std::filesystem::path& path, const ParamVector& x);

// Throws ConfigError on missing files, bad magic, unsupported version, or a
// truncated payload.
ParamVector read_snapshot(const std::filesystem::path& path);

// Sidecar layer layout (segment names, offsets, lengths) as JSON, used by
// normalization-aware measures.
void write_layout_json(const std::filesystem::path& path, const LayerLayout& layout);
LayerLayout read_layout_json(const std::filesystem::path& path);

}  // namespace ppsim
