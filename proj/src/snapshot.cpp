#include "ppsim/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "ppsim/errors.hpp"

namespace ppsim {

namespace {

constexpr char kMagic[4] = {'P', 'P', 'S', 'V'};

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  os.write(b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  os.write(b, 8);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_snapshot(const std::filesystem::path& path, const ParamVector& x) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw ConfigError("cannot open snapshot for writing: " + path.string());
  }
  os.write(kMagic, 4);
  put_u32(os, kSnapshotVersion);
  put_u64(os, static_cast<std::uint64_t>(x.size()));
  for (double v : x) {
    put_u64(os, std::bit_cast<std::uint64_t>(v));
  }
  os.flush();
  if (!os) {
    throw ConfigError("failed writing snapshot: " + path.string());
  }
}

ParamVector read_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw ConfigError("cannot open snapshot: " + path.string());
  }
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw ConfigError("not a parameter snapshot: " + path.string());
  }
  const std::uint32_t version = get_u32(is);
  if (!is || version != kSnapshotVersion) {
    throw ConfigError("unsupported snapshot version in " + path.string());
  }
  const std::uint64_t dim = get_u64(is);
  if (!is) {
    throw ConfigError("truncated snapshot header: " + path.string());
  }
  if (dim > (1ull << 32)) {
    throw ConfigError("snapshot dimension implausibly large: " + path.string());
  }
  ParamVector x(static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::uint64_t bits = get_u64(is);
    if (!is) {
      throw ConfigError("truncated snapshot payload: " + path.string());
    }
    x[i] = std::bit_cast<double>(bits);
  }
  return x;
}

void write_layout_json(const std::filesystem::path& path, const LayerLayout& layout) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& seg : layout.segments) {
    segs.push_back({{"name", seg.name},
                    {"offset", seg.offset},
                    {"length", seg.length}});
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw ConfigError("cannot open layout file for writing: " + path.string());
  }
  os << nlohmann::json{{"segments", segs}}.dump(2) << '\n';
  if (!os.flush()) {
    throw ConfigError("failed writing layout file: " + path.string());
  }
}

LayerLayout read_layout_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) {
    throw ConfigError("cannot open layout file: " + path.string());
  }
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed layout file " + path.string() + ": " + e.what());
  }
  LayerLayout layout;
  try {
    for (const auto& seg : j.at("segments")) {
      layout.segments.push_back(LayerSegment{seg.at("name").get<std::string>(),
                                             seg.at("offset").get<std::size_t>(),
                                             seg.at("length").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed layout file " + path.string() + ": " + e.what());
  }
  return layout;
}

}  // namespace ppsim
