#include "crsfl/wire.hpp"

#include <bit>
#include <cmath>
#include <cstring>

namespace crsfl {

namespace {

constexpr char kMagic[4] = {'C', 'R', 'S', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) |
         static_cast<std::uint32_t>(b[at + 1]) << 8 |
         static_cast<std::uint32_t>(b[at + 2]) << 16 |
         static_cast<std::uint32_t>(b[at + 3]) << 24;
}

std::uint64_t get_u64(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(b[at + i]) << (8 * i);
  }
  return v;
}

}  // namespace

void validate(const SparseUpdate& u) {
  if (static_cast<std::uint8_t>(u.codec) > kMaxCodecId) {
    throw MalformedPayload(MalformedPayload::Kind::kBadCodec,
                           "unknown codec id");
  }
  if (u.entries.size() > u.dim) {
    throw MalformedPayload(MalformedPayload::Kind::kCountExceedsDim,
                           "entry count " + std::to_string(u.entries.size()) +
                               " exceeds dim " + std::to_string(u.dim));
  }
  std::int64_t prev = -1;
  for (const SparseEntry& e : u.entries) {
    if (e.index >= u.dim) {
      throw MalformedPayload(
          MalformedPayload::Kind::kIndexOutOfRange,
          "index " + std::to_string(e.index) + " >= dim " +
              std::to_string(u.dim));
    }
    if (static_cast<std::int64_t>(e.index) <= prev) {
      throw MalformedPayload(MalformedPayload::Kind::kNonIncreasingIndex,
                             "indices not strictly increasing at " +
                                 std::to_string(e.index));
    }
    prev = e.index;
    if (!std::isfinite(e.value)) {
      throw MalformedPayload(MalformedPayload::Kind::kNonFiniteValue,
                             "non-finite value at index " +
                                 std::to_string(e.index));
    }
  }
  if (!std::isfinite(u.threshold) || u.threshold < 0.0) {
    throw MalformedPayload(MalformedPayload::Kind::kNonFiniteValue,
                           "threshold must be finite and non-negative");
  }
}

GradientVector densify(const SparseUpdate& u) {
  validate(u);
  GradientVector out(u.dim, 0.0);
  for (const SparseEntry& e : u.entries) out[e.index] = e.value;
  return out;
}

std::vector<std::uint8_t> serialize(const SparseUpdate& u) {
  validate(u);
  std::vector<std::uint8_t> out;
  out.reserve(payload_bytes(u));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(static_cast<std::uint8_t>(u.codec));
  put_u32(out, u.dim);
  put_u32(out, static_cast<std::uint32_t>(u.entries.size()));
  put_u64(out, std::bit_cast<std::uint64_t>(u.threshold));
  for (const SparseEntry& e : u.entries) {
    put_u32(out, e.index);
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(e.value)));
  }
  return out;
}

SparseUpdate deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kWireHeaderBytes) {
    throw MalformedPayload(MalformedPayload::Kind::kTruncated,
                           "truncated header: " +
                               std::to_string(bytes.size()) + " bytes");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw MalformedPayload(MalformedPayload::Kind::kBadMagic, "bad magic");
  }
  std::uint8_t codec_id = bytes[4];
  if (codec_id > kMaxCodecId) {
    throw MalformedPayload(MalformedPayload::Kind::kBadCodec,
                           "unknown codec id " + std::to_string(codec_id));
  }
  SparseUpdate u;
  u.codec = static_cast<Codec>(codec_id);
  u.dim = get_u32(bytes, 5);
  std::uint32_t count = get_u32(bytes, 9);
  u.threshold = std::bit_cast<double>(get_u64(bytes, 13));
  if (count > u.dim) {
    throw MalformedPayload(MalformedPayload::Kind::kCountExceedsDim,
                           "entry count " + std::to_string(count) +
                               " exceeds dim " + std::to_string(u.dim));
  }
  std::size_t expected = kWireHeaderBytes + kWireEntryBytes * count;
  if (bytes.size() < expected) {
    throw MalformedPayload(MalformedPayload::Kind::kTruncated,
                           "truncated payload: expected " +
                               std::to_string(expected) + " bytes, got " +
                               std::to_string(bytes.size()));
  }
  if (bytes.size() > expected) {
    throw MalformedPayload(MalformedPayload::Kind::kSizeMismatch,
                           "trailing bytes after payload");
  }
  u.entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::size_t at = kWireHeaderBytes + kWireEntryBytes * i;
    SparseEntry e;
    e.index = get_u32(bytes, at);
    e.value = static_cast<double>(
        std::bit_cast<float>(get_u32(bytes, at + 4)));
    u.entries.push_back(e);
  }
  validate(u);
  return u;
}

std::size_t payload_bytes(const SparseUpdate& u) {
  return kWireHeaderBytes + kWireEntryBytes * u.entries.size();
}

}  // namespace crsfl
