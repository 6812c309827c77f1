#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "crsfl/linalg.hpp"

namespace crsfl {

// Compressor tag carried in the wire header.
enum class Codec : std::uint8_t {
  kIdentity = 0,
  kCrs = 1,
  kMinMax = 2,
  kGSpar = 3,
  kTopK = 4,
  kPoisson = 5,
};

constexpr std::uint8_t kMaxCodecId = 5;

struct SparseEntry {
  std::uint32_t index;
  double value;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

// Compressed local update: the wire payload of one client round.
// Invariants: indices strictly increasing and < dim; entries.size() <= dim;
// values finite. `threshold` is the estimator scaling threshold (tau*),
// kept for audit.
struct SparseUpdate {
  std::uint32_t dim = 0;
  std::vector<SparseEntry> entries;
  double threshold = 0.0;
  Codec codec = Codec::kIdentity;

  friend bool operator==(const SparseUpdate&, const SparseUpdate&) = default;
};

class MalformedPayload : public std::runtime_error {
 public:
  enum class Kind {
    kBadMagic,
    kTruncated,
    kSizeMismatch,
    kBadCodec,
    kCountExceedsDim,
    kIndexOutOfRange,
    kNonIncreasingIndex,
    kNonFiniteValue,
  };

  MalformedPayload(Kind kind, const std::string& what)
      : std::runtime_error("malformed payload: " + what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Throws MalformedPayload if `u` violates the SparseUpdate invariants.
void validate(const SparseUpdate& u);

// Dense reconstruction: length u.dim, entries placed at their indices,
// everything else exactly zero.
GradientVector densify(const SparseUpdate& u);

// Wire layout, little-endian:
//   "CRS1" | codec_id u8 | dim u32 | entry_count u32 | threshold f64 |
//   entry_count x { index u32 | value f32 }
// Total bytes: 21 + 8 * entry_count. Values are narrowed to 32-bit floats
// on the wire; everything else round-trips exactly.
std::vector<std::uint8_t> serialize(const SparseUpdate& u);

SparseUpdate deserialize(std::span<const std::uint8_t> bytes);

// Exact serialized size without allocating the bytes.
std::size_t payload_bytes(const SparseUpdate& u);

constexpr std::size_t kWireHeaderBytes = 21;
constexpr std::size_t kWireEntryBytes = 8;

// Download cost of broadcasting a dense d-dimensional model or update:
// 4 bytes per coordinate, no header.
inline std::size_t dense_broadcast_bytes(std::size_t dim) { return 4 * dim; }

}  // namespace crsfl
