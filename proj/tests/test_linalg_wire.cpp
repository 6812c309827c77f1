#include <cstring>

#include "crsfl/linalg.hpp"
#include "crsfl/rng.hpp"
#include "crsfl/wire.hpp"
#include "doctest.h"

using namespace crsfl;

TEST_CASE("squared_l2") {
  CHECK(squared_l2(GradientVector{0, 0, 0}) == 0.0);
  CHECK(squared_l2(GradientVector{3, 4}) == 25.0);
  CHECK(squared_l2(GradientVector{1.5, -2.0, 0.25}) == doctest::Approx(6.3125).epsilon(1e-15));
  CHECK(squared_l2(-2.0) == 4.0);  // coordinate-wise variant
}

TEST_CASE("densify places entries and zeros the rest") {
  CHECK(densify({.dim = 4}) == GradientVector{0, 0, 0, 0});
  CHECK(densify({.dim = 3, .entries = {{1, 5.0}}}) ==
        GradientVector{0, 5.0, 0});
  CHECK(densify({.dim = 5, .entries = {{0, 1.0}, {4, -2.0}}}) ==
        GradientVector{1.0, 0, 0, 0, -2.0});
}

TEST_CASE("densify rejects malformed updates") {
  CHECK_THROWS_AS(densify({.dim = 2, .entries = {{2, 1.0}}}),
                  MalformedPayload);
  CHECK_THROWS_AS(densify({.dim = 4, .entries = {{2, 1.0}, {2, 1.0}}}),
                  MalformedPayload);
  CHECK_THROWS_AS(densify({.dim = 4, .entries = {{3, 1.0}, {1, 1.0}}}),
                  MalformedPayload);
}

TEST_CASE("wire sizes are closed-form") {
  SparseUpdate u{.dim = 10};
  CHECK(serialize(u).size() == 21);
  CHECK(payload_bytes(u) == 21);
  u.entries = {{0, 1.0}, {3, -2.5}, {9, 4.0}};
  CHECK(serialize(u).size() == 45);
  CHECK(payload_bytes(u) == 45);
  CHECK(dense_broadcast_bytes(100) == 400);
}

TEST_CASE("serialize/deserialize round-trip") {
  SparseUpdate u{.dim = 7,
                 .entries = {{1, 0.125}, {4, -3.0}, {6, 1e-3}},
                 .threshold = 0.75,
                 .codec = Codec::kCrs};
  SparseUpdate back = deserialize(serialize(u));
  CHECK(back.dim == u.dim);
  CHECK(back.threshold == u.threshold);  // threshold is a full double
  CHECK(back.codec == u.codec);
  REQUIRE(back.entries.size() == u.entries.size());
  for (std::size_t i = 0; i < u.entries.size(); ++i) {
    CHECK(back.entries[i].index == u.entries[i].index);
    CHECK(back.entries[i].value ==
          static_cast<double>(static_cast<float>(u.entries[i].value)));
  }

  SparseUpdate empty{.dim = 9};
  CHECK(deserialize(serialize(empty)) == empty);
}

TEST_CASE("payload_bytes equals serialize length on randomized updates") {
  RngStream rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    SparseUpdate u;
    u.dim = 1 + static_cast<std::uint32_t>(rng.below(300));
    u.codec = static_cast<Codec>(rng.below(6));
    u.threshold = rng.uniform();
    std::uint32_t count = static_cast<std::uint32_t>(rng.below(u.dim + 1));
    // Pick `count` strictly increasing indices.
    std::uint32_t next = 0;
    for (std::uint32_t i = 0; i < count && next < u.dim; ++i) {
      next += static_cast<std::uint32_t>(
          rng.below((u.dim - next) / (count - i) + 1));
      if (next >= u.dim) break;
      u.entries.push_back({next, rng.uniform(-5, 5)});
      ++next;
    }
    CHECK(payload_bytes(u) == serialize(u).size());
  }
}

TEST_CASE("deserialize rejects malformed payloads distinctly") {
  SparseUpdate u{.dim = 6, .entries = {{2, 1.0}, {5, 2.0}}};
  auto bytes = serialize(u);

  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK_THROWS_WITH_AS(deserialize(bytes), doctest::Contains("magic"),
                         MalformedPayload);
  }
  SUBCASE("truncated header") {
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + 10);
    CHECK_THROWS_WITH_AS(deserialize(cut), doctest::Contains("truncated"),
                         MalformedPayload);
  }
  SUBCASE("truncated entries") {
    bytes.pop_back();
    CHECK_THROWS_AS(deserialize(bytes), MalformedPayload);
  }
  SUBCASE("duplicate index") {
    std::memcpy(&bytes[21 + 8], &bytes[21], 4);  // second index := first
    CHECK_THROWS_AS(deserialize(bytes), MalformedPayload);
  }
  SUBCASE("index out of range") {
    bytes[21] = 60;
    CHECK_THROWS_AS(deserialize(bytes), MalformedPayload);
  }
  SUBCASE("count exceeding dim") {
    bytes[9] = 200;
    CHECK_THROWS_AS(deserialize(bytes), MalformedPayload);
  }
}

TEST_CASE("single-byte header mutations either fail or change content") {
  SparseUpdate u{.dim = 12,
                 .entries = {{0, 1.5}, {7, -2.0}},
                 .threshold = 0.25,
                 .codec = Codec::kMinMax};
  auto bytes = serialize(u);
  for (std::size_t pos = 0; pos < kWireHeaderBytes; ++pos) {
    for (int delta : {1, 0x80}) {
      auto mutated = bytes;
      mutated[pos] = static_cast<std::uint8_t>(mutated[pos] ^ delta);
      try {
        SparseUpdate back = deserialize(mutated);
        CHECK(back != u);  // accepted mutations must not alias the original
      } catch (const MalformedPayload&) {
        // rejection is the expected outcome for magic/count corruption
      }
    }
  }
}

TEST_CASE("serialize rejects invalid updates") {
  SparseUpdate too_many{.dim = 1, .entries = {{0, 1.0}}};
  too_many.entries.push_back({0, 2.0});
  CHECK_THROWS_AS(serialize(too_many), MalformedPayload);

  SparseUpdate nan_value{.dim = 2,
                         .entries = {{0, std::nan("")}}};
  CHECK_THROWS_AS(serialize(nan_value), MalformedPayload);
}
