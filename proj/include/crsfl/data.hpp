#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "crsfl/rng.hpp"

namespace crsfl {

class DataError : public std::runtime_error {
 public:
  enum class Kind { kBadMagic, kTruncated, kCountMismatch, kBadValue, kIo };

  DataError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Labeled feature matrix. Rows are samples; features are row-major.
struct Dataset {
  std::vector<double> features;     // n * f, row-major
  std::vector<std::int32_t> labels; // n, each in [0, C)
  std::uint32_t n = 0;
  std::uint32_t f = 0;
  std::uint32_t c = 0;

  std::span<const double> row(std::uint32_t i) const {
    return {features.data() + static_cast<std::size_t>(i) * f, f};
  }
};

// Disjoint client sample assignments covering [0, n).
struct Partition {
  std::vector<std::vector<std::uint32_t>> assignments;
};

// Gaussian blobs: class c gets a mean drawn from a seeded isotropic
// Gaussian scaled by class_sep; samples add unit-variance noise. Labels
// cycle round-robin so classes stay balanced. Requires n >= 2 * C.
Dataset synth_classification(std::uint32_t n, std::uint32_t f,
                             std::uint32_t c, double class_sep,
                             std::uint64_t seed);

// IDX-format ingestion (big-endian; magic 0x00000803 for images and
// 0x00000801 for labels). Pixels are scaled to [0, 1].
Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path);

// Label-sorted shard partition: sort sample indices by label, cut into
// m * shards_per_client contiguous shards, deal shards_per_client to each
// client by a seeded shuffle. min_samples is enforced afterwards by
// stealing single samples from the largest client.
Partition partition_shards(const Dataset& ds, std::uint32_t m,
                           std::uint32_t shards_per_client,
                           std::uint64_t seed, std::uint32_t min_samples = 2);

// Per-class Dirichlet(beta) allocation across clients.
Partition partition_dirichlet(const Dataset& ds, std::uint32_t m, double beta,
                              std::uint64_t seed,
                              std::uint32_t min_samples = 2);

// Mean pairwise total-variation distance between client label histograms;
// a heterogeneity diagnostic used by tests and sweeps.
double mean_pairwise_label_tv(const Dataset& ds, const Partition& part);

}  // namespace crsfl
