#include "crsfl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace crsfl {

Dataset synth_classification(std::uint32_t n, std::uint32_t f,
                             std::uint32_t c, double class_sep,
                             std::uint64_t seed) {
  if (c == 0 || f == 0) {
    throw std::invalid_argument("synth_classification: f, C must be positive");
  }
  if (n < 2 * c) {
    throw std::invalid_argument("synth_classification: require n >= 2C");
  }
  if (class_sep < 0.0) {
    throw std::invalid_argument("synth_classification: class_sep >= 0");
  }
  RngStream rng(seed, 0x64617461ull /* "data" */);
  std::vector<double> means(static_cast<std::size_t>(c) * f);
  for (double& v : means) v = class_sep * rng.normal();

  Dataset ds;
  ds.n = n;
  ds.f = f;
  ds.c = c;
  ds.features.resize(static_cast<std::size_t>(n) * f);
  ds.labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::uint32_t label = i % c;
    ds.labels[i] = static_cast<std::int32_t>(label);
    const double* mean = &means[static_cast<std::size_t>(label) * f];
    double* row = &ds.features[static_cast<std::size_t>(i) * f];
    for (std::uint32_t k = 0; k < f; ++k) row[k] = mean[k] + rng.normal();
  }
  return ds;
}

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::kIo, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at,
                        const std::string& path) {
  if (at + 4 > b.size()) {
    throw DataError(DataError::Kind::kTruncated, path + ": truncated header");
  }
  return static_cast<std::uint32_t>(b[at]) << 24 |
         static_cast<std::uint32_t>(b[at + 1]) << 16 |
         static_cast<std::uint32_t>(b[at + 2]) << 8 |
         static_cast<std::uint32_t>(b[at + 3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  auto img = read_file(images_path);
  auto lab = read_file(labels_path);

  if (read_be32(img, 0, images_path) != kIdxImagesMagic) {
    throw DataError(DataError::Kind::kBadMagic,
                    images_path + ": bad image-file magic");
  }
  if (read_be32(lab, 0, labels_path) != kIdxLabelsMagic) {
    throw DataError(DataError::Kind::kBadMagic,
                    labels_path + ": bad label-file magic");
  }
  std::uint32_t n_img = read_be32(img, 4, images_path);
  std::uint32_t rows = read_be32(img, 8, images_path);
  std::uint32_t cols = read_be32(img, 12, images_path);
  std::uint32_t n_lab = read_be32(lab, 4, labels_path);
  if (n_img != n_lab) {
    throw DataError(DataError::Kind::kCountMismatch,
                    "image count " + std::to_string(n_img) +
                        " != label count " + std::to_string(n_lab));
  }
  std::size_t pixels = static_cast<std::size_t>(n_img) * rows * cols;
  if (img.size() != 16 + pixels) {
    throw DataError(DataError::Kind::kTruncated,
                    images_path + ": expected " + std::to_string(16 + pixels) +
                        " bytes, got " + std::to_string(img.size()));
  }
  if (lab.size() != 8 + n_lab) {
    throw DataError(DataError::Kind::kTruncated,
                    labels_path + ": expected " + std::to_string(8 + n_lab) +
                        " bytes, got " + std::to_string(lab.size()));
  }

  Dataset ds;
  ds.n = n_img;
  ds.f = rows * cols;
  ds.features.resize(pixels);
  ds.labels.resize(n_img);
  for (std::size_t i = 0; i < pixels; ++i) {
    ds.features[i] = static_cast<double>(img[16 + i]) / 255.0;
  }
  std::int32_t max_label = -1;
  for (std::uint32_t i = 0; i < n_lab; ++i) {
    ds.labels[i] = static_cast<std::int32_t>(lab[8 + i]);
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.c = static_cast<std::uint32_t>(max_label + 1);
  return ds;
}

namespace {

// Move single samples from the largest clients until every client holds at
// least min_samples (or the donors run dry).
void enforce_min_samples(Partition& part, std::uint32_t min_samples) {
  if (min_samples == 0) return;
  for (;;) {
    std::size_t smallest = 0, largest = 0;
    for (std::size_t i = 0; i < part.assignments.size(); ++i) {
      if (part.assignments[i].size() < part.assignments[smallest].size()) {
        smallest = i;
      }
      if (part.assignments[i].size() > part.assignments[largest].size()) {
        largest = i;
      }
    }
    if (part.assignments[smallest].size() >= min_samples) break;
    if (part.assignments[largest].size() <= min_samples) break;
    part.assignments[smallest].push_back(part.assignments[largest].back());
    part.assignments[largest].pop_back();
  }
  for (auto& list : part.assignments) {
    std::sort(list.begin(), list.end());
  }
}

}  // namespace

Partition partition_shards(const Dataset& ds, std::uint32_t m,
                           std::uint32_t shards_per_client,
                           std::uint64_t seed, std::uint32_t min_samples) {
  if (m == 0 || shards_per_client == 0) {
    throw std::invalid_argument("partition_shards: m, shards_per_client > 0");
  }
  if (m > ds.n) {
    throw std::invalid_argument("partition_shards: more clients than samples");
  }
  std::vector<std::uint32_t> order(ds.n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (ds.labels[a] != ds.labels[b]) return ds.labels[a] < ds.labels[b];
    return a < b;
  });

  std::uint32_t total_shards = m * shards_per_client;
  std::uint32_t base = ds.n / total_shards;
  std::uint32_t extra = ds.n % total_shards;

  std::vector<std::uint32_t> shard_ids(total_shards);
  std::iota(shard_ids.begin(), shard_ids.end(), 0u);
  RngStream rng(seed, 0x7368617264ull /* "shard" */);
  for (std::uint32_t i = total_shards; i > 1; --i) {
    std::swap(shard_ids[i - 1], shard_ids[rng.below(i)]);
  }

  // Shard s covers a contiguous slice of the label-sorted order; the first
  // `extra` shards carry one extra sample.
  auto shard_begin = [&](std::uint32_t s) {
    return static_cast<std::size_t>(s) * base + std::min(s, extra);
  };

  Partition part;
  part.assignments.resize(m);
  for (std::uint32_t client = 0; client < m; ++client) {
    for (std::uint32_t j = 0; j < shards_per_client; ++j) {
      std::uint32_t s = shard_ids[client * shards_per_client + j];
      std::size_t lo = shard_begin(s), hi = shard_begin(s + 1);
      for (std::size_t t = lo; t < hi; ++t) {
        part.assignments[client].push_back(order[t]);
      }
    }
  }
  enforce_min_samples(part, min_samples);
  return part;
}

Partition partition_dirichlet(const Dataset& ds, std::uint32_t m, double beta,
                              std::uint64_t seed, std::uint32_t min_samples) {
  if (m == 0) throw std::invalid_argument("partition_dirichlet: m > 0");
  if (!(beta > 0.0)) {
    throw std::invalid_argument("partition_dirichlet: beta > 0");
  }
  if (m > ds.n) {
    throw std::invalid_argument(
        "partition_dirichlet: more clients than samples");
  }
  RngStream rng(seed, 0x646972ull /* "dir" */);
  Partition part;
  part.assignments.resize(m);

  for (std::uint32_t cls = 0; cls < ds.c; ++cls) {
    std::vector<std::uint32_t> members;
    for (std::uint32_t i = 0; i < ds.n; ++i) {
      if (ds.labels[i] == static_cast<std::int32_t>(cls)) {
        members.push_back(i);
      }
    }
    for (std::uint32_t i = static_cast<std::uint32_t>(members.size()); i > 1;
         --i) {
      std::swap(members[i - 1], members[rng.below(i)]);
    }
    std::vector<double> weights(m);
    double total = 0.0;
    for (double& w : weights) {
      w = rng.gamma(beta);
      total += w;
    }
    // Cut the shuffled class members by the cumulative proportions.
    std::size_t taken = 0;
    double cum = 0.0;
    for (std::uint32_t client = 0; client < m; ++client) {
      cum += weights[client] / total;
      std::size_t upto =
          client + 1 == m
              ? members.size()
              : std::min(members.size(),
                         static_cast<std::size_t>(
                             std::llround(cum * static_cast<double>(
                                                    members.size()))));
      for (; taken < upto; ++taken) {
        part.assignments[client].push_back(members[taken]);
      }
    }
  }
  enforce_min_samples(part, std::max(min_samples, 1u));
  return part;
}

double mean_pairwise_label_tv(const Dataset& ds, const Partition& part) {
  std::size_t m = part.assignments.size();
  std::vector<std::vector<double>> hist(m, std::vector<double>(ds.c, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::uint32_t idx : part.assignments[i]) {
      hist[i][static_cast<std::size_t>(ds.labels[idx])] += 1.0;
    }
    double total = static_cast<double>(part.assignments[i].size());
    if (total > 0) {
      for (double& h : hist[i]) h /= total;
    }
  }
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      double tv = 0.0;
      for (std::uint32_t cls = 0; cls < ds.c; ++cls) {
        tv += std::abs(hist[i][cls] - hist[j][cls]);
      }
      sum += 0.5 * tv;
      ++pairs;
    }
  }
  return pairs == 0 ? 0.0 : sum / static_cast<double>(pairs);
}

}  // namespace crsfl
