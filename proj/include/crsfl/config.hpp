#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crsfl/models.hpp"
#include "crsfl/samplers.hpp"

namespace crsfl {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class DatasetKind { kSynth, kIdx };
enum class PartitionKind { kShards, kDirichlet };
enum class EngineMode { kDelta, kPlain };

// Whole-experiment configuration; a pure function of the config file.
struct ExperimentConfig {
  std::int64_t seed = 0;
  std::uint32_t rounds = 0;
  std::uint32_t clients = 0;

  DatasetKind dataset = DatasetKind::kSynth;
  std::uint32_t synth_n = 2000;
  std::uint32_t synth_features = 16;
  std::uint32_t synth_classes = 4;
  double synth_sep = 3.0;
  std::uint32_t synth_test_n = 1000;
  std::string idx_images, idx_labels, idx_test_images, idx_test_labels;

  PartitionKind partition = PartitionKind::kShards;
  std::uint32_t shards_per_client = 2;
  double dirichlet_beta = 0.5;
  std::uint32_t min_samples = 2;

  ModelKind model = ModelKind::kLogReg;
  std::uint32_t hidden = 32;

  SamplerKind sampler = SamplerKind::kIdentity;
  std::uint32_t k = 0;          // absolute sampling size; 0 = unset
  double sampling_ratio = 0.0;  // K/d alternative to k; 0 = unset
  double p = 0.0;               // 0 = unset (CRS defaults to its maximum)
  std::optional<double> epsilon;
  bool feedback = true;
  bool crs_fixed_p_scaling = false;
  double laplace_scale = 0.0;  // > 0 adds Laplace noise to the update

  double lr = 0.01;
  double lr_decay = 1e-4;
  std::uint32_t local_batch = 32;
  std::uint32_t eval_every = 10;
  EngineMode engine = EngineMode::kDelta;
  std::string output;

  friend bool operator==(const ExperimentConfig&,
                         const ExperimentConfig&) = default;
};

struct ConfigKeyDoc {
  std::string key;
  std::string type;
  bool required;
  std::string doc;  // includes the default for optional keys
};

// The full documented key set; parse_config accepts exactly these.
const std::vector<ConfigKeyDoc>& config_keys();

// Strict `key = value` parser; '#' starts a comment, unknown or duplicate
// keys and type mismatches are errors naming the key and line number.
ExperimentConfig parse_config_text(const std::string& text);

ExperimentConfig parse_config(const std::string& path);

// Every key rendered explicitly; parse_config_text inverts this.
std::string format_config(const ExperimentConfig& cfg);

}  // namespace crsfl
