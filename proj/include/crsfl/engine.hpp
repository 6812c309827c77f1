#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "crsfl/config.hpp"
#include "crsfl/data.hpp"
#include "crsfl/metrics.hpp"
#include "crsfl/models.hpp"
#include "crsfl/privacy.hpp"
#include "crsfl/samplers.hpp"
#include "crsfl/wire.hpp"

namespace crsfl {

// Thrown when a CRS run's (epsilon, p, K, d) fails admissibility.
class CertificateRefused : public std::runtime_error {
 public:
  explicit CertificateRefused(PrivacyCertificate cert)
      : std::runtime_error("privacy certificate refused: " + cert.reason),
        cert_(std::move(cert)) {}

  const PrivacyCertificate& certificate() const { return cert_; }

 private:
  PrivacyCertificate cert_;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::uint32_t round, const std::string& why)
      : std::runtime_error("training diverged at round " +
                           std::to_string(round) + ": " + why),
        round_(round) {}

  std::uint32_t round() const { return round_; }

 private:
  std::uint32_t round_;
};

struct ClientState {
  std::uint32_t client_id = 0;
  GradientVector weights;      // local model
  GradientVector sent_total;   // running sum of transmitted updates; the
                               // server's view of this client's gradient
  GradientVector last_grad;    // previous local (pseudo-)gradient
  SamplerState sampler_state;  // topk error-feedback residual
};

struct ServerState {
  std::uint32_t round = 0;
  GradientVector global_update;     // this round's aggregated delta
  GradientVector prev_global_grad;  // reconstructed aggregate gradient,
                                    // telescoped from the deltas
};

struct ClientRoundResult {
  SparseUpdate update;
  double epoch_loss = 0.0;
};

// One client's round: apply the broadcast gradient (skipped at round 0,
// where the client adopts the initial weights it already holds), run one
// local epoch over the shard, form the update against what the server has
// already received, compress, and advance state.
//
// `applied_gradient` is the reconstructed aggregate the broadcast implies
// (delta mode: prev_global_grad + global_update; plain mode: the round's
// mean sampled gradient).
ClientRoundResult client_round(ClientState& state,
                               std::span<const double> applied_gradient,
                               bool first_round, bool delta_mode, double lr,
                               const Dataset& ds,
                               std::span<const std::uint32_t> shard,
                               std::uint32_t local_batch,
                               const SamplerConfig& sampler_cfg,
                               double laplace_scale, ModelKind model_kind,
                               std::uint32_t hidden, RngStream& rng);

// Coordinate-wise mean of the densified updates, summed in client order.
// Requires updates.size() == m > 0 and a common dim.
GradientVector fedavg_aggregate(const std::vector<SparseUpdate>& updates,
                                std::uint32_t m);

struct RunResult {
  std::vector<RoundMetrics> history;
  PrivacyCertificate certificate;  // issued == false when no CRS run
  double final_accuracy = 0.0;     // last evaluated accuracy; 0 if never
  std::uint32_t resolved_k = 0;    // after sampling_ratio resolution
  std::uint32_t model_dim = 0;
};

// Executes the full experiment described by cfg. Deterministic: the
// result is a pure function of cfg. Client rounds within a round may run
// on up to CRSFL_THREADS workers; results are bit-identical to sequential
// execution. Throws CertificateRefused or DivergenceError.
RunResult run_experiment(const ExperimentConfig& cfg);

}  // namespace crsfl
