#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "crsfl/linalg.hpp"
#include "crsfl/rng.hpp"
#include "crsfl/wire.hpp"

namespace crsfl {

enum class SamplerKind {
  kIdentity,
  kCrs,
  kMinMax,
  kGSpar,
  kTopK,
  kPoisson,
};

std::string to_string(SamplerKind kind);
std::optional<SamplerKind> sampler_kind_from_string(const std::string& name);
Codec codec_for(SamplerKind kind);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::kIdentity;
  std::uint32_t k = 0;           // sampling size (CRS/MinMax/GSpar/TopK)
  double p = 0.0;                // coordinate sampling probability (CRS/Poisson)
  bool feedback = true;          // error accumulation (TopK)
  std::optional<double> epsilon; // privacy budget, required for CRS
  // CRS estimator variant: scale selected values by the fixed p (Eq.-(6)
  // style) instead of the conditional inclusion probability. Kept for
  // comparison; the conditional estimator is the unbiased one.
  bool crs_fixed_p_scaling = false;
};

// Per-client mutable sampler state; only TopK with feedback uses it.
struct SamplerState {
  GradientVector residual;  // error-feedback accumulator, zero-initialized
};

// Throws std::invalid_argument when cfg is not usable on d-dimensional
// input. Privacy admissibility of (epsilon, p, k) is the privacy module's
// job; this only checks structural constraints.
void validate_sampler_config(const SamplerConfig& cfg, std::size_t d);

// Conditional inclusion probability of a coordinate with value g_j under
// threshold tau and probability bound p: min(1, max(0, 1 - tau/(p g_j^2))),
// and exactly 0 for g_j = 0.
double inclusion_probability(double g_j, double tau, double p);

// CRS (deterministic core): priorities T_j = alpha_j * g_j^2 from the
// supplied coefficients, top-k selection with ties to the lower index,
// tau* = (k+1)-th largest priority, selected nonzeros transmitted as
// g_j / q_j with q_j = inclusion_probability(g_j, tau*, p).
// Requires k < d and alphas.size() == g.size().
SparseUpdate crs_sample(std::span<const double> g, std::uint32_t k, double p,
                        std::span<const double> alphas,
                        bool fixed_p_scaling = false);

// CRS drawing alpha_j uniform on [0, p) from the stream.
SparseUpdate crs_sample(std::span<const double> g, const SamplerConfig& cfg,
                        RngStream& rng);

// MinMax-style priority sampling (deterministic core): T_j = g_j^2 / u_j
// with u_j in (0, 1], tau* = (k+1)-th largest priority, selected value
// g_j / min(1, g_j^2 / tau*). Requires k < d.
SparseUpdate minmax_sample(std::span<const double> g, std::uint32_t k,
                           std::span<const double> uniforms);

SparseUpdate minmax_sample(std::span<const double> g, std::uint32_t k,
                           RngStream& rng);

// Independent per-coordinate keep with probability p; kept value g_j / p.
SparseUpdate poisson_sample(std::span<const double> g, double p,
                            RngStream& rng);

// Magnitude-proportional keep probabilities normalized so that
// sum(p_j) = min(k, #nonzeros), clamped to (0, 1] by water-filling.
// Zero coordinates get probability 0.
std::vector<double> gspar_probabilities(std::span<const double> g,
                                        std::uint32_t k);

// Independent keep with per-coordinate probabilities; kept value g_j / p_j.
SparseUpdate gspar_sample(std::span<const double> g,
                          std::span<const double> probabilities,
                          RngStream& rng);

SparseUpdate gspar_sample(std::span<const double> g, std::uint32_t k,
                          RngStream& rng);

// Top-k by |h_j| where h = g + residual when feedback is on; transmitted
// values are the raw h_j (deliberately biased, no rescaling). With
// feedback the residual keeps everything that was not transmitted.
SparseUpdate topk_sample(std::span<const double> g, std::uint32_t k,
                         SamplerState& state, bool feedback);

// All nonzero coordinates, unscaled.
SparseUpdate identity_sample(std::span<const double> g);

// Dispatch on cfg.kind. `state` is used by TopK only; rng by the
// randomized samplers only.
SparseUpdate sample(std::span<const double> g, const SamplerConfig& cfg,
                    SamplerState& state, RngStream& rng);

}  // namespace crsfl
