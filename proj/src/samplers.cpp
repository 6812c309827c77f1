#include "crsfl/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace crsfl {

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::kIdentity: return "identity";
    case SamplerKind::kCrs: return "crs";
    case SamplerKind::kMinMax: return "minmax";
    case SamplerKind::kGSpar: return "gspar";
    case SamplerKind::kTopK: return "topk";
    case SamplerKind::kPoisson: return "poisson";
  }
  return "?";
}

std::optional<SamplerKind> sampler_kind_from_string(const std::string& name) {
  if (name == "identity") return SamplerKind::kIdentity;
  if (name == "crs") return SamplerKind::kCrs;
  if (name == "minmax") return SamplerKind::kMinMax;
  if (name == "gspar") return SamplerKind::kGSpar;
  if (name == "topk") return SamplerKind::kTopK;
  if (name == "poisson") return SamplerKind::kPoisson;
  return std::nullopt;
}

Codec codec_for(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::kIdentity: return Codec::kIdentity;
    case SamplerKind::kCrs: return Codec::kCrs;
    case SamplerKind::kMinMax: return Codec::kMinMax;
    case SamplerKind::kGSpar: return Codec::kGSpar;
    case SamplerKind::kTopK: return Codec::kTopK;
    case SamplerKind::kPoisson: return Codec::kPoisson;
  }
  return Codec::kIdentity;
}

void validate_sampler_config(const SamplerConfig& cfg, std::size_t d) {
  if (d == 0) throw std::invalid_argument("sampler: empty vector");
  switch (cfg.kind) {
    case SamplerKind::kIdentity:
      return;
    case SamplerKind::kCrs:
      if (!cfg.epsilon || *cfg.epsilon <= 0) {
        throw std::invalid_argument("crs: epsilon required and positive");
      }
      [[fallthrough]];
    case SamplerKind::kMinMax:
      if (cfg.k == 0 || cfg.k >= d) {
        // The (k+1)-th priority must exist; k = d is the identity sampler's
        // job.
        throw std::invalid_argument(to_string(cfg.kind) +
                                    ": require 1 <= k < d");
      }
      if (cfg.kind == SamplerKind::kCrs && (cfg.p <= 0 || cfg.p > 1)) {
        throw std::invalid_argument("crs: require p in (0, 1]");
      }
      return;
    case SamplerKind::kGSpar:
    case SamplerKind::kTopK:
      if (cfg.k == 0 || cfg.k > d) {
        throw std::invalid_argument(to_string(cfg.kind) +
                                    ": require 1 <= k <= d");
      }
      return;
    case SamplerKind::kPoisson:
      if (cfg.p <= 0 || cfg.p > 1) {
        throw std::invalid_argument("poisson: require p in (0, 1]");
      }
      return;
  }
}

namespace {

void require_finite(std::span<const double> g) {
  if (!all_finite(g)) {
    throw std::invalid_argument("sampler: non-finite gradient coordinate");
  }
}

// Indices of the k largest priorities (ties to the lower index) plus the
// (k+1)-th largest priority value. Requires k < priorities.size().
struct TopKSelection {
  std::vector<std::uint32_t> indices;  // ascending
  double next_priority;                // tau*, the (k+1)-th largest
};

TopKSelection select_top_k(std::span<const double> priorities,
                           std::uint32_t k) {
  std::size_t d = priorities.size();
  std::vector<std::uint32_t> order(d);
  std::iota(order.begin(), order.end(), 0u);
  auto higher = [&](std::uint32_t a, std::uint32_t b) {
    if (priorities[a] != priorities[b]) return priorities[a] > priorities[b];
    return a < b;
  };
  std::nth_element(order.begin(), order.begin() + k, order.end(), higher);
  TopKSelection sel;
  sel.next_priority = priorities[order[k]];
  sel.indices.assign(order.begin(), order.begin() + k);
  std::sort(sel.indices.begin(), sel.indices.end());
  return sel;
}

}  // namespace

double inclusion_probability(double g_j, double tau, double p) {
  if (g_j == 0.0) return 0.0;
  double q = 1.0 - tau / (p * g_j * g_j);
  return std::min(1.0, std::max(0.0, q));
}

SparseUpdate crs_sample(std::span<const double> g, std::uint32_t k, double p,
                        std::span<const double> alphas,
                        bool fixed_p_scaling) {
  require_finite(g);
  if (k == 0 || k >= g.size()) {
    throw std::invalid_argument("crs: require 1 <= k < d");
  }
  if (alphas.size() != g.size()) {
    throw std::invalid_argument("crs: coefficient count mismatch");
  }
  std::vector<double> priorities(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    priorities[j] = alphas[j] * g[j] * g[j];
  }
  TopKSelection sel = select_top_k(priorities, k);
  double tau = sel.next_priority;

  SparseUpdate out;
  out.dim = static_cast<std::uint32_t>(g.size());
  out.threshold = tau;
  out.codec = Codec::kCrs;
  for (std::uint32_t j : sel.indices) {
    if (g[j] == 0.0) continue;
    double value;
    if (fixed_p_scaling) {
      value = g[j] / p;
    } else {
      double q = inclusion_probability(g[j], tau, p);
      if (q <= 0.0) {
        // A selected coordinate has priority >= tau, so q > 0 must hold;
        // hitting this means the priority/threshold relation is broken.
        throw std::logic_error("crs: selected coordinate with zero "
                               "inclusion probability");
      }
      value = g[j] / q;
    }
    out.entries.push_back({j, value});
  }
  return out;
}

SparseUpdate crs_sample(std::span<const double> g, const SamplerConfig& cfg,
                        RngStream& rng) {
  validate_sampler_config(cfg, g.size());
  std::vector<double> alphas(g.size());
  for (double& a : alphas) a = rng.uniform(0.0, cfg.p);
  return crs_sample(g, cfg.k, cfg.p, alphas, cfg.crs_fixed_p_scaling);
}

SparseUpdate minmax_sample(std::span<const double> g, std::uint32_t k,
                           std::span<const double> uniforms) {
  require_finite(g);
  if (k == 0 || k >= g.size()) {
    throw std::invalid_argument("minmax: require 1 <= k < d");
  }
  if (uniforms.size() != g.size()) {
    throw std::invalid_argument("minmax: uniform count mismatch");
  }
  std::vector<double> priorities(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (uniforms[j] <= 0 || uniforms[j] > 1) {
      throw std::invalid_argument("minmax: uniforms must lie in (0, 1]");
    }
    priorities[j] = g[j] * g[j] / uniforms[j];
  }
  TopKSelection sel = select_top_k(priorities, k);
  double tau = sel.next_priority;

  SparseUpdate out;
  out.dim = static_cast<std::uint32_t>(g.size());
  out.threshold = tau;
  out.codec = Codec::kMinMax;
  for (std::uint32_t j : sel.indices) {
    if (g[j] == 0.0) continue;
    double q = tau <= 0.0 ? 1.0 : std::min(1.0, g[j] * g[j] / tau);
    out.entries.push_back({j, g[j] / q});
  }
  return out;
}

SparseUpdate minmax_sample(std::span<const double> g, std::uint32_t k,
                           RngStream& rng) {
  std::vector<double> uniforms(g.size());
  for (double& u : uniforms) u = rng.uniform_pos();
  return minmax_sample(g, k, uniforms);
}

SparseUpdate poisson_sample(std::span<const double> g, double p,
                            RngStream& rng) {
  require_finite(g);
  if (p <= 0 || p > 1) {
    throw std::invalid_argument("poisson: require p in (0, 1]");
  }
  SparseUpdate out;
  out.dim = static_cast<std::uint32_t>(g.size());
  out.codec = Codec::kPoisson;
  for (std::size_t j = 0; j < g.size(); ++j) {
    bool keep = rng.uniform() < p;
    if (keep && g[j] != 0.0) {
      out.entries.push_back({static_cast<std::uint32_t>(j), g[j] / p});
    }
  }
  return out;
}

std::vector<double> gspar_probabilities(std::span<const double> g,
                                        std::uint32_t k) {
  require_finite(g);
  if (k == 0 || k > g.size()) {
    throw std::invalid_argument("gspar: require 1 <= k <= d");
  }
  std::vector<double> probs(g.size(), 0.0);
  // Water-filling: probabilities proportional to |g_j|, capped at 1, with
  // the remaining budget re-spread over the uncapped coordinates until the
  // expected count reaches min(k, #nonzeros).
  std::vector<std::uint32_t> active;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (g[j] != 0.0) active.push_back(static_cast<std::uint32_t>(j));
  }
  double budget = static_cast<double>(k);
  for (;;) {
    if (active.empty()) break;
    if (budget >= static_cast<double>(active.size())) {
      for (std::uint32_t j : active) probs[j] = 1.0;
      break;
    }
    double mass = 0.0;
    for (std::uint32_t j : active) mass += std::abs(g[j]);
    bool clamped = false;
    std::vector<std::uint32_t> still_active;
    for (std::uint32_t j : active) {
      double pj = budget * std::abs(g[j]) / mass;
      if (pj >= 1.0) {
        probs[j] = 1.0;
        budget -= 1.0;
        clamped = true;
      } else {
        still_active.push_back(j);
      }
    }
    if (!clamped) {
      for (std::uint32_t j : still_active) {
        probs[j] = budget * std::abs(g[j]) / mass;
      }
      break;
    }
    active = std::move(still_active);
  }
  return probs;
}

SparseUpdate gspar_sample(std::span<const double> g,
                          std::span<const double> probabilities,
                          RngStream& rng) {
  require_finite(g);
  if (probabilities.size() != g.size()) {
    throw std::invalid_argument("gspar: probability count mismatch");
  }
  SparseUpdate out;
  out.dim = static_cast<std::uint32_t>(g.size());
  out.codec = Codec::kGSpar;
  for (std::size_t j = 0; j < g.size(); ++j) {
    double pj = probabilities[j];
    if (pj <= 0.0) continue;
    if (pj > 1.0) throw std::invalid_argument("gspar: probability > 1");
    bool keep = rng.uniform() < pj;
    if (keep && g[j] != 0.0) {
      out.entries.push_back({static_cast<std::uint32_t>(j), g[j] / pj});
    }
  }
  return out;
}

SparseUpdate gspar_sample(std::span<const double> g, std::uint32_t k,
                          RngStream& rng) {
  return gspar_sample(g, gspar_probabilities(g, k), rng);
}

SparseUpdate topk_sample(std::span<const double> g, std::uint32_t k,
                         SamplerState& state, bool feedback) {
  require_finite(g);
  if (k == 0 || k > g.size()) {
    throw std::invalid_argument("topk: require 1 <= k <= d");
  }
  GradientVector h(g.begin(), g.end());
  if (feedback) {
    if (state.residual.empty()) state.residual.assign(g.size(), 0.0);
    add_inplace(h, state.residual);
  }
  std::vector<double> magnitudes(h.size());
  for (std::size_t j = 0; j < h.size(); ++j) magnitudes[j] = std::abs(h[j]);

  std::vector<std::uint32_t> selected;
  if (k == h.size()) {
    selected.resize(k);
    std::iota(selected.begin(), selected.end(), 0u);
  } else {
    selected = select_top_k(magnitudes, k).indices;
  }

  SparseUpdate out;
  out.dim = static_cast<std::uint32_t>(g.size());
  out.codec = Codec::kTopK;
  for (std::uint32_t j : selected) {
    if (h[j] != 0.0) out.entries.push_back({j, h[j]});
  }
  if (feedback) {
    state.residual = std::move(h);
    for (std::uint32_t j : selected) state.residual[j] = 0.0;
  }
  return out;
}

SparseUpdate identity_sample(std::span<const double> g) {
  require_finite(g);
  SparseUpdate out;
  out.dim = static_cast<std::uint32_t>(g.size());
  out.codec = Codec::kIdentity;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (g[j] != 0.0) out.entries.push_back({static_cast<std::uint32_t>(j), g[j]});
  }
  return out;
}

SparseUpdate sample(std::span<const double> g, const SamplerConfig& cfg,
                    SamplerState& state, RngStream& rng) {
  validate_sampler_config(cfg, g.size());
  switch (cfg.kind) {
    case SamplerKind::kIdentity: return identity_sample(g);
    case SamplerKind::kCrs: return crs_sample(g, cfg, rng);
    case SamplerKind::kMinMax: return minmax_sample(g, cfg.k, rng);
    case SamplerKind::kGSpar: return gspar_sample(g, cfg.k, rng);
    case SamplerKind::kTopK: return topk_sample(g, cfg.k, state, cfg.feedback);
    case SamplerKind::kPoisson: return poisson_sample(g, cfg.p, rng);
  }
  throw std::logic_error("sample: unknown sampler kind");
}

}  // namespace crsfl
