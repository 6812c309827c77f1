#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "crsfl/data.hpp"
#include "crsfl/linalg.hpp"
#include "crsfl/rng.hpp"

namespace crsfl {

enum class ModelKind { kLogReg, kMlp1 };

std::string to_string(ModelKind kind);
std::optional<ModelKind> model_kind_from_string(const std::string& name);

// Flattened desk-scale classifier. LogReg layout: W[f][C] then b[C].
// MLP1 layout: W1[f][h], b1[h], W2[h][C], b2[C]; tanh hidden activation.
struct Model {
  ModelKind kind = ModelKind::kLogReg;
  GradientVector weights;
  std::uint32_t f = 0;
  std::uint32_t h = 0;  // hidden width, MLP1 only
  std::uint32_t c = 0;

  std::size_t dim() const { return weights.size(); }
};

std::size_t model_dim(ModelKind kind, std::uint32_t f, std::uint32_t h,
                      std::uint32_t c);

// Seeded per-layer uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
Model init_model(ModelKind kind, std::uint32_t f, std::uint32_t h,
                 std::uint32_t c, RngStream& rng);

// Class scores for one sample.
void logits(const Model& model, std::span<const double> x,
            std::span<double> out);

// Mean softmax cross-entropy and its hand-derived gradient over the given
// sample indices. Throws on an empty batch or non-finite activations.
std::pair<double, GradientVector> loss_and_grad(
    const Model& model, const Dataset& ds, std::span<const std::uint32_t> idx);

}  // namespace crsfl
