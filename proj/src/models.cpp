#include "crsfl/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crsfl {

std::string to_string(ModelKind kind) {
  return kind == ModelKind::kLogReg ? "logreg" : "mlp1";
}

std::optional<ModelKind> model_kind_from_string(const std::string& name) {
  if (name == "logreg") return ModelKind::kLogReg;
  if (name == "mlp1") return ModelKind::kMlp1;
  return std::nullopt;
}

std::size_t model_dim(ModelKind kind, std::uint32_t f, std::uint32_t h,
                      std::uint32_t c) {
  if (kind == ModelKind::kLogReg) {
    return static_cast<std::size_t>(f) * c + c;
  }
  return static_cast<std::size_t>(f) * h + h +
         static_cast<std::size_t>(h) * c + c;
}

Model init_model(ModelKind kind, std::uint32_t f, std::uint32_t h,
                 std::uint32_t c, RngStream& rng) {
  if (f == 0 || c == 0 || (kind == ModelKind::kMlp1 && h == 0)) {
    throw std::invalid_argument("init_model: zero layer width");
  }
  Model m;
  m.kind = kind;
  m.f = f;
  m.h = kind == ModelKind::kMlp1 ? h : 0;
  m.c = c;
  m.weights.resize(model_dim(kind, f, h, c));

  auto fill = [&](std::size_t lo, std::size_t hi, std::uint32_t fan_in) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = lo; i < hi; ++i) {
      m.weights[i] = rng.uniform(-bound, bound);
    }
  };
  if (kind == ModelKind::kLogReg) {
    fill(0, m.weights.size(), f);
  } else {
    std::size_t w1 = static_cast<std::size_t>(f) * h;
    fill(0, w1 + h, f);
    fill(w1 + h, m.weights.size(), h);
  }
  return m;
}

namespace {

// logits -> stable log-softmax denominator; returns max logit and
// log(sum exp(z - max)).
std::pair<double, double> log_sum_exp(std::span<const double> z) {
  double zmax = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - zmax);
  return {zmax, std::log(s)};
}

}  // namespace

void logits(const Model& model, std::span<const double> x,
            std::span<double> out) {
  const std::uint32_t f = model.f, c = model.c;
  if (x.size() != f || out.size() != c) {
    throw std::invalid_argument("logits: dimension mismatch");
  }
  const double* w = model.weights.data();
  if (model.kind == ModelKind::kLogReg) {
    const double* bias = w + static_cast<std::size_t>(f) * c;
    for (std::uint32_t j = 0; j < c; ++j) out[j] = bias[j];
    for (std::uint32_t k = 0; k < f; ++k) {
      const double xk = x[k];
      const double* row = w + static_cast<std::size_t>(k) * c;
      for (std::uint32_t j = 0; j < c; ++j) out[j] += xk * row[j];
    }
    return;
  }
  const std::uint32_t h = model.h;
  const double* w1 = w;
  const double* b1 = w + static_cast<std::size_t>(f) * h;
  const double* w2 = b1 + h;
  const double* b2 = w2 + static_cast<std::size_t>(h) * c;
  std::vector<double> hidden(h);
  for (std::uint32_t j = 0; j < h; ++j) hidden[j] = b1[j];
  for (std::uint32_t k = 0; k < f; ++k) {
    const double xk = x[k];
    const double* row = w1 + static_cast<std::size_t>(k) * h;
    for (std::uint32_t j = 0; j < h; ++j) hidden[j] += xk * row[j];
  }
  for (std::uint32_t j = 0; j < h; ++j) hidden[j] = std::tanh(hidden[j]);
  for (std::uint32_t j = 0; j < c; ++j) out[j] = b2[j];
  for (std::uint32_t k = 0; k < h; ++k) {
    const double ak = hidden[k];
    const double* row = w2 + static_cast<std::size_t>(k) * c;
    for (std::uint32_t j = 0; j < c; ++j) out[j] += ak * row[j];
  }
}

std::pair<double, GradientVector> loss_and_grad(
    const Model& model, const Dataset& ds,
    std::span<const std::uint32_t> idx) {
  if (idx.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  if (ds.f != model.f || ds.c > model.c) {
    throw std::invalid_argument("loss_and_grad: dataset/model mismatch");
  }
  const std::uint32_t f = model.f, c = model.c, h = model.h;
  const double inv_b = 1.0 / static_cast<double>(idx.size());
  double loss = 0.0;
  GradientVector grad(model.weights.size(), 0.0);

  std::vector<double> z(c), prob(c), hidden, pre;
  if (model.kind == ModelKind::kMlp1) {
    hidden.resize(h);
    pre.resize(h);
  }

  const double* w = model.weights.data();
  for (std::uint32_t i : idx) {
    std::span<const double> x = ds.row(i);
    std::int32_t y = ds.labels[i];

    if (model.kind == ModelKind::kLogReg) {
      logits(model, x, z);
    } else {
      const double* w1 = w;
      const double* b1 = w + static_cast<std::size_t>(f) * h;
      const double* w2 = b1 + h;
      const double* b2 = w2 + static_cast<std::size_t>(h) * c;
      for (std::uint32_t j = 0; j < h; ++j) pre[j] = b1[j];
      for (std::uint32_t k = 0; k < f; ++k) {
        const double xk = x[k];
        const double* row = w1 + static_cast<std::size_t>(k) * h;
        for (std::uint32_t j = 0; j < h; ++j) pre[j] += xk * row[j];
      }
      for (std::uint32_t j = 0; j < h; ++j) hidden[j] = std::tanh(pre[j]);
      for (std::uint32_t j = 0; j < c; ++j) z[j] = b2[j];
      for (std::uint32_t k = 0; k < h; ++k) {
        const double ak = hidden[k];
        const double* row = w2 + static_cast<std::size_t>(k) * c;
        for (std::uint32_t j = 0; j < c; ++j) z[j] += ak * row[j];
      }
    }

    auto [zmax, lse] = log_sum_exp(z);
    if (!std::isfinite(zmax) || !std::isfinite(lse)) {
      throw std::runtime_error("loss_and_grad: non-finite activations");
    }
    loss += -(z[y] - zmax - lse) * inv_b;
    for (std::uint32_t j = 0; j < c; ++j) {
      prob[j] = std::exp(z[j] - zmax - lse);
    }
    prob[y] -= 1.0;  // dL/dz, up to the 1/B factor

    if (model.kind == ModelKind::kLogReg) {
      double* gw = grad.data();
      double* gb = gw + static_cast<std::size_t>(f) * c;
      for (std::uint32_t k = 0; k < f; ++k) {
        const double xk = x[k] * inv_b;
        double* row = gw + static_cast<std::size_t>(k) * c;
        for (std::uint32_t j = 0; j < c; ++j) row[j] += xk * prob[j];
      }
      for (std::uint32_t j = 0; j < c; ++j) gb[j] += prob[j] * inv_b;
    } else {
      const double* w2 = w + static_cast<std::size_t>(f) * h + h;
      double* gw1 = grad.data();
      double* gb1 = gw1 + static_cast<std::size_t>(f) * h;
      double* gw2 = gb1 + h;
      double* gb2 = gw2 + static_cast<std::size_t>(h) * c;

      for (std::uint32_t k = 0; k < h; ++k) {
        const double ak = hidden[k] * inv_b;
        double* row = gw2 + static_cast<std::size_t>(k) * c;
        for (std::uint32_t j = 0; j < c; ++j) row[j] += ak * prob[j];
      }
      for (std::uint32_t j = 0; j < c; ++j) gb2[j] += prob[j] * inv_b;

      for (std::uint32_t k = 0; k < h; ++k) {
        const double* row = w2 + static_cast<std::size_t>(k) * c;
        double back = 0.0;
        for (std::uint32_t j = 0; j < c; ++j) back += row[j] * prob[j];
        // tanh'(pre) = 1 - tanh(pre)^2
        double dh = back * (1.0 - hidden[k] * hidden[k]) * inv_b;
        for (std::uint32_t kk = 0; kk < f; ++kk) {
          gw1[static_cast<std::size_t>(kk) * h + k] += x[kk] * dh;
        }
        gb1[k] += dh;
      }
    }
  }
  if (!std::isfinite(loss)) {
    throw std::runtime_error("loss_and_grad: non-finite loss");
  }
  return {loss, std::move(grad)};
}

}  // namespace crsfl
