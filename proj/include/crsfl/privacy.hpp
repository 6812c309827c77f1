#pragma once

#include <cstdint>
#include <string>

#include "crsfl/linalg.hpp"
#include "crsfl/rng.hpp"

namespace crsfl {

// Validated (epsilon, p, K, d) tuple with its relaxation-probability bound.
// `issued == false` carries the refusal reason; nothing is ever clamped.
struct PrivacyCertificate {
  double epsilon = 0.0;
  double p = 0.0;
  std::uint64_t k = 0;
  std::uint64_t d = 0;
  double delta_bound = 0.0;      // exp(-d * KL(K/d || p))
  double log_delta_bound = 0.0;  // natural log; usable when the linear
                                 // value underflows at large d
  bool issued = false;
  bool weak_delta = false;       // delta_bound >= 1/d: outside the
                                 // delta << 1/d regime, warn but issue
  std::string reason;            // empty when issued without warning
};

// Largest admissible coordinate sampling probability: 1 - e^{-epsilon}.
double max_sampling_probability(double epsilon);

// The two-sided likelihood-ratio statistic (d / (d - K)) * (1 - p); the
// sampler is admissible iff e^{-epsilon} <= ratio <= e^{epsilon}.
// Returns +infinity for K = d.
double admissibility_ratio(std::uint64_t d, std::uint64_t k, double p);

// Largest admissible sampling size: floor(d (1 - e^{-eps} + p e^{-eps})),
// adjusted by at most one so that the result and admissibility_ratio agree
// exactly in floating point. Requires 0 < p <= max_sampling_probability.
std::uint64_t max_sampling_size(double epsilon, double p, std::uint64_t d);

// KL divergence between Bernoulli(a) and Bernoulli(p), with the continuous
// extension 0 ln 0 = 0 at a in {0, 1}. Requires p in (0, 1).
double kl_bernoulli(double a, double p);

// log of the relaxation-probability bound: -d * KL(K/d || p).
double log_delta_bound(std::uint64_t d, std::uint64_t k, double p);

double delta_bound(std::uint64_t d, std::uint64_t k, double p);

// Exact upper binomial tail Pr[B(d, p) > K], summed in log space.
// Intended for d <= 10^4.
double binomial_tail(std::uint64_t d, double p, std::uint64_t k);

// Full admissibility check; never throws on inadmissible inputs, returns a
// refusal with the failed condition spelled out instead.
PrivacyCertificate issue_certificate(double epsilon, double p,
                                     std::uint64_t k, std::uint64_t d);

// Adds i.i.d. Laplace(0, scale) noise per coordinate. scale > 0.
GradientVector laplace_perturb(const GradientVector& v, double scale,
                               RngStream& rng);

}  // namespace crsfl
