#include "crsfl/privacy.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace crsfl {

double max_sampling_probability(double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("epsilon must be positive");
  }
  return -std::expm1(-epsilon);
}

double admissibility_ratio(std::uint64_t d, std::uint64_t k, double p) {
  if (d == 0) throw std::invalid_argument("d must be positive");
  if (k >= d) return std::numeric_limits<double>::infinity();
  return (static_cast<double>(d) / static_cast<double>(d - k)) * (1.0 - p);
}

std::uint64_t max_sampling_size(double epsilon, double p, std::uint64_t d) {
  double p_max = max_sampling_probability(epsilon);
  if (d == 0) throw std::invalid_argument("d must be positive");
  if (!(p > 0.0) || p > p_max) {
    throw std::invalid_argument("p must lie in (0, 1 - e^{-epsilon}]");
  }
  double e_neg = std::exp(-epsilon);
  double bound = static_cast<double>(d) * (1.0 - e_neg + p * e_neg);
  std::uint64_t k = static_cast<std::uint64_t>(std::floor(bound));
  if (k > d) k = d;
  // The closed form and the ratio test can disagree by one ulp near the
  // boundary; nudge so that ratio(k) <= e^eps < ratio(k + 1) exactly as
  // evaluated.
  double e_pos = std::exp(epsilon);
  while (k > 0 && admissibility_ratio(d, k, p) > e_pos) --k;
  while (k < d && admissibility_ratio(d, k + 1, p) <= e_pos) ++k;
  return k;
}

double kl_bernoulli(double a, double p) {
  if (!(a >= 0.0 && a <= 1.0)) {
    throw std::invalid_argument("kl_bernoulli: a must lie in [0, 1]");
  }
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("kl_bernoulli: p must lie in (0, 1)");
  }
  double kl = 0.0;
  if (a > 0.0) kl += a * std::log(a / p);
  if (a < 1.0) kl += (1.0 - a) * std::log((1.0 - a) / (1.0 - p));
  return kl;
}

double log_delta_bound(std::uint64_t d, std::uint64_t k, double p) {
  if (d == 0) throw std::invalid_argument("d must be positive");
  if (k > d) throw std::invalid_argument("require K <= d");
  double a = static_cast<double>(k) / static_cast<double>(d);
  return -static_cast<double>(d) * kl_bernoulli(a, p);
}

double delta_bound(std::uint64_t d, std::uint64_t k, double p) {
  return std::exp(log_delta_bound(d, k, p));
}

double binomial_tail(std::uint64_t d, double p, std::uint64_t k) {
  if (d == 0 || d > 10000) {
    throw std::invalid_argument("binomial_tail: require 1 <= d <= 10^4");
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("binomial_tail: p must lie in [0, 1]");
  }
  if (k >= d) return 0.0;
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  double log_p = std::log(p);
  double log_q = std::log1p(-p);
  double lg_d1 = std::lgamma(static_cast<double>(d) + 1.0);
  double sum = 0.0;
  for (std::uint64_t i = k + 1; i <= d; ++i) {
    double di = static_cast<double>(i);
    double log_pmf = lg_d1 - std::lgamma(di + 1.0) -
                     std::lgamma(static_cast<double>(d - i) + 1.0) +
                     di * log_p + static_cast<double>(d - i) * log_q;
    sum += std::exp(log_pmf);
  }
  return std::min(sum, 1.0);
}

PrivacyCertificate issue_certificate(double epsilon, double p,
                                     std::uint64_t k, std::uint64_t d) {
  PrivacyCertificate cert;
  cert.epsilon = epsilon;
  cert.p = p;
  cert.k = k;
  cert.d = d;

  auto refuse = [&](const std::string& why) {
    cert.issued = false;
    cert.reason = why;
    return cert;
  };

  if (!(epsilon > 0.0)) return refuse("epsilon must be positive");
  if (d == 0) return refuse("d must be positive");
  if (!(p > 0.0 && p < 1.0)) return refuse("p must lie in (0, 1)");

  double p_max = max_sampling_probability(epsilon);
  if (p > p_max) {
    std::ostringstream os;
    os << "p = " << p << " exceeds 1 - e^{-epsilon} = " << p_max;
    return refuse(os.str());
  }
  std::uint64_t k_max = max_sampling_size(epsilon, p, d);
  if (k > k_max) {
    std::ostringstream os;
    os << "K = " << k << " exceeds K_max = " << k_max;
    return refuse(os.str());
  }
  double ratio = static_cast<double>(k) / static_cast<double>(d);
  if (ratio == p) {
    return refuse("K/d equals p: the KL divergence vanishes and the "
                  "delta bound is vacuous");
  }
  cert.log_delta_bound = log_delta_bound(d, k, p);
  cert.delta_bound = std::exp(cert.log_delta_bound);
  cert.issued = true;
  // delta << 1/d is the regime where the relaxation is meaningful; outside
  // it we issue with a warning rather than refusing.
  if (cert.log_delta_bound >= -std::log(static_cast<double>(d))) {
    cert.weak_delta = true;
    cert.reason = "delta bound is not below 1/d";
  }
  return cert;
}

GradientVector laplace_perturb(const GradientVector& v, double scale,
                               RngStream& rng) {
  if (!(scale > 0.0)) {
    throw std::invalid_argument("laplace_perturb: scale must be positive");
  }
  GradientVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = v[i] + rng.laplace(scale);
  }
  return out;
}

}  // namespace crsfl
