// Copyright 2026 The expaware Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Geometric Brownian motion: dX = mu X dt + sigma X dW. log X_t is normal
// with mean log(x0) + (mu - sigma^2/2) t and variance sigma^2 t.

#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "expaware/common.hpp"

namespace expaware {

struct GbmParams {
  double mu = 0.125;   // drift per year
  double sigma = 0.5;  // volatility per sqrt(year)
  double s0 = 1.0;     // starting experience

  /// Neutral-drift prior: mu = sigma^2/2 keeps the median path at s0.
  static GbmParams initial(double sigma = 0.5, double s0 = 1.0) {
    return {sigma * sigma / 2.0, sigma, s0};
  }

  bool valid() const {
    return std::isfinite(mu) && std::isfinite(sigma) && std::isfinite(s0) && sigma >= 0.0 && s0 > 0.0;
  }

  bool operator==(const GbmParams&) const = default;
};

struct LogNormalSpec {
  double location = 0.0;
  double scale = 1.0;

  /// Marginal of the GBM at time t (years). sigma is clamped to kSigmaMin.
  static LogNormalSpec at(const GbmParams& p, double t) {
    const double sigma = std::max(p.sigma, kSigmaMin);
    return {(p.mu - sigma * sigma / 2.0) * t + std::log(p.s0), sigma * std::sqrt(t)};
  }
};

inline double lognormal_pdf(double x, const LogNormalSpec& spec) {
  if (!(x > 0.0)) throw DomainError("lognormal_pdf: x must be positive");
  const double scale = std::max(spec.scale, std::sqrt(kEpsVar));
  const double z = std::log(x) - spec.location;
  return std::exp(-z * z / (2.0 * scale * scale)) / (std::sqrt(2.0 * std::numbers::pi) * scale * x);
}

inline double lognormal_cdf(double x, const LogNormalSpec& spec) {
  if (x <= 0.0) return 0.0;
  const double scale = std::max(spec.scale, std::sqrt(kEpsVar));
  return 0.5 * std::erfc(-(std::log(x) - spec.location) / (scale * std::numbers::sqrt2));
}

/// Draws the experience at fine time t from the user's GBM marginal.
inline double sample_experience(const GbmParams& params, double t_fine, Rng& rng) {
  const auto spec = LogNormalSpec::at(params, std::max(t_fine, kEpsTime));
  return std::exp(spec.location + spec.scale * standard_normal(rng));
}

/// Exact GBM path at ascending times (first >= eps_t), starting from s0 at
/// t = 0. Each step multiplies by exp((mu - sigma^2/2) h + sigma sqrt(h) N).
inline std::vector<double> simulate_gbm_path(const GbmParams& params, std::span<const double> times,
                                             Rng& rng) {
  std::vector<double> out;
  out.reserve(times.size());
  double prev_t = 0.0;
  double x = params.s0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (i > 0 && !(times[i] > times[i - 1]))
      throw ArgumentError("simulate_gbm_path: times must be strictly ascending");
    const double h = times[i] - prev_t;
    if (h < 0.0) throw ArgumentError("simulate_gbm_path: negative time");
    x *= std::exp((params.mu - params.sigma * params.sigma / 2.0) * h +
                  params.sigma * std::sqrt(h) * standard_normal(rng));
    out.push_back(x);
    prev_t = times[i];
  }
  return out;
}

struct GbmEstimate {
  double mu = 0.0;
  double sigma = kSigmaMin;
};

/// Sample-moment MLE treating each log e_t as a draw at horizon `delta`:
///   m = mean(log e), s^2 = unbiased variance, sigma = s / sqrt(delta),
///   mu = (m - log s0) / delta + s^2 / (2 delta).
/// Returns nullopt with fewer than two points (caller keeps its params).
inline std::optional<GbmEstimate> estimate_gbm_params(std::span<const double> experiences, double s0,
                                                      double delta) {
  if (experiences.size() < 2) return std::nullopt;
  require(s0 > 0.0 && delta > 0.0, "estimate_gbm_params: s0 and delta must be positive");
  double m = 0.0;
  for (double e : experiences) {
    if (!(e > 0.0)) throw DomainError("estimate_gbm_params: experiences must be positive");
    m += std::log(e);
  }
  m /= static_cast<double>(experiences.size());
  double ss = 0.0;
  for (double e : experiences) ss += (std::log(e) - m) * (std::log(e) - m);
  const double s2 = ss / static_cast<double>(experiences.size() - 1);
  GbmEstimate est;
  est.sigma = std::max(std::sqrt(s2 / delta), kSigmaMin);
  est.mu = (m - std::log(s0)) / delta + s2 / (2.0 * delta);
  return est;
}

/// MLE from a single observed path: log-increments x_i over gaps h_i are
/// N((mu - sigma^2/2) h_i, sigma^2 h_i). The first increment is taken from
/// s0 at t = 0. With equal gaps this is estimate_gbm_params applied to the
/// ratios e_i / e_{i-1}. Returns nullopt with fewer than two points.
inline std::optional<GbmEstimate> estimate_gbm_params_from_path(std::span<const double> times,
                                                                std::span<const double> experiences,
                                                                double s0) {
  require(times.size() == experiences.size(), "estimate_gbm_params_from_path: length mismatch");
  const std::size_t n = experiences.size();
  if (n < 2) return std::nullopt;
  std::vector<double> x(n), h(n);
  double prev_t = 0.0, prev_log = std::log(s0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(experiences[i] > 0.0)) throw DomainError("experiences must be positive");
    h[i] = std::max(times[i] - prev_t, kEpsTime);
    const double l = std::log(experiences[i]);
    x[i] = l - prev_log;
    prev_t = times[i];
    prev_log = l;
  }
  double sx = 0.0, sh = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sh += h[i];
  }
  const double drift = sx / sh;  // mu - sigma^2/2
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = x[i] - drift * h[i];
    ss += r * r / h[i];
  }
  const double var = ss / static_cast<double>(n - 1);
  GbmEstimate est;
  est.sigma = std::max(std::sqrt(var), kSigmaMin);
  est.mu = drift + var / 2.0;
  return est;
}

}  // namespace expaware
