#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>

#include "cgid/series.hpp"

namespace cgid {

inline SignalSeries white_noise(std::size_t len, double sigma, std::uint64_t seed, double sample_rate = 750.0) {
  if (!(sigma >= 0)) throw std::invalid_argument("white_noise: sigma must be nonnegative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  SignalSeries s{std::vector<double>(len), sample_rate};
  for (auto& x : s.samples) x = sigma * dist(rng);
  return s;
}

/// White noise through y[t] = y[t-1] + a (x[t] - y[t-1]), a = 1 - exp(-2 pi fc),
/// rescaled to unit standard deviation. `cutoff_fraction` is the corner
/// frequency divided by the sample rate. The filter starts from a draw of
/// its stationary distribution, so the output has no start-up transient.
inline SignalSeries lowpass_noise(std::size_t len, double cutoff_fraction, std::uint64_t seed,
                                  double sample_rate = 750.0) {
  if (!(cutoff_fraction > 0 && cutoff_fraction <= 0.5))
    throw std::invalid_argument("lowpass_noise: cutoff fraction must lie in (0, 0.5]");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  const double a = 1.0 - std::exp(-2.0 * std::numbers::pi * cutoff_fraction);
  double y = dist(rng) * std::sqrt(a / (2.0 - a));
  SignalSeries s{std::vector<double>(len), sample_rate};
  for (auto& v : s.samples) {
    y += a * (dist(rng) - y);
    v = y;
  }
  if (len < 2) return s;
  double mean = 0.0;
  for (double v : s.samples) mean += v;
  mean /= static_cast<double>(len);
  double var = 0.0;
  for (double v : s.samples) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(len));
  if (sd > 0)
    for (auto& v : s.samples) v /= sd;
  return s;
}

inline SignalSeries clip(SignalSeries s, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("clip: lower bound must be below upper bound");
  for (auto& v : s.samples) v = std::clamp(v, lo, hi);
  return s;
}

/// Slowly varying drive on [lo, hi]: centred low-pass noise whose standard
/// deviation is a quarter of the range, clipped to the range.
inline SignalSeries filament_drive(std::size_t len, std::uint64_t seed, double lo = 0.0, double hi = 1.5,
                                   double cutoff_fraction = 0.05, double sample_rate = 750.0) {
  auto s = lowpass_noise(len, cutoff_fraction, seed, sample_rate);
  const double mid = 0.5 * (lo + hi), spread = 0.25 * (hi - lo);
  for (auto& v : s.samples) v = mid + spread * v;
  return clip(std::move(s), lo, hi);
}

}  // namespace cgid
