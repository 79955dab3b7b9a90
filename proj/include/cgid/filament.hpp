#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "cgid/series.hpp"

namespace cgid {

/// Nondimensional filament constants. `time_scale` converts seconds to model
/// time units; with the defaults the thermal time constant is a few tens of
/// samples at 750 Hz, well inside a 128-sample memory.
struct FilamentParams {
  double k1 = 1.0;
  double k2 = 0.3;
  double k3 = 0.1;
  double k4 = 1.0;
  double R0 = 1.0;
  double alpha_R = 1.0;
  double time_scale = 50.0;
  std::optional<double> T_init;  // equilibrium at V = 0.75 when unset

  void validate() const {
    for (auto [name, v] : {std::pair{"k1", k1}, {"k2", k2}, {"k3", k3}, {"k4", k4}, {"R0", R0},
                           {"alpha_R", alpha_R}, {"time_scale", time_scale}})
      if (!(v > 0) || !std::isfinite(v))
        throw std::invalid_argument(std::string("filament parameter ") + name + " must be positive and finite");
    if (T_init && (!(*T_init >= 0) || !std::isfinite(*T_init)))
      throw std::invalid_argument("filament T_init must be nonnegative and finite");
  }
};

inline double resistance(double T, const FilamentParams& p) { return p.R0 * (1.0 + p.alpha_R * T); }

/// dT/dt = k1 V^2 / R(T) - k2 T^2 - k3 T^4, in model time units.
inline double d_temperature(double T, double V, const FilamentParams& p) {
  if (!(T >= 0)) throw std::domain_error("d_temperature: temperature must be nonnegative");
  const double T2 = T * T;
  return p.k1 * V * V / resistance(T, p) - p.k2 * T2 - p.k3 * T2 * T2;
}

/// Unique nonnegative T with d_temperature(T, V) = 0, by bisection.
inline double equilibrium_temperature(double V, const FilamentParams& p) {
  if (V == 0.0) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (d_temperature(hi, V, p) > 0) hi *= 2;
  for (int i = 0; i < 200 && hi - lo > 0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (d_temperature(mid, V, p) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double initial_temperature(const FilamentParams& p) {
  return p.T_init ? *p.T_init : equilibrium_temperature(0.75, p);
}

struct FilamentTrace {
  SignalSeries temperature;
  SignalSeries luminosity;
  std::size_t clamp_count = 0;  // RK4 stage or step states raised to zero
};

/// RK4 with `substeps` steps per sample and V held for the whole sample
/// interval. temperature[t] is the state at the end of interval t and
/// luminosity[t] = k4 temperature[t]^4.
inline FilamentTrace simulate_filament(const SignalSeries& V, const FilamentParams& p, int substeps = 8) {
  p.validate();
  if (substeps < 1) throw std::invalid_argument("simulate: substeps must be at least 1");
  if (!(V.sample_rate > 0)) throw std::invalid_argument("simulate: sample rate must be positive");
  require_finite(V, "simulate input");

  FilamentTrace out{{std::vector<double>(V.size()), V.sample_rate}, {std::vector<double>(V.size()), V.sample_rate}, 0};
  const double h = p.time_scale / V.sample_rate / substeps;
  auto nonneg = [&](double T) {
    if (T < 0) {
      ++out.clamp_count;
      return 0.0;
    }
    return T;
  };
  double T = initial_temperature(p);
  for (std::size_t t = 0; t < V.size(); ++t) {
    const double v = V.samples[t];
    for (int s = 0; s < substeps; ++s) {
      const double a = d_temperature(T, v, p);
      const double b = d_temperature(nonneg(T + 0.5 * h * a), v, p);
      const double c = d_temperature(nonneg(T + 0.5 * h * b), v, p);
      const double d = d_temperature(nonneg(T + h * c), v, p);
      T = nonneg(T + h / 6.0 * (a + 2 * b + 2 * c + d));
    }
    if (!std::isfinite(T)) throw std::runtime_error("simulate: non-finite temperature at sample " + std::to_string(t));
    out.temperature.samples[t] = T;
    const double T2 = T * T;
    out.luminosity.samples[t] = p.k4 * T2 * T2;
  }
  return out;
}

}  // namespace cgid
