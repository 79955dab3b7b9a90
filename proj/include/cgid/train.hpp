#pragma once

#include <optional>
#include <random>
#include <string>

#include "cgid/optim.hpp"
#include "cgid/volterra.hpp"

namespace cgid {

namespace detail {

inline void fill_factors(std::span<double> theta, const std::vector<LayoutSegment>& layout, std::uint64_t seed,
                         double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (const auto& seg : layout) {
    if (seg.label.find(".block") == std::string::npos) continue;
    for (std::size_t i = 0; i < seg.size; ++i) theta[seg.offset + i] = dist(rng);
  }
}

}  // namespace detail

/// Starting point for training: zeros, except hierarchical off-diagonal
/// factors which are drawn uniformly from [-scale, scale]. A product of
/// all-zero factors has zero gradient, so those cannot start at zero.
inline ParamVector initial_params(const ModelSpec& spec, std::uint64_t seed, double scale = 1e-3) {
  ParamVector theta(spec.param_count(), 0.0);
  detail::fill_factors(theta, model_layout(spec), seed, scale);
  return theta;
}

/// The same rule for a single kernel.
inline ParamVector initial_kernel_params(const KernelSpec& spec, std::uint64_t seed, double scale = 1e-3) {
  ParamVector theta(param_count(spec), 0.0);
  detail::fill_factors(theta, param_layout(spec), seed, scale);
  return theta;
}

struct FitResult {
  VolterraModel model;
  TrainResult training;
  std::optional<double> heldout_vaf;
};

/// Fits a model of shape `spec` to `data` with full-batch Adam, starting
/// from initial_params(spec, config.seed).
inline FitResult fit(const ModelSpec& spec, const Dataset& data, const TrainConfig& config,
                     const Dataset* heldout = nullptr) {
  spec.validate();
  const Design design = make_design(data, spec.memory);
  std::optional<Design> held;
  if (heldout) held = make_design(*heldout, spec.memory);

  Objective objective = [&](std::span<const double> p, std::span<double> g) {
    return loss_and_grad(unflatten_model(p, spec), design, config.l2, g);
  };
  HeldoutScore score;
  if (held) {
    score = [&](std::span<const double> p) {
      const Eigen::VectorXd pred = predict_windows(unflatten_model(p, spec), held->windows);
      return vaf(std::span<const double>(held->target.data(), static_cast<std::size_t>(held->target.size())),
                 std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())));
    };
  }
  FitResult out{{}, minimize(objective, initial_params(spec, config.seed), config, score), std::nullopt};
  out.model = unflatten_model(out.training.params, spec);
  if (score) out.heldout_vaf = score(out.training.params);
  return out;
}

}  // namespace cgid
