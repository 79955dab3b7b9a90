#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgid/series.hpp"

namespace cgid {

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t epochs = 50000;
  double l2 = 0.0;
  std::uint64_t seed = 0;
  // Stop once the loss changed by less than `tolerance` (relative) over the
  // last `patience` epochs.
  double tolerance = 1e-9;
  std::size_t patience = 100;
  // Held-out evaluation period for the history, in epochs.
  std::size_t heldout_every = 100;

  void validate() const {
    if (!(lr > 0)) throw std::invalid_argument("learning rate must be positive");
    if (!(beta1 >= 0 && beta1 < 1)) throw std::invalid_argument("beta1 must lie in [0, 1)");
    if (!(beta2 >= 0 && beta2 < 1)) throw std::invalid_argument("beta2 must lie in [0, 1)");
    if (!(eps > 0)) throw std::invalid_argument("epsilon must be positive");
    if (!(l2 >= 0)) throw std::invalid_argument("L2 strength must be nonnegative");
    if (!(tolerance >= 0)) throw std::invalid_argument("tolerance must be nonnegative");
    if (patience == 0) throw std::invalid_argument("patience must be positive");
    if (heldout_every == 0) throw std::invalid_argument("heldout period must be positive");
  }
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
                      const TrainConfig& config) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw std::invalid_argument("adam_step: parameter, gradient and state lengths differ");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!std::isfinite(grads[i]))
      throw std::runtime_error("adam_step: non-finite gradient component at index " + std::to_string(i));
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
  }
}

struct HistoryRow {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::optional<double> heldout_vaf;
};

struct TrainResult {
  std::vector<double> params;  // best-loss parameters
  double initial_loss = 0.0;
  double best_loss = 0.0;
  std::vector<HistoryRow> history;
  std::size_t epochs_run = 0;
  bool converged = false;
};

/// Loss at `params`; writes the gradient into `grad`.
using Objective = std::function<double(std::span<const double> params, std::span<double> grad)>;
/// Held-out score of the current parameters, recorded into the history.
using HeldoutScore = std::function<double(std::span<const double> params)>;

/// Full-batch Adam. Row e of the history is the loss after e updates.
inline TrainResult minimize(const Objective& objective, std::vector<double> init, const TrainConfig& config,
                            const HeldoutScore& heldout = {}) {
  config.validate();
  TrainResult result;
  std::vector<double> params = std::move(init);
  std::vector<double> grad(params.size(), 0.0);
  AdamState state(params.size());
  result.params = params;
  result.best_loss = std::numeric_limits<double>::infinity();

  auto record = [&](std::size_t epoch, double loss) {
    if (!std::isfinite(loss))
      throw std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(epoch));
    HistoryRow row{epoch, loss, std::nullopt};
    if (heldout && (epoch % config.heldout_every == 0 || epoch == config.epochs)) row.heldout_vaf = heldout(params);
    result.history.push_back(row);
    if (loss < result.best_loss) {
      result.best_loss = loss;
      result.params = params;
    }
  };

  for (std::size_t epoch = 0;; ++epoch) {
    const double loss = objective(params, grad);
    record(epoch, loss);
    if (epoch == 0) result.initial_loss = loss;
    if (epoch >= config.patience) {
      const double before = result.history[epoch - config.patience].loss;
      if (std::abs(before - loss) <= config.tolerance * std::abs(before)) {
        result.converged = true;
        break;
      }
    }
    if (epoch == config.epochs) break;
    adam_step(state, params, grad, config);
    result.epochs_run = epoch + 1;
  }
  if (heldout && !result.history.back().heldout_vaf) result.history.back().heldout_vaf = heldout(params);
  return result;
}

inline void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& history) {
  out << "epoch,loss,vaf_on_heldout\n";
  for (const auto& row : history) {
    out << row.epoch << ',' << format_double(row.loss) << ',';
    if (row.heldout_vaf) out << format_double(*row.heldout_vaf);
    out << '\n';
  }
}

}  // namespace cgid
