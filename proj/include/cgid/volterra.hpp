#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgid/kernel.hpp"
#include "cgid/series.hpp"

namespace cgid {

/// Shape of a Volterra model: memory, sample rate, and one kernel
/// descriptor per order 2..D (entry i has order i + 2).
struct ModelSpec {
  std::size_t memory = 1;
  double sample_rate = 750.0;
  std::vector<KernelSpec> higher;

  int max_order() const { return 1 + static_cast<int>(higher.size()); }

  void validate() const {
    if (memory == 0) throw std::invalid_argument("model memory must be positive");
    if (!is_pow2(memory)) throw std::invalid_argument("model memory must be a power of two");
    if (!(sample_rate > 0)) throw std::invalid_argument("sample rate must be positive");
    for (std::size_t i = 0; i < higher.size(); ++i) {
      const auto& k = higher[i];
      if (k.order != static_cast<int>(i) + 2)
        throw std::invalid_argument("kernel " + std::to_string(i) + " must have order " + std::to_string(i + 2));
      if (k.side != memory)
        throw std::invalid_argument("kernel of order " + std::to_string(k.order) + " has side " +
                                    std::to_string(k.side) + ", expected memory " + std::to_string(memory));
      cgid::validate(k);
    }
  }

  /// 1 + n + sum of per-kernel counts.
  std::size_t param_count() const {
    validate();
    std::size_t total = 1 + memory;
    for (const auto& k : higher) total += cgid::param_count(k);
    return total;
  }

  bool operator==(const ModelSpec&) const = default;
};

/// Discrete Volterra model truncated at order D = 1 + kernels.size().
struct VolterraModel {
  std::size_t memory = 1;
  double sample_rate = 750.0;
  double h0 = 0.0;
  std::vector<double> h1;
  std::vector<Kernel> kernels;

  int max_order() const { return 1 + static_cast<int>(kernels.size()); }

  ModelSpec spec() const {
    ModelSpec s{memory, sample_rate, {}};
    for (const auto& k : kernels) s.higher.push_back(spec_of(k));
    return s;
  }

  std::size_t param_count() const {
    std::size_t total = 1 + h1.size();
    for (const auto& k : kernels) total += cgid::param_count(k);
    return total;
  }

  /// First output index whose full input history is available.
  std::size_t valid_start() const { return memory - 1; }
};

inline VolterraModel zero_model(const ModelSpec& spec) {
  spec.validate();
  VolterraModel m{spec.memory, spec.sample_rate, 0.0, std::vector<double>(spec.memory, 0.0), {}};
  for (const auto& k : spec.higher) m.kernels.push_back(make_zero_kernel(k));
  return m;
}

// Parameter layout: h0, then h1, then each higher kernel's own layout.

inline ParamVector flatten(const VolterraModel& m) {
  ParamVector out(m.param_count());
  out[0] = m.h0;
  std::copy(m.h1.begin(), m.h1.end(), out.begin() + 1);
  std::size_t pos = 1 + m.h1.size();
  for (const auto& k : m.kernels) {
    const auto n = param_count(k);
    flatten_into(k, std::span<double>(out).subspan(pos, n));
    pos += n;
  }
  return out;
}

inline VolterraModel unflatten_model(std::span<const double> params, const ModelSpec& spec) {
  detail::check_length(params.size(), spec.param_count(), "unflatten_model");
  VolterraModel m{spec.memory, spec.sample_rate, params[0],
                  std::vector<double>(params.begin() + 1, params.begin() + 1 + static_cast<std::ptrdiff_t>(spec.memory)),
                  {}};
  std::size_t pos = 1 + spec.memory;
  for (const auto& k : spec.higher) {
    const auto n = param_count(k);
    m.kernels.push_back(unflatten(params.subspan(pos, n), k));
    pos += n;
  }
  return m;
}

inline std::vector<LayoutSegment> model_layout(const ModelSpec& spec) {
  std::vector<LayoutSegment> out{{"h0", 0, 1}, {"h1", 1, spec.memory}};
  std::size_t pos = 1 + spec.memory;
  for (const auto& k : spec.higher) {
    const std::string prefix = "h" + std::to_string(k.order) + ".";
    for (auto seg : param_layout(k)) {
      seg.label = prefix + seg.label;
      seg.offset += pos;
      out.push_back(std::move(seg));
    }
    pos += param_count(k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prediction

/// Rows t = start .. x.size()-1 of the lag matrix, W(r, i) = x[start + r - i].
inline Eigen::MatrixXd window_matrix(std::span<const double> x, std::size_t memory, std::size_t start) {
  if (memory == 0 || start + 1 < memory)
    throw std::invalid_argument("window_matrix: start must be at least memory - 1");
  const std::size_t rows = x.size() > start ? x.size() - start : 0;
  Eigen::MatrixXd w(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(memory));
  for (std::size_t i = 0; i < memory; ++i)
    for (std::size_t r = 0; r < rows; ++r)
      w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = x[start + r - i];
  return w;
}

/// Model output for every row of a lag matrix.
inline Eigen::VectorXd predict_windows(const VolterraModel& m, const Eigen::MatrixXd& windows) {
  detail::check_length(static_cast<std::size_t>(windows.cols()), m.memory, "predict_windows");
  Eigen::VectorXd y = windows * Eigen::Map<const Eigen::VectorXd>(m.h1.data(), static_cast<Eigen::Index>(m.h1.size()));
  y.array() += m.h0;
  for (const auto& k : m.kernels) y += forms(k, windows);
  return y;
}

/// Output at a single time index t >= memory - 1, evaluated term by term.
inline double predict_at(const VolterraModel& m, std::span<const double> x, std::size_t t) {
  if (t + 1 < m.memory || t >= x.size()) throw std::out_of_range("predict_at: time index outside valid range");
  std::vector<double> w(m.memory);
  for (std::size_t i = 0; i < m.memory; ++i) w[i] = x[t - i];
  double y = m.h0;
  for (std::size_t i = 0; i < m.memory; ++i) y += m.h1[i] * w[i];
  for (const auto& k : m.kernels) y += multilinear_form(k, w);
  return y;
}

/// Full-length output series. Samples before valid_start() are zero.
inline SignalSeries predict(const VolterraModel& m, const SignalSeries& input) {
  if (input.size() < m.memory)
    throw std::invalid_argument("predict: input has " + std::to_string(input.size()) +
                                " samples, shorter than memory " + std::to_string(m.memory));
  require_finite(input, "predict input");
  SignalSeries out{std::vector<double>(input.size(), 0.0), input.sample_rate};
  const std::size_t start = m.valid_start();
  const Eigen::VectorXd y = predict_windows(m, window_matrix(input.samples, m.memory, start));
  for (Eigen::Index r = 0; r < y.size(); ++r) out.samples[start + static_cast<std::size_t>(r)] = y[r];
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

/// Variance accounted for, in percent, over [start, end).
inline double vaf(std::span<const double> reference, std::span<const double> prediction, std::size_t start = 0,
                  std::size_t end = static_cast<std::size_t>(-1)) {
  if (reference.size() != prediction.size())
    throw std::invalid_argument("vaf: reference and prediction lengths differ");
  end = std::min(end, reference.size());
  if (start >= end) throw std::invalid_argument("vaf: empty range");
  const double count = static_cast<double>(end - start);
  double mean_ref = 0.0, mean_res = 0.0;
  for (std::size_t i = start; i < end; ++i) {
    mean_ref += reference[i];
    mean_res += reference[i] - prediction[i];
  }
  mean_ref /= count;
  mean_res /= count;
  double var_ref = 0.0, var_res = 0.0;
  for (std::size_t i = start; i < end; ++i) {
    const double a = reference[i] - mean_ref;
    const double b = reference[i] - prediction[i] - mean_res;
    var_ref += a * a;
    var_res += b * b;
  }
  if (!(var_ref > 0.0)) throw std::invalid_argument("vaf: reference has zero variance on the range");
  return 100.0 * (1.0 - var_res / var_ref);
}

inline double vaf(const SignalSeries& reference, const SignalSeries& prediction, std::size_t start = 0) {
  return vaf(reference.samples, prediction.samples, start);
}

/// Held-out VAF of a model on a dataset over the model's valid range.
inline double evaluate_vaf(const VolterraModel& m, const Dataset& data) {
  const auto pred = predict(m, data.input);
  return vaf(data.output.samples, pred.samples, std::max(data.valid_start, m.valid_start()));
}

// ---------------------------------------------------------------------------
// Loss

/// Lag matrix and targets for the valid range of a dataset.
struct Design {
  Eigen::MatrixXd windows;
  Eigen::VectorXd target;
};

inline Design make_design(const Dataset& data, std::size_t memory) {
  if (data.input.size() != data.output.size()) throw std::invalid_argument("dataset input and output lengths differ");
  const std::size_t start = std::max(data.valid_start, memory == 0 ? 0 : memory - 1);
  if (start >= data.size()) throw std::invalid_argument("dataset valid range is empty");
  Design d{window_matrix(data.input.samples, memory, start), {}};
  d.target = Eigen::Map<const Eigen::VectorXd>(data.output.samples.data() + start,
                                               static_cast<Eigen::Index>(data.size() - start));
  return d;
}

inline double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

/// mean((pred - y)^2) + l2 * (squared norm of the order >= 2 kernel
/// parameters). h0 and h1 are not penalized, so a large l2 recovers the
/// unregularized linear fit. When `grad` is nonempty it receives the gradient
/// with respect to flatten(m).
inline double loss_and_grad(const VolterraModel& m, const Design& d, double l2, std::span<double> grad = {}) {
  if (d.target.size() == 0) throw std::invalid_argument("loss: empty valid range");
  const double count = static_cast<double>(d.target.size());
  const Eigen::VectorXd residual = predict_windows(m, d.windows) - d.target;
  const ParamVector theta = flatten(m);
  const std::span<const double> penalized = std::span<const double>(theta).subspan(1 + m.memory);
  const double value = residual.squaredNorm() / count + l2 * squared_norm(penalized);
  if (grad.empty()) return value;

  detail::check_length(grad.size(), theta.size(), "loss gradient");
  const Eigen::VectorXd up = (2.0 / count) * residual;
  grad[0] = up.sum();
  const auto n = static_cast<Eigen::Index>(m.memory);
  Eigen::Map<Eigen::VectorXd>(grad.data() + 1, n) = d.windows.transpose() * up;
  std::size_t pos = 1 + m.memory;
  for (const auto& k : m.kernels) {
    const auto count_k = param_count(k);
    auto seg = grad.subspan(pos, count_k);
    std::fill(seg.begin(), seg.end(), 0.0);
    add_form_grads(k, d.windows, up, seg);
    pos += count_k;
  }
  for (std::size_t i = 1 + m.memory; i < theta.size(); ++i) grad[i] += 2.0 * l2 * theta[i];
  return value;
}

inline double loss(const VolterraModel& m, const Dataset& data, double l2) {
  return loss_and_grad(m, make_design(data, m.memory), l2);
}

inline ParamVector loss_grad(const VolterraModel& m, const Dataset& data, double l2) {
  ParamVector g(m.param_count());
  loss_and_grad(m, make_design(data, m.memory), l2, g);
  return g;
}

}  // namespace cgid
