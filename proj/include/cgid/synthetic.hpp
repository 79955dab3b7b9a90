#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgid/kernel.hpp"
#include "cgid/optim.hpp"
#include "cgid/series.hpp"
#include "cgid/train.hpp"

namespace cgid {

/// Integral of log|t - s| over s in [a, b], from the antiderivative, with
/// x log(x^2) taken as 0 at x = 0.
inline double integral_kernel_entry(double t, double a, double b) {
  if (!(a < b)) throw std::invalid_argument("integral_kernel_entry: require a < b");
  auto xlogx2 = [](double x) { return x == 0.0 ? 0.0 : x * std::log(x * x); };
  return -(b - a) - 0.5 * (xlogx2(t - b) - xlogx2(t - a));
}

struct IntegralOperator {
  std::size_t N = 0;
  DenseKernel matrix;          // A[i][j], order 2, side N
  std::vector<double> points;  // collocation points t_i
};

/// N piecewise-constant basis functions on [0, 1], collocated at the cell
/// midpoints t_i = (i + 1/2) / N (zero-based i).
inline IntegralOperator build_operator(std::size_t N) {
  if (N == 0) throw std::invalid_argument("build_operator: N must be positive");
  IntegralOperator op{N, DenseKernel(2, N), std::vector<double>(N)};
  const double dn = static_cast<double>(N);
  for (std::size_t i = 0; i < N; ++i) op.points[i] = (static_cast<double>(i) + 0.5) / dn;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j)
      op.matrix(i, j) = integral_kernel_entry(op.points[i], static_cast<double>(j) / dn,
                                              static_cast<double>(j + 1) / dn);
  return op;
}

struct OperatorSample {
  std::vector<double> input;
  std::vector<double> target;
  double sigma = 0.0;
};

/// Sample j draws its N inputs and then its N noise values from one
/// generator, so a smaller m is a prefix of a larger one and samples at
/// different sigma share the same underlying draws.
inline std::vector<OperatorSample> gen_samples(const DenseKernel& A, std::size_t m, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0)) throw std::invalid_argument("gen_samples: sigma must be nonnegative");
  if (A.order() != 2) throw std::invalid_argument("gen_samples: operator must be a matrix");
  const std::size_t N = A.side();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<OperatorSample> out(m);
  for (auto& s : out) {
    s.input.resize(N);
    for (auto& v : s.input) v = normal(rng);
    s.target.assign(N, 0.0);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) s.target[i] += A(i, j) * s.input[j];
    for (auto& v : s.target) v += sigma * normal(rng);
    s.sigma = sigma;
  }
  return out;
}

enum class OperatorClass { dense, hierarchical, toeplitz };

inline std::string to_string(OperatorClass c) {
  switch (c) {
    case OperatorClass::dense: return "dense";
    case OperatorClass::hierarchical: return "hierarchical";
    case OperatorClass::toeplitz: return "toeplitz";
  }
  return "?";
}

inline OperatorClass parse_operator_class(const std::string& s) {
  if (s == "dense") return OperatorClass::dense;
  if (s == "hierarchical" || s == "h") return OperatorClass::hierarchical;
  if (s == "toeplitz" || s == "toeplitz_sym") return OperatorClass::toeplitz;
  throw std::invalid_argument("unknown operator class '" + s + "'");
}

inline KernelSpec operator_spec(OperatorClass c, std::size_t N) {
  switch (c) {
    case OperatorClass::dense: return {Repr::dense, 2, N};
    case OperatorClass::hierarchical: return {Repr::hierarchical, 2, N, 1, 2};
    case OperatorClass::toeplitz: return {Repr::toeplitz_sym, 2, N};
  }
  throw std::invalid_argument("unknown operator class");
}

namespace detail {

inline Eigen::MatrixXd rows_of(std::span<const OperatorSample> samples, bool inputs) {
  if (samples.empty()) return {};
  const auto N = static_cast<Eigen::Index>(samples[0].input.size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(samples.size()), N);
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const auto& v = inputs ? samples[r].input : samples[r].target;
    if (static_cast<Eigen::Index>(v.size()) != N) throw std::invalid_argument("operator samples differ in length");
    m.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), N);
  }
  return m;
}

}  // namespace detail

/// Pooled VAF of K f against the targets over every output of every sample.
inline double operator_vaf(const Kernel& k, std::span<const OperatorSample> samples) {
  const Eigen::MatrixXd inputs = detail::rows_of(samples, true);
  const Eigen::MatrixXd targets = detail::rows_of(samples, false);
  const Eigen::MatrixXd pred = matvec_rows(k, inputs);
  return vaf(std::span<const double>(targets.data(), static_cast<std::size_t>(targets.size())),
             std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())));
}

/// Mean squared output error over all m N outputs, with its gradient.
///
/// The sum over samples of grad_matvec(K, f_j, 2 r_j / (m N)) is the
/// pullback of G = 2 (K S - C) / (m N), where S = sum f_j f_j^T and
/// C = sum y_j f_j^T. Only S, C and sum |y_j|^2 are kept, so one
/// evaluation costs O(N^3) whatever the number of samples.
class OperatorObjective {
 public:
  OperatorObjective(std::span<const OperatorSample> samples, KernelSpec spec) : spec_(spec) {
    if (samples.empty()) throw std::invalid_argument("fit_operator: empty training set");
    const Eigen::MatrixXd f = detail::rows_of(samples, true);
    const Eigen::MatrixXd y = detail::rows_of(samples, false);
    if (static_cast<std::size_t>(f.cols()) != spec.side) throw std::invalid_argument("sample length differs from N");
    gram_ = f.transpose() * f;
    cross_ = y.transpose() * f;
    yy_ = y.squaredNorm();
    count_ = static_cast<double>(y.size());
  }

  double operator()(std::span<const double> params, std::span<double> grad) const {
    const Kernel k = unflatten(params, spec_);
    const DenseKernel d = to_dense(k);
    const auto n = static_cast<Eigen::Index>(spec_.side);
    Eigen::Map<const detail::RowMajorMatrix> K(d.values().data(), n, n);
    const Eigen::MatrixXd ks = K * gram_;
    const double value = ((ks.cwiseProduct(K)).sum() - 2.0 * cross_.cwiseProduct(K).sum() + yy_) / count_;
    if (!grad.empty()) {
      std::fill(grad.begin(), grad.end(), 0.0);
      const detail::RowMajorMatrix g = (2.0 / count_) * (ks - cross_);
      add_pullback(k, g, grad);
    }
    return value;
  }

 private:
  KernelSpec spec_;
  Eigen::MatrixXd gram_, cross_;
  double yy_ = 0.0;
  double count_ = 0.0;
};

struct OperatorFit {
  Kernel map;
  double heldout_vaf = 0.0;
  TrainResult training;
};

inline OperatorFit fit_operator(OperatorClass cls, std::span<const OperatorSample> train,
                                std::span<const OperatorSample> heldout, const TrainConfig& config) {
  if (train.empty()) throw std::invalid_argument("fit_operator: empty training set");
  const KernelSpec spec = operator_spec(cls, train[0].input.size());
  const OperatorObjective objective(train, spec);
  auto result = minimize(std::cref(objective), initial_kernel_params(spec, config.seed), config);
  Kernel map = unflatten(result.params, spec);
  const double score = heldout.empty() ? 0.0 : operator_vaf(map, heldout);
  return {std::move(map), score, std::move(result)};
}

// ---------------------------------------------------------------------------
// Sample-complexity search

struct SearchConfig {
  std::size_t N = 16;
  double target_vaf = 95.0;
  int repeats = 5;
  std::size_t cap = 16384;
  std::size_t heldout_count = 256;
  std::uint64_t seed = 1;
  TrainConfig train = default_train();

  static TrainConfig default_train() {
    TrainConfig c;
    c.lr = 1e-2;
    c.epochs = 20000;
    return c;
  }
};

struct SearchResult {
  std::size_t m_star = 0;
  double median_vaf = 0.0;
  bool saturated = false;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace detail

/// Smallest m (doubling, then bisection) whose median held-out VAF over the
/// repeats reaches the target. Repeat r uses the same training draws for
/// every class and sigma; the held-out set is noiseless and shared.
inline SearchResult min_samples_for_accuracy(OperatorClass cls, const DenseKernel& A, double sigma,
                                             const SearchConfig& cfg) {
  if (cfg.repeats < 1 || cfg.cap < 1) throw std::invalid_argument("search needs at least one repeat and m >= 1");
  const auto heldout = gen_samples(A, cfg.heldout_count, 0.0, detail::mix_seed(cfg.seed, 0));
  std::vector<std::vector<OperatorSample>> pools;
  for (int r = 0; r < cfg.repeats; ++r)
    pools.push_back(gen_samples(A, cfg.cap, sigma, detail::mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(r))));

  std::map<std::size_t, double> cache;
  auto score = [&](std::size_t m) {
    if (auto it = cache.find(m); it != cache.end()) return it->second;
    std::vector<double> vafs;
    for (int r = 0; r < cfg.repeats; ++r) {
      TrainConfig tc = cfg.train;
      tc.seed = detail::mix_seed(cfg.seed, 2000 + static_cast<std::uint64_t>(r));
      const auto& pool = pools[static_cast<std::size_t>(r)];
      vafs.push_back(fit_operator(cls, std::span(pool).first(m), heldout, tc).heldout_vaf);
    }
    return cache[m] = median(std::move(vafs));
  };

  std::size_t hi = 1;
  while (score(hi) < cfg.target_vaf) {
    if (hi == cfg.cap) return {cfg.cap, score(cfg.cap), true};
    hi = std::min(hi * 2, cfg.cap);
  }
  std::size_t lo = hi / 2;  // fails (or zero when hi == 1)
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    (score(mid) >= cfg.target_vaf ? hi : lo) = mid;
  }
  return {hi, score(hi), false};
}

struct SweepRow {
  OperatorClass cls;
  double sigma;
  SearchResult result;
};

/// Rows in grid order: sigma outer, class inner.
inline std::vector<SweepRow> sweep(const std::vector<double>& sigmas, const std::vector<OperatorClass>& classes,
                                   const SearchConfig& cfg) {
  const auto op = build_operator(cfg.N);
  std::vector<SweepRow> rows;
  for (double sigma : sigmas)
    for (auto cls : classes) rows.push_back({cls, sigma, min_samples_for_accuracy(cls, op.matrix, sigma, cfg)});
  return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "class,sigma,m_star,median_vaf,saturated_flag\n";
  for (const auto& r : rows)
    out << to_string(r.cls) << ',' << format_double(r.sigma) << ',' << r.result.m_star << ','
        << format_double(r.result.median_vaf) << ',' << (r.result.saturated ? 1 : 0) << '\n';
}

/// n x n grid of kernel entries, one matrix row per line.
inline void write_heatmap_csv(std::ostream& out, const Kernel& k) {
  if (order_of(k) != 2) throw std::invalid_argument("heatmap export needs an order-2 kernel");
  const DenseKernel d = to_dense(k);
  for (std::size_t i = 0; i < d.side(); ++i) {
    for (std::size_t j = 0; j < d.side(); ++j) out << (j ? "," : "") << format_double(d(i, j));
    out << '\n';
  }
}

}  // namespace cgid
