#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgid/kernel_spec.hpp"

namespace cgid {

/// Counts scalar multiply-adds performed by the per-sample evaluators.
/// Pass nullptr when not instrumenting.
struct OpCounter {
  std::size_t multiply_adds = 0;
};

namespace detail {

inline void count_ops(OpCounter* counter, std::size_t n) {
  if (counter) counter->multiply_adds += n;
}

/// Full contraction of a row-major side^order tensor with `w` along every axis.
/// Contracts the last axis first, so the cost is side^order + side^(order-1) + ...
inline double contract_all(std::span<const double> values, int order, std::size_t side,
                           std::span<const double> w, OpCounter* counter) {
  if (order == 0) return values[0];
  std::vector<double> cur(values.begin(), values.end());
  std::size_t size = cur.size();
  for (int axis = order - 1; axis >= 0; --axis) {
    const std::size_t outer = size / side;
    for (std::size_t q = 0; q < outer; ++q) {
      double acc = 0.0;
      const double* row = cur.data() + q * side;
      for (std::size_t j = 0; j < side; ++j) acc += row[j] * w[j];
      cur[q] = acc;
    }
    count_ops(counter, size);
    size = outer;
  }
  return cur[0];
}

/// Writes scale * (w outer w outer ... outer w) into `out` (row-major, side^order entries).
inline void outer_power(std::span<double> out, int order, std::size_t side,
                        std::span<const double> w, double scale) {
  out[0] = scale;
  std::size_t size = 1;
  for (int axis = 0; axis < order; ++axis) {
    // Expand in place from the back so earlier entries are still unread.
    for (std::size_t q = size; q-- > 0;) {
      const double base = out[q];
      for (std::size_t j = side; j-- > 0;) out[q * side + j] = base * w[j];
    }
    size *= side;
  }
}

}  // namespace detail

/// Plain side^order tensor, row-major (last index fastest).
class DenseKernel {
 public:
  DenseKernel() = default;
  DenseKernel(int order, std::size_t side)
      : order_(order), side_(side), values_(ipow(side, order), 0.0) {
    validate(spec());
  }
  DenseKernel(int order, std::size_t side, std::vector<double> values)
      : order_(order), side_(side), values_(std::move(values)) {
    validate(spec());
    if (values_.size() != ipow(side, order))
      throw std::invalid_argument("dense kernel expects " + std::to_string(ipow(side, order)) +
                                  " values, got " + std::to_string(values_.size()));
  }

  int order() const { return order_; }
  std::size_t side() const { return side_; }
  KernelSpec spec() const { return {Repr::dense, order_, side_, 1, 2}; }
  std::size_t param_count() const { return values_.size(); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  std::size_t linear_index(std::span<const std::size_t> idx) const {
    std::size_t lin = 0;
    for (std::size_t a = 0; a < idx.size(); ++a) lin = lin * side_ + idx[a];
    return lin;
  }
  double at(std::span<const std::size_t> idx) const { return values_[linear_index(idx)]; }
  double& at(std::span<const std::size_t> idx) { return values_[linear_index(idx)]; }

  // Matrix accessors for order 2.
  double operator()(std::size_t i, std::size_t j) const { return values_[i * side_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * side_ + j]; }

  friend bool operator==(const DenseKernel&, const DenseKernel&) = default;

 private:
  int order_ = 2;
  std::size_t side_ = 0;
  std::vector<double> values_;
};

}  // namespace cgid
