#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cgid/kernel_spec.hpp"

namespace cgid {

/// Symmetric Toeplitz matrix M[i][j] = row[|i - j|]; n parameters.
class SymToeplitz {
 public:
  SymToeplitz() = default;
  explicit SymToeplitz(std::size_t side) : row_(side, 0.0) { validate(spec()); }
  explicit SymToeplitz(std::vector<double> row) : row_(std::move(row)) { validate(spec()); }

  std::size_t side() const { return row_.size(); }
  int order() const { return 2; }
  KernelSpec spec() const { return {Repr::toeplitz_sym, 2, row_.size(), 1, 2}; }
  std::size_t param_count() const { return row_.size(); }

  std::span<const double> values() const { return row_; }
  std::span<double> values() { return row_; }

  double operator()(std::size_t i, std::size_t j) const { return row_[i > j ? i - j : j - i]; }

  friend bool operator==(const SymToeplitz&, const SymToeplitz&) = default;

 private:
  std::vector<double> row_;
};

}  // namespace cgid
