#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "cgid/dense_kernel.hpp"
#include "cgid/hkernel.hpp"
#include "cgid/kernel_spec.hpp"
#include "cgid/toeplitz.hpp"

namespace cgid {

using Kernel = std::variant<DenseKernel, HKernel, SymToeplitz>;

/// Flat list of trainable scalars in the owning structure's layout order.
using ParamVector = std::vector<double>;

/// One labelled contiguous run of a ParamVector.
struct LayoutSegment {
  std::string label;
  std::size_t offset = 0;
  std::size_t size = 0;
  friend bool operator==(const LayoutSegment&, const LayoutSegment&) = default;
};

/// Largest number of entries to_dense will materialize.
inline constexpr std::size_t kMaxDenseEntries = std::size_t{1} << 24;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline KernelSpec spec_of(const Kernel& k) {
  return std::visit([](const auto& x) { return x.spec(); }, k);
}

inline std::size_t side_of(const Kernel& k) {
  return std::visit([](const auto& x) { return x.side(); }, k);
}

inline int order_of(const Kernel& k) {
  return std::visit([](const auto& x) { return x.order(); }, k);
}

inline std::size_t param_count(const Kernel& k) {
  return std::visit([](const auto& x) { return x.param_count(); }, k);
}

inline Kernel make_zero_kernel(const KernelSpec& spec) {
  validate(spec);
  switch (spec.repr) {
    case Repr::dense: return DenseKernel(spec.order, spec.side);
    case Repr::toeplitz_sym: return SymToeplitz(spec.side);
    case Repr::hierarchical: return HKernel(spec.order, spec.side, spec.rank, spec.leaf_size);
  }
  throw std::invalid_argument("unknown representation");
}

namespace detail {

template <class F>
void for_each_segment(Kernel& k, F&& f) {
  std::visit(overloaded{[&](HKernel& h) { h.for_each_segment(f); },
                        [&](auto& x) { f(x.values()); }},
             k);
}

template <class F>
void for_each_segment(const Kernel& k, F&& f) {
  std::visit(overloaded{[&](const HKernel& h) { h.for_each_segment(f); },
                        [&](const auto& x) { f(x.values()); }},
             k);
}

inline void check_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want)
    throw std::invalid_argument(std::string(what) + ": length " + std::to_string(got) +
                                " does not match kernel side " + std::to_string(want));
}

inline void require_order2(const Kernel& k, const char* what) {
  if (order_of(k) != 2) throw std::invalid_argument(std::string(what) + " needs an order-2 kernel");
}

inline void hk_layout(const HKernel& node, const std::string& path, std::size_t& offset,
                      std::vector<LayoutSegment>& out) {
  if (node.is_leaf()) {
    out.push_back({path + ".leaf", offset, node.leaf_values().size()});
    offset += node.leaf_values().size();
    return;
  }
  for (unsigned mask = 1; mask < node.diagonal_mask(); ++mask) {
    const auto n = node.block(mask).values().size();
    out.push_back({path + ".block" + std::to_string(mask), offset, n});
    offset += n;
  }
  hk_layout(node.child(0), path + ".0", offset, out);
  hk_layout(node.child(1), path + ".1", offset, out);
}

}  // namespace detail

inline void flatten_into(const Kernel& k, std::span<double> out) {
  detail::check_length(out.size(), param_count(k), "flatten_into");
  std::size_t pos = 0;
  detail::for_each_segment(k, [&](std::span<const double> seg) {
    std::copy(seg.begin(), seg.end(), out.begin() + static_cast<std::ptrdiff_t>(pos));
    pos += seg.size();
  });
}

inline ParamVector flatten(const Kernel& k) {
  ParamVector out(param_count(k));
  flatten_into(k, out);
  return out;
}

inline Kernel unflatten(std::span<const double> params, const KernelSpec& spec) {
  Kernel k = make_zero_kernel(spec);
  if (params.size() != param_count(k))
    throw std::invalid_argument("unflatten: expected " + std::to_string(param_count(k)) +
                                " parameters, got " + std::to_string(params.size()));
  std::size_t pos = 0;
  detail::for_each_segment(k, [&](std::span<double> seg) {
    std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(pos), seg.size(), seg.begin());
    pos += seg.size();
  });
  return k;
}

inline std::vector<LayoutSegment> param_layout(const KernelSpec& spec) {
  validate(spec);
  switch (spec.repr) {
    case Repr::dense: return {{"dense", 0, param_count(spec)}};
    case Repr::toeplitz_sym: return {{"row", 0, spec.side}};
    case Repr::hierarchical: {
      std::vector<LayoutSegment> out;
      std::size_t offset = 0;
      detail::hk_layout(HKernel(spec.order, spec.side, spec.rank, spec.leaf_size), "root", offset,
                        out);
      return out;
    }
  }
  return {};
}

inline DenseKernel to_dense(const Kernel& k) {
  const auto spec = spec_of(k);
  std::size_t entries = 1;
  for (int a = 0; a < spec.order; ++a) {
    entries *= spec.side;
    if (entries > kMaxDenseEntries)
      throw std::length_error("to_dense: kernel of side " + std::to_string(spec.side) +
                              " and order " + std::to_string(spec.order) + " is too large");
  }
  return std::visit(
      overloaded{[](const DenseKernel& d) { return d; },
                 [](const SymToeplitz& t) {
                   DenseKernel out(2, t.side());
                   for (std::size_t i = 0; i < t.side(); ++i)
                     for (std::size_t j = 0; j < t.side(); ++j) out(i, j) = t(i, j);
                   return out;
                 },
                 [](const HKernel& h) {
                   DenseKernel out(h.order(), h.side());
                   detail::hk_scatter(h, out, 0);
                   return out;
                 }},
      k);
}

/// Replaces each off-diagonal block by its truncated SVD (best rank-k
/// approximation in the Frobenius norm) and recurses on diagonal blocks.
inline HKernel project_to_hierarchical(const DenseKernel& dense, int rank, std::size_t leaf_size) {
  if (dense.order() != 2)
    throw std::invalid_argument("project_to_hierarchical: only order-2 kernels are supported");
  HKernel h(2, dense.side(), rank, leaf_size);
  const auto n = static_cast<Eigen::Index>(dense.side());
  const detail::RowMajorMatrix m = Eigen::Map<const detail::RowMajorMatrix>(dense.values().data(), n, n);
  detail::hk_project(h, m, 0);
  return h;
}

// ---------------------------------------------------------------------------
// Per-sample operations.

/// Full contraction sum over i1..id of K[i1..id] w[i1] ... w[id].
inline double multilinear_form(const Kernel& k, std::span<const double> w,
                               OpCounter* counter = nullptr) {
  detail::check_length(w.size(), side_of(k), "multilinear_form");
  return std::visit(
      overloaded{[&](const DenseKernel& d) {
                   return detail::contract_all(d.values(), d.order(), d.side(), w, counter);
                 },
                 [&](const HKernel& h) { return detail::hk_form(h, w, counter); },
                 [&](const SymToeplitz& t) {
                   const std::size_t n = t.side();
                   auto row = t.values();
                   double total = 0.0;
                   for (std::size_t m = 0; m < n; ++m) {
                     double c = 0.0;
                     for (std::size_t i = 0; i + m < n; ++i) c += w[i] * w[i + m];
                     total += row[m] * (m == 0 ? c : 2.0 * c);
                     detail::count_ops(counter, n - m + 1);
                   }
                   return total;
                 }},
      k);
}

/// Gradient of upstream * multilinear_form(k, w) with respect to flatten(k).
inline ParamVector grad_multilinear_form(const Kernel& k, std::span<const double> w,
                                         double upstream) {
  detail::check_length(w.size(), side_of(k), "grad_multilinear_form");
  ParamVector out(param_count(k), 0.0);
  std::visit(overloaded{[&](const DenseKernel& d) {
                          detail::outer_power(out, d.order(), d.side(), w, upstream);
                        },
                        [&](const HKernel& h) {
                          detail::ParamCursor cursor(out);
                          detail::hk_form_grad(h, w, upstream, cursor);
                        },
                        [&](const SymToeplitz& t) {
                          const std::size_t n = t.side();
                          for (std::size_t m = 0; m < n; ++m) {
                            double c = 0.0;
                            for (std::size_t i = 0; i + m < n; ++i) c += w[i] * w[i + m];
                            out[m] = upstream * (m == 0 ? c : 2.0 * c);
                          }
                        }},
             k);
  return out;
}

/// y = K x for an order-2 kernel.
inline std::vector<double> matvec(const Kernel& k, std::span<const double> x) {
  detail::require_order2(k, "matvec");
  const std::size_t n = side_of(k);
  detail::check_length(x.size(), n, "matvec");
  std::vector<double> y(n, 0.0);
  std::visit(overloaded{[&](const DenseKernel& d) {
                          for (std::size_t i = 0; i < n; ++i)
                            y[i] = detail::dot(d.values().subspan(i * n, n), x);
                        },
                        [&](const HKernel& h) { detail::hk_matvec(h, x, y); },
                        [&](const SymToeplitz& t) {
                          for (std::size_t i = 0; i < n; ++i) {
                            double acc = 0.0;
                            for (std::size_t j = 0; j < n; ++j) acc += t(i, j) * x[j];
                            y[i] = acc;
                          }
                        }},
             k);
  return y;
}

/// Accumulates into `out` the parameter gradient given dL/dK as a dense
/// side x side matrix (order-2 kernels only).
inline void add_pullback(const Kernel& k, const detail::RowMajorMatrix& dense_grad,
                         std::span<double> out) {
  detail::require_order2(k, "add_pullback");
  const std::size_t n = side_of(k);
  detail::check_length(static_cast<std::size_t>(dense_grad.rows()), n, "add_pullback");
  detail::check_length(out.size(), param_count(k), "add_pullback");
  std::visit(overloaded{[&](const DenseKernel&) {
                          for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t j = 0; j < n; ++j)
                              out[i * n + j] += dense_grad(static_cast<Eigen::Index>(i),
                                                           static_cast<Eigen::Index>(j));
                        },
                        [&](const HKernel& h) {
                          detail::ParamCursor cursor(out);
                          detail::hk_pullback(h, dense_grad, 0, cursor);
                        },
                        [&](const SymToeplitz&) {
                          for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t j = 0; j < n; ++j)
                              out[i > j ? i - j : j - i] += dense_grad(
                                  static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                        }},
             k);
}

/// Gradient of upstream^T (K x) with respect to flatten(k).
inline ParamVector grad_matvec(const Kernel& k, std::span<const double> x,
                               std::span<const double> upstream) {
  detail::require_order2(k, "grad_matvec");
  const std::size_t n = side_of(k);
  detail::check_length(x.size(), n, "grad_matvec");
  detail::check_length(upstream.size(), n, "grad_matvec upstream");
  const auto ni = static_cast<Eigen::Index>(n);
  const detail::RowMajorMatrix g = Eigen::Map<const Eigen::VectorXd>(upstream.data(), ni) *
                                   Eigen::Map<const Eigen::VectorXd>(x.data(), ni).transpose();
  ParamVector out(param_count(k), 0.0);
  add_pullback(k, g, out);
  return out;
}

// ---------------------------------------------------------------------------
// Batched operations: one sample per row.

/// Multilinear form of every row of `windows`.
inline Eigen::VectorXd forms(const Kernel& k, const Eigen::MatrixXd& windows) {
  detail::check_length(static_cast<std::size_t>(windows.cols()), side_of(k), "forms");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(windows.rows());
  std::visit(overloaded{[&](const HKernel& h) { detail::hk_forms(h, windows, acc); },
                        [&](const DenseKernel& d) {
                          const auto n = windows.cols();
                          if (d.order() == 2) {
                            Eigen::Map<const detail::RowMajorMatrix> m(d.values().data(), n, n);
                            acc = ((windows * m.transpose()).cwiseProduct(windows)).rowwise().sum();
                          } else if (d.order() == 1) {
                            acc = windows * Eigen::Map<const Eigen::VectorXd>(d.values().data(), n);
                          } else {
                            std::vector<double> w(static_cast<std::size_t>(n));
                            for (Eigen::Index r = 0; r < windows.rows(); ++r) {
                              Eigen::Map<Eigen::VectorXd>(w.data(), n) = windows.row(r).transpose();
                              acc[r] = detail::contract_all(d.values(), d.order(), d.side(), w, nullptr);
                            }
                          }
                        },
                        [&](const SymToeplitz& t) {
                          const auto n = windows.cols();
                          const DenseKernel d = to_dense(t);
                          Eigen::Map<const detail::RowMajorMatrix> m(d.values().data(), n, n);
                          acc = ((windows * m).cwiseProduct(windows)).rowwise().sum();
                        }},
             k);
  return acc;
}

/// out += sum over rows r of upstream[r] * d(form of row r)/d(params).
inline void add_form_grads(const Kernel& k, const Eigen::MatrixXd& windows,
                           const Eigen::VectorXd& upstream, std::span<double> out) {
  detail::check_length(static_cast<std::size_t>(windows.cols()), side_of(k), "add_form_grads");
  detail::check_length(out.size(), param_count(k), "add_form_grads");
  std::visit(
      overloaded{[&](const HKernel& h) { detail::hk_add_form_grads(h, windows, upstream, out); },
                 [&](const DenseKernel& d) {
                   const auto n = windows.cols();
                   if (d.order() == 2) {
                     Eigen::Map<detail::RowMajorMatrix> g(out.data(), n, n);
                     g.noalias() += windows.transpose() * (upstream.asDiagonal() * windows);
                   } else if (d.order() == 1) {
                     Eigen::Map<Eigen::VectorXd>(out.data(), n).noalias() +=
                         windows.transpose() * upstream;
                   } else {
                     std::vector<double> w(static_cast<std::size_t>(n));
                     std::vector<double> tmp(out.size());
                     for (Eigen::Index r = 0; r < windows.rows(); ++r) {
                       Eigen::Map<Eigen::VectorXd>(w.data(), n) = windows.row(r).transpose();
                       detail::outer_power(tmp, d.order(), d.side(), w, upstream[r]);
                       for (std::size_t i = 0; i < out.size(); ++i) out[i] += tmp[i];
                     }
                   }
                 },
                 [&](const SymToeplitz& t) {
                   const detail::RowMajorMatrix g =
                       windows.transpose() * (upstream.asDiagonal() * windows);
                   add_pullback(t, g, out);
                 }},
      k);
}

/// outputs.row(r) = K inputs.row(r) for an order-2 kernel.
inline Eigen::MatrixXd matvec_rows(const Kernel& k, const Eigen::MatrixXd& inputs) {
  detail::require_order2(k, "matvec_rows");
  const auto n = static_cast<Eigen::Index>(side_of(k));
  detail::check_length(static_cast<std::size_t>(inputs.cols()), side_of(k), "matvec_rows");
  Eigen::MatrixXd outputs = Eigen::MatrixXd::Zero(inputs.rows(), n);
  std::visit(overloaded{[&](const HKernel& h) { detail::hk_apply(h, inputs, 0, outputs); },
                        [&](const auto& other) {
                          const DenseKernel d = to_dense(other);
                          Eigen::Map<const detail::RowMajorMatrix> m(d.values().data(), n, n);
                          outputs.noalias() = inputs * m.transpose();
                        }},
             k);
  return outputs;
}

}  // namespace cgid
