#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgid/dense_kernel.hpp"
#include "cgid/kernel_spec.hpp"

namespace cgid {

/// Sum of `rank` d-way outer products of side-length vectors.
/// Factors are stored group-major: [group][axis][i].
class LowRankBlock {
 public:
  LowRankBlock() = default;
  LowRankBlock(int rank, int order, std::size_t side)
      : rank_(rank), order_(order), side_(side),
        factors_(static_cast<std::size_t>(rank) * static_cast<std::size_t>(order) * side, 0.0) {}

  int rank() const { return rank_; }
  int order() const { return order_; }
  std::size_t side() const { return side_; }

  std::span<const double> factor(int group, int axis) const {
    return {factors_.data() + offset(group, axis), side_};
  }
  std::span<double> factor(int group, int axis) {
    return {factors_.data() + offset(group, axis), side_};
  }
  std::span<const double> values() const { return factors_; }
  std::span<double> values() { return factors_; }

  /// Materializes the block; only for small sides.
  DenseKernel to_dense() const {
    DenseKernel out(order_, side_);
    auto dst = out.values();
    std::vector<double> term(dst.size());
    for (int g = 0; g < rank_; ++g) {
      term[0] = 1.0;
      std::size_t size = 1;
      for (int a = 0; a < order_; ++a) {
        auto u = factor(g, a);
        for (std::size_t q = size; q-- > 0;) {
          const double base = term[q];
          for (std::size_t j = side_; j-- > 0;) term[q * side_ + j] = base * u[j];
        }
        size *= side_;
      }
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += term[i];
    }
    return out;
  }

  friend bool operator==(const LowRankBlock&, const LowRankBlock&) = default;

 private:
  std::size_t offset(int group, int axis) const {
    return (static_cast<std::size_t>(group) * static_cast<std::size_t>(order_) +
            static_cast<std::size_t>(axis)) * side_;
  }

  int rank_ = 0;
  int order_ = 0;
  std::size_t side_ = 0;
  std::vector<double> factors_;
};

/// Hierarchical low-rank tensor.
///
/// A node of side n > leaf_size halves every axis. Of the resulting 2^d
/// orthants (indexed by a d-bit mask, bit a set meaning axis a lies in the
/// upper half) the two diagonal ones, masks 0 and 2^d - 1, are child
/// HKernels; the remaining 2^d - 2 are LowRankBlocks. Nodes of side
/// n <= leaf_size store a dense n^d leaf.
///
/// Parameter layout (flatten order) of a split node: its off-diagonal blocks
/// by ascending mask, then child 0, then child 1. A leaf contributes its
/// dense values row-major.
class HKernel {
 public:
  HKernel() = default;

  /// All-zero kernel with the given structure.
  HKernel(int order, std::size_t side, int rank, std::size_t leaf_size)
      : order_(order), side_(side), rank_(rank), leaf_size_(leaf_size) {
    validate(spec());
    build();
  }

  static HKernel zeros(int order, std::size_t side, int rank, std::size_t leaf_size) {
    return HKernel(order, side, rank, leaf_size);
  }

  /// Every stored scalar drawn i.i.d. uniform in [-scale, scale].
  static HKernel random(int order, std::size_t side, int rank, std::size_t leaf_size,
                        double scale, std::uint64_t seed) {
    HKernel h(order, side, rank, leaf_size);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-scale, scale);
    h.for_each_segment([&](std::span<double> seg) {
      for (double& x : seg) x = dist(rng);
    });
    return h;
  }

  int order() const { return order_; }
  std::size_t side() const { return side_; }
  int rank() const { return rank_; }
  std::size_t leaf_size() const { return leaf_size_; }
  KernelSpec spec() const { return {Repr::hierarchical, order_, side_, rank_, leaf_size_}; }
  std::size_t param_count() const { return cgid::param_count(spec()); }

  bool is_leaf() const { return children_.empty(); }
  unsigned num_masks() const { return 1u << order_; }
  unsigned diagonal_mask() const { return num_masks() - 1; }
  std::size_t num_blocks() const { return blocks_.size(); }

  std::span<const double> leaf_values() const { return leaf_; }
  std::span<double> leaf_values() { return leaf_; }

  /// which = 0 for orthant 00...0, 1 for orthant 11...1.
  const HKernel& child(int which) const { return children_.at(static_cast<std::size_t>(which)); }
  HKernel& child(int which) { return children_.at(static_cast<std::size_t>(which)); }

  /// Off-diagonal block at orthant `mask` (1 <= mask <= 2^d - 2).
  const LowRankBlock& block(unsigned mask) const { return blocks_.at(mask - 1); }
  LowRankBlock& block(unsigned mask) { return blocks_.at(mask - 1); }

  /// Visits every parameter span in flatten order.
  template <class F>
  void for_each_segment(F&& f) {
    if (is_leaf()) {
      f(std::span<double>(leaf_));
      return;
    }
    for (auto& b : blocks_) f(b.values());
    for (auto& c : children_) c.for_each_segment(f);
  }
  template <class F>
  void for_each_segment(F&& f) const {
    if (is_leaf()) {
      f(std::span<const double>(leaf_));
      return;
    }
    for (const auto& b : blocks_) f(b.values());
    for (const auto& c : children_) c.for_each_segment(f);
  }

  friend bool operator==(const HKernel&, const HKernel&) = default;

 private:
  void build() {
    if (side_ <= leaf_size_) {
      leaf_.assign(ipow(side_, order_), 0.0);
      return;
    }
    const std::size_t half = side_ / 2;
    blocks_.reserve(num_masks() - 2);
    for (unsigned mask = 1; mask + 1 < num_masks(); ++mask)
      blocks_.emplace_back(rank_, order_, half);
    children_.reserve(2);
    children_.push_back(HKernel(order_, half, rank_, leaf_size_));
    children_.push_back(HKernel(order_, half, rank_, leaf_size_));
  }

  int order_ = 2;
  std::size_t side_ = 0;
  int rank_ = 1;
  std::size_t leaf_size_ = 2;
  std::vector<double> leaf_;
  std::vector<LowRankBlock> blocks_;
  std::vector<HKernel> children_;
};

inline HKernel hk_zeros(int order, std::size_t side, int rank, std::size_t leaf_size) {
  return HKernel::zeros(order, side, rank, leaf_size);
}

inline HKernel hk_random(int order, std::size_t side, int rank, std::size_t leaf_size,
                         double scale, std::uint64_t seed) {
  return HKernel::random(order, side, rank, leaf_size, scale, seed);
}

namespace detail {

inline std::size_t half_of(unsigned mask, int axis) { return (mask >> axis) & 1u; }

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

/// Hands out consecutive spans of a flat parameter vector.
class ParamCursor {
 public:
  explicit ParamCursor(std::span<double> all) : rest_(all) {}
  std::span<double> take(std::size_t n) {
    if (n > rest_.size()) throw std::logic_error("parameter cursor overrun");
    auto s = rest_.first(n);
    rest_ = rest_.subspan(n);
    return s;
  }
  bool exhausted() const { return rest_.empty(); }

 private:
  std::span<double> rest_;
};

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Per-sample evaluation.

inline double hk_form(const HKernel& node, std::span<const double> w, OpCounter* counter) {
  if (node.is_leaf()) return contract_all(node.leaf_values(), node.order(), node.side(), w, counter);
  const std::size_t h = node.side() / 2;
  double total = hk_form(node.child(0), w.first(h), counter) +
                 hk_form(node.child(1), w.subspan(h, h), counter);
  const int d = node.order();
  for (unsigned mask = 1; mask < node.diagonal_mask(); ++mask) {
    const auto& b = node.block(mask);
    for (int g = 0; g < b.rank(); ++g) {
      double prod = 1.0;
      for (int a = 0; a < d; ++a) prod *= dot(b.factor(g, a), w.subspan(half_of(mask, a) * h, h));
      count_ops(counter, static_cast<std::size_t>(d) * h + 1);
      total += prod;
    }
  }
  return total;
}

inline void hk_form_grad(const HKernel& node, std::span<const double> w, double upstream,
                         ParamCursor& out) {
  if (node.is_leaf()) {
    auto dst = out.take(node.leaf_values().size());
    std::vector<double> tmp(dst.size());
    outer_power(tmp, node.order(), node.side(), w, upstream);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += tmp[i];
    return;
  }
  const std::size_t h = node.side() / 2;
  const int d = node.order();
  std::vector<double> ip(static_cast<std::size_t>(d));
  for (unsigned mask = 1; mask < node.diagonal_mask(); ++mask) {
    const auto& b = node.block(mask);
    auto dst = out.take(b.values().size());
    for (int g = 0; g < b.rank(); ++g) {
      for (int a = 0; a < d; ++a)
        ip[a] = dot(b.factor(g, a), w.subspan(half_of(mask, a) * h, h));
      for (int a = 0; a < d; ++a) {
        double others = upstream;
        for (int c = 0; c < d; ++c)
          if (c != a) others *= ip[c];
        auto slice = w.subspan(half_of(mask, a) * h, h);
        double* g_u = dst.data() + (static_cast<std::size_t>(g) * d + a) * h;
        for (std::size_t i = 0; i < h; ++i) g_u[i] += others * slice[i];
      }
    }
  }
  hk_form_grad(node.child(0), w.first(h), upstream, out);
  hk_form_grad(node.child(1), w.subspan(h, h), upstream, out);
}

// Order-2 only. Axis 0 indexes rows, axis 1 columns.
inline void hk_matvec(const HKernel& node, std::span<const double> x, std::span<double> y) {
  if (node.is_leaf()) {
    const std::size_t s = node.side();
    auto leaf = node.leaf_values();
    for (std::size_t i = 0; i < s; ++i) y[i] += dot(leaf.subspan(i * s, s), x);
    return;
  }
  const std::size_t h = node.side() / 2;
  hk_matvec(node.child(0), x.first(h), y.first(h));
  hk_matvec(node.child(1), x.subspan(h, h), y.subspan(h, h));
  for (unsigned mask = 1; mask <= 2; ++mask) {
    const auto& b = node.block(mask);
    auto xs = x.subspan(half_of(mask, 1) * h, h);
    auto ys = y.subspan(half_of(mask, 0) * h, h);
    for (int g = 0; g < b.rank(); ++g) {
      const double c = dot(b.factor(g, 1), xs);
      auto u = b.factor(g, 0);
      for (std::size_t i = 0; i < h; ++i) ys[i] += c * u[i];
    }
  }
}

/// Chain rule from a gradient with respect to the materialized matrix
/// (dense_grad, side x side at `offset`) to the stored parameters.
inline void hk_pullback(const HKernel& node, const RowMajorMatrix& dense_grad, std::size_t offset,
                        ParamCursor& out) {
  const auto s = static_cast<Eigen::Index>(node.side());
  const auto o = static_cast<Eigen::Index>(offset);
  if (node.is_leaf()) {
    auto dst = out.take(node.leaf_values().size());
    Eigen::Map<RowMajorMatrix>(dst.data(), s, s) += dense_grad.block(o, o, s, s);
    return;
  }
  const auto h = s / 2;
  for (unsigned mask = 1; mask <= 2; ++mask) {
    const auto& b = node.block(mask);
    auto dst = out.take(b.values().size());
    const auto sub = dense_grad.block(o + static_cast<Eigen::Index>(half_of(mask, 0)) * h,
                                      o + static_cast<Eigen::Index>(half_of(mask, 1)) * h, h, h);
    for (int g = 0; g < b.rank(); ++g) {
      Eigen::Map<const Eigen::VectorXd> u(b.factor(g, 0).data(), h);
      Eigen::Map<const Eigen::VectorXd> v(b.factor(g, 1).data(), h);
      Eigen::Map<Eigen::VectorXd> gu(dst.data() + (2 * g) * h, h);
      Eigen::Map<Eigen::VectorXd> gv(dst.data() + (2 * g + 1) * h, h);
      gu += sub * v;
      gv += sub.transpose() * u;
    }
  }
  hk_pullback(node.child(0), dense_grad, offset, out);
  hk_pullback(node.child(1), dense_grad, offset + node.side() / 2, out);
}

/// Adds node's entries into `dense` (side n, order d) at diagonal offset.
inline void hk_scatter(const HKernel& node, DenseKernel& dense, std::size_t offset) {
  const int d = node.order();
  const std::size_t n = dense.side();
  std::vector<std::size_t> idx(static_cast<std::size_t>(d));
  auto add_tensor = [&](std::span<const double> local, std::size_t side,
                        std::span<const std::size_t> starts) {
    for (std::size_t lin = 0; lin < local.size(); ++lin) {
      std::size_t rem = lin;
      std::size_t pos = 0;
      std::size_t stride = 1;
      for (int a = d - 1; a >= 0; --a) {
        pos += (starts[a] + rem % side) * stride;
        rem /= side;
        stride *= n;
      }
      dense.values()[pos] += local[lin];
    }
  };
  if (node.is_leaf()) {
    std::fill(idx.begin(), idx.end(), offset);
    add_tensor(node.leaf_values(), node.side(), idx);
    return;
  }
  const std::size_t h = node.side() / 2;
  for (unsigned mask = 1; mask < node.diagonal_mask(); ++mask) {
    for (int a = 0; a < d; ++a) idx[a] = offset + half_of(mask, a) * h;
    const DenseKernel local = node.block(mask).to_dense();
    add_tensor(local.values(), h, idx);
  }
  hk_scatter(node.child(0), dense, offset);
  hk_scatter(node.child(1), dense, offset + h);
}

// ---------------------------------------------------------------------------
// Batched evaluation. `windows` holds one window per row; columns are lags.

// Factor vectors of a split node's off-diagonal blocks, grouped by the half
// of the node each one acts on. Group q = (mask order, rank index) has its
// axis-a vector in column slot[q d + a] of half[half_of(mask, a)].
struct NodeFactors {
  Eigen::MatrixXd half[2];
  std::vector<std::pair<int, Eigen::Index>> slot;
};

inline NodeFactors node_factors(const HKernel& node) {
  const auto h = static_cast<Eigen::Index>(node.side() / 2);
  const int d = node.order();
  NodeFactors nf;
  Eigen::Index count[2] = {0, 0};
  for (unsigned mask = 1; mask < node.diagonal_mask(); ++mask)
    for (int g = 0; g < node.rank(); ++g)
      for (int a = 0; a < d; ++a) {
        const int side = static_cast<int>(half_of(mask, a));
        nf.slot.emplace_back(side, count[side]++);
      }
  nf.half[0].resize(h, count[0]);
  nf.half[1].resize(h, count[1]);
  std::size_t c = 0;
  for (unsigned mask = 1; mask < node.diagonal_mask(); ++mask) {
    const auto& b = node.block(mask);
    for (int g = 0; g < b.rank(); ++g)
      for (int a = 0; a < d; ++a, ++c)
        nf.half[nf.slot[c].first].col(nf.slot[c].second) =
            Eigen::Map<const Eigen::VectorXd>(b.factor(g, a).data(), h);
  }
  return nf;
}

// One node of a kernel in preorder, with its factors gathered once per call
// and scratch space reused across row chunks.
struct BatchNode {
  const HKernel* node;
  Eigen::Index offset;      // first lag covered by the node
  std::size_t param_offset;  // start of the node's own blocks or leaf values
  NodeFactors nf;
  Eigen::MatrixXd proj[2], others[2], full[2];
  Eigen::VectorXd weighted;
};

inline void build_batch_plan(const HKernel& node, Eigen::Index offset, std::size_t& pos,
                             std::vector<BatchNode>& plan) {
  plan.push_back({&node, offset, pos, {}, {}, {}, {}, {}});
  if (node.is_leaf()) {
    pos += node.leaf_values().size();
    return;
  }
  plan.back().nf = node_factors(node);
  for (unsigned mask = 1; mask < node.diagonal_mask(); ++mask) pos += node.block(mask).values().size();
  const auto h = static_cast<Eigen::Index>(node.side() / 2);
  build_batch_plan(node.child(0), offset, pos, plan);
  build_batch_plan(node.child(1), offset + h, pos, plan);
}

inline std::vector<BatchNode> batch_plan(const HKernel& root) {
  std::vector<BatchNode> plan;
  std::size_t pos = 0;
  build_batch_plan(root, 0, pos, plan);
  return plan;
}

// Rows per chunk; keeps the per-node working set in cache.
inline constexpr Eigen::Index kRowChunk = 256;

inline void chunk_forms(std::vector<BatchNode>& plan, const Eigen::MatrixXd& windows, Eigen::VectorXd& acc) {
  for (auto& bn : plan) {
    const HKernel& node = *bn.node;
    const auto s = static_cast<Eigen::Index>(node.side());
    const int d = node.order();
    if (node.is_leaf()) {
      const auto wl = windows.middleCols(bn.offset, s);
      if (d == 2) {
        Eigen::Map<const RowMajorMatrix> leaf(node.leaf_values().data(), s, s);
        acc += ((wl * leaf.transpose()).cwiseProduct(wl)).rowwise().sum();
      } else {
        std::vector<double> w(static_cast<std::size_t>(s));
        for (Eigen::Index r = 0; r < windows.rows(); ++r) {
          for (Eigen::Index i = 0; i < s; ++i) w[static_cast<std::size_t>(i)] = wl(r, i);
          acc[r] += contract_all(node.leaf_values(), d, node.side(), w, nullptr);
        }
      }
      continue;
    }
    const auto h = s / 2;
    bn.proj[0].noalias() = windows.middleCols(bn.offset, h) * bn.nf.half[0];
    bn.proj[1].noalias() = windows.middleCols(bn.offset + h, h) * bn.nf.half[1];
    auto column = [&](std::size_t c) { return bn.proj[bn.nf.slot[c].first].col(bn.nf.slot[c].second); };
    const auto du = static_cast<std::size_t>(d);
    for (std::size_t base = 0; base < bn.nf.slot.size(); base += du) {
      if (d == 2) {
        acc += column(base).cwiseProduct(column(base + 1));
        continue;
      }
      bn.weighted = column(base);
      for (std::size_t a = 1; a < du; ++a) bn.weighted.array() *= column(base + a).array();
      acc += bn.weighted;
    }
  }
}

inline void chunk_form_grads(std::vector<BatchNode>& plan, const Eigen::MatrixXd& windows,
                             const Eigen::VectorXd& upstream, std::span<double> out) {
  for (auto& bn : plan) {
    const HKernel& node = *bn.node;
    const auto s = static_cast<Eigen::Index>(node.side());
    const int d = node.order();
    if (node.is_leaf()) {
      auto dst = out.subspan(bn.param_offset, node.leaf_values().size());
      const auto wl = windows.middleCols(bn.offset, s);
      if (d == 2) {
        Eigen::Map<RowMajorMatrix> g(dst.data(), s, s);
        if (s <= 8) {
          for (Eigen::Index i = 0; i < s; ++i) {
            bn.weighted = wl.col(i).cwiseProduct(upstream);
            for (Eigen::Index j = 0; j < s; ++j) g(i, j) += bn.weighted.dot(wl.col(j));
          }
        } else {
          g += wl.transpose() * (upstream.asDiagonal() * wl);
        }
      } else {
        std::vector<double> w(static_cast<std::size_t>(s));
        std::vector<double> tmp(dst.size());
        for (Eigen::Index r = 0; r < windows.rows(); ++r) {
          for (Eigen::Index i = 0; i < s; ++i) w[static_cast<std::size_t>(i)] = wl(r, i);
          outer_power(tmp, d, node.side(), w, upstream[r]);
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += tmp[i];
        }
      }
      continue;
    }
    const auto h = s / 2;
    const auto w0 = windows.middleCols(bn.offset, h);
    const auto w1 = windows.middleCols(bn.offset + h, h);
    bn.proj[0].noalias() = w0 * bn.nf.half[0];
    bn.proj[1].noalias() = w1 * bn.nf.half[1];
    // Column for (group, axis a) = upstream times the projections of the group's other axes.
    for (int side = 0; side < 2; ++side) bn.others[side].resize(bn.proj[side].rows(), bn.proj[side].cols());
    const auto du = static_cast<std::size_t>(d);
    const auto& slot = bn.nf.slot;
    for (std::size_t base = 0; base < slot.size(); base += du)
      for (std::size_t a = 0; a < du; ++a) {
        auto col = bn.others[slot[base + a].first].col(slot[base + a].second);
        col = upstream;
        for (std::size_t c = 0; c < du; ++c)
          if (c != a) col.array() *= bn.proj[slot[base + c].first].col(slot[base + c].second).array();
      }
    bn.full[0].noalias() = w0.transpose() * bn.others[0];
    bn.full[1].noalias() = w1.transpose() * bn.others[1];
    // Block values are stored [mask][g][a][i], the same order as `slot`.
    for (std::size_t c = 0; c < slot.size(); ++c) {
      Eigen::Map<Eigen::VectorXd> gu(out.data() + bn.param_offset + c * static_cast<std::size_t>(h), h);
      gu += bn.full[slot[c].first].col(slot[c].second);
    }
  }
}

/// acc[r] = form of row r of `windows`.
inline void hk_forms(const HKernel& root, const Eigen::MatrixXd& windows, Eigen::VectorXd& acc) {
  auto plan = batch_plan(root);
  Eigen::VectorXd part;
  for (Eigen::Index r0 = 0; r0 < windows.rows(); r0 += kRowChunk) {
    const auto len = std::min(kRowChunk, windows.rows() - r0);
    const Eigen::MatrixXd chunk = windows.middleRows(r0, len);
    part.setZero(len);
    chunk_forms(plan, chunk, part);
    acc.segment(r0, len) += part;
  }
}

/// out += sum over rows r of upstream[r] * d(form of row r)/d(params).
inline void hk_add_form_grads(const HKernel& root, const Eigen::MatrixXd& windows,
                              const Eigen::VectorXd& upstream, std::span<double> out) {
  auto plan = batch_plan(root);
  for (Eigen::Index r0 = 0; r0 < windows.rows(); r0 += kRowChunk) {
    const auto len = std::min(kRowChunk, windows.rows() - r0);
    const Eigen::MatrixXd chunk = windows.middleRows(r0, len);
    const Eigen::VectorXd up = upstream.segment(r0, len);
    chunk_form_grads(plan, chunk, up, out);
  }
}

// Order-2 batched linear map: outputs += inputs * K^T (one vector per row).
inline void hk_apply(const HKernel& node, const Eigen::MatrixXd& inputs, Eigen::Index offset,
                     Eigen::MatrixXd& outputs) {
  const auto s = static_cast<Eigen::Index>(node.side());
  if (node.is_leaf()) {
    Eigen::Map<const RowMajorMatrix> leaf(node.leaf_values().data(), s, s);
    outputs.middleCols(offset, s).noalias() += inputs.middleCols(offset, s) * leaf.transpose();
    return;
  }
  const auto h = s / 2;
  hk_apply(node.child(0), inputs, offset, outputs);
  hk_apply(node.child(1), inputs, offset + h, outputs);
  for (unsigned mask = 1; mask <= 2; ++mask) {
    const auto& b = node.block(mask);
    const Eigen::Index rows = offset + static_cast<Eigen::Index>(half_of(mask, 0)) * h;
    const Eigen::Index cols = offset + static_cast<Eigen::Index>(half_of(mask, 1)) * h;
    for (int g = 0; g < b.rank(); ++g) {
      Eigen::Map<const Eigen::VectorXd> u(b.factor(g, 0).data(), h);
      Eigen::Map<const Eigen::VectorXd> v(b.factor(g, 1).data(), h);
      outputs.middleCols(rows, h).noalias() += (inputs.middleCols(cols, h) * v) * u.transpose();
    }
  }
}

inline void hk_project(HKernel& node, const RowMajorMatrix& dense, Eigen::Index offset) {
  const auto s = static_cast<Eigen::Index>(node.side());
  if (node.is_leaf()) {
    Eigen::Map<RowMajorMatrix>(node.leaf_values().data(), s, s) = dense.block(offset, offset, s, s);
    return;
  }
  const auto h = s / 2;
  for (unsigned mask = 1; mask <= 2; ++mask) {
    auto& b = node.block(mask);
    const Eigen::MatrixXd sub =
        dense.block(offset + static_cast<Eigen::Index>(half_of(mask, 0)) * h,
                    offset + static_cast<Eigen::Index>(half_of(mask, 1)) * h, h, h);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sub, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    for (int g = 0; g < b.rank(); ++g) {
      auto u = b.factor(g, 0);
      auto v = b.factor(g, 1);
      if (g >= sv.size()) {
        std::fill(u.begin(), u.end(), 0.0);
        std::fill(v.begin(), v.end(), 0.0);
        continue;
      }
      const double root = std::sqrt(sv[g]);
      for (Eigen::Index i = 0; i < h; ++i) {
        u[static_cast<std::size_t>(i)] = root * svd.matrixU()(i, g);
        v[static_cast<std::size_t>(i)] = root * svd.matrixV()(i, g);
      }
    }
  }
  hk_project(node.child(0), dense, offset);
  hk_project(node.child(1), dense, offset + h);
}

}  // namespace detail

}  // namespace cgid
