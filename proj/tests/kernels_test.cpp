#include <gtest/gtest.h>

#include <random>

#include "cgid/kernel.hpp"
#include "oracles.hpp"

namespace cgid {
namespace {

using oracle::random_vector;

std::vector<KernelSpec> small_specs() {
  std::vector<KernelSpec> specs;
  for (std::size_t n : {1u, 2u, 4u, 8u, 16u}) {
    specs.push_back({Repr::dense, 2, n});
    specs.push_back({Repr::toeplitz_sym, 2, n});
    if (n <= 8) specs.push_back({Repr::dense, 3, n});
    for (int k = 1; k <= 2; ++k)
      for (std::size_t leaf : {1u, 2u}) {
        if (n < leaf) continue;
        specs.push_back({Repr::hierarchical, 2, n, k, leaf});
        if (n <= 8) specs.push_back({Repr::hierarchical, 3, n, k, leaf});
      }
  }
  return specs;
}

TEST(HKernel, ZerosToDenseIsZero) {
  const auto d = to_dense(hk_zeros(2, 8, 1, 2));
  EXPECT_EQ(d.side(), 8u);
  for (double v : d.values()) EXPECT_EQ(v, 0.0);
}

TEST(HKernel, Structure) {
  const auto h = hk_zeros(3, 16, 2, 2);
  EXPECT_FALSE(h.is_leaf());
  EXPECT_EQ(h.num_blocks(), 6u);
  EXPECT_EQ(h.child(0).side(), 8u);
  EXPECT_EQ(h.block(1).side(), 8u);
  EXPECT_EQ(h.block(1).rank(), 2);
  // Every root-to-leaf path halves down to the leaf size.
  const HKernel* node = &h;
  while (!node->is_leaf()) node = &node->child(1);
  EXPECT_EQ(node->side(), 2u);
  EXPECT_THROW(hk_zeros(2, 12, 1, 2), std::invalid_argument);
  EXPECT_THROW(hk_zeros(2, 1, 1, 2), std::invalid_argument);
}

TEST(HKernel, RandomIsDeterministicAndFillsEveryScalar) {
  const auto a = hk_random(3, 8, 1, 2, 0.5, 42);
  const auto b = hk_random(3, 8, 1, 2, 0.5, 42);
  EXPECT_EQ(flatten(a), flatten(b));
  const auto p = flatten(a);
  EXPECT_EQ(p.size(), param_count(KernelSpec{Repr::hierarchical, 3, 8, 1, 2}));
  for (double x : p) {
    EXPECT_LE(std::abs(x), 0.5);
    EXPECT_NE(x, 0.0);
  }
  EXPECT_NE(flatten(hk_random(3, 8, 1, 2, 0.5, 43)), p);
}

TEST(ToDense, SingleSplitWithUnitFactors) {
  auto h = hk_zeros(2, 4, 1, 2);
  for (unsigned mask : {1u, 2u})
    for (int a = 0; a < 2; ++a)
      for (double& x : h.block(mask).factor(0, a)) x = 1.0;
  const auto d = to_dense(h);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(d(i, j), (i < 2) != (j < 2) ? 1.0 : 0.0);
}

TEST(ToDense, ToeplitzDefinition) {
  const SymToeplitz t({1.0, 2.0, 3.0});
  const auto d = to_dense(t);
  const double want[3][3] = {{1, 2, 3}, {2, 1, 2}, {3, 2, 1}};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(d(i, j), want[i][j]);
}

TEST(ToDense, MatchesTreeWalkOracle) {
  std::mt19937_64 rng(7);
  for (const auto& spec : small_specs()) {
    const auto k = oracle::random_kernel(spec, rng);
    const auto d = to_dense(k);
    oracle::for_each_index(spec.order, spec.side, [&](const std::vector<std::size_t>& idx) {
      EXPECT_NEAR(d.at(idx), oracle::entry(k, idx), 1e-14);
    });
  }
}

TEST(ToDense, SizeGuard) {
  EXPECT_THROW(to_dense(hk_zeros(4, 128, 1, 2)), std::length_error);
}

TEST(MultilinearForm, SingleDenseEntry) {
  DenseKernel d(2, 4);
  d(1, 3) = 1.0;
  const std::vector<double> w{0.5, -2.0, 3.0, 7.0};
  EXPECT_DOUBLE_EQ(multilinear_form(d, w), -2.0 * 7.0);
}

TEST(MultilinearForm, ZeroWindow) {
  std::mt19937_64 rng(1);
  for (const auto& spec : small_specs()) {
    const auto k = oracle::random_kernel(spec, rng);
    EXPECT_EQ(multilinear_form(k, std::vector<double>(spec.side, 0.0)), 0.0);
  }
}

TEST(MultilinearForm, ThirdOrderMatchesTripleLoop) {
  const auto h = hk_random(3, 8, 1, 2, 1.0, 99);
  std::mt19937_64 rng(3);
  const auto w = random_vector(8, rng);
  const auto d = to_dense(h);
  double want = 0.0;
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j)
      for (std::size_t l = 0; l < 8; ++l) want += d.at(std::vector<std::size_t>{i, j, l}) * w[i] * w[j] * w[l];
  EXPECT_LT(oracle::relative_error(multilinear_form(h, w), want), 1e-12);
}

TEST(MultilinearForm, AllReprsMatchBruteForce) {
  std::mt19937_64 rng(11);
  for (const auto& spec : small_specs()) {
    const auto k = oracle::random_kernel(spec, rng);
    const auto w = random_vector(spec.side, rng);
    EXPECT_LT(oracle::relative_error(multilinear_form(k, w), oracle::brute_form(k, w)), 1e-12)
        << to_string(spec.repr) << " d=" << spec.order << " n=" << spec.side;
  }
}

TEST(MultilinearForm, LengthMismatch) {
  EXPECT_THROW(multilinear_form(hk_zeros(2, 8, 1, 2), std::vector<double>(7)), std::invalid_argument);
}

TEST(MultilinearForm, WorkIsLinearInParameterCount) {
  std::mt19937_64 rng(5);
  for (int d = 2; d <= 4; ++d)
    for (std::size_t n : {8u, 32u, 128u}) {
      if (d == 4 && n > 32) continue;
      const KernelSpec spec{Repr::hierarchical, d, n, 2, 2};
      const auto k = oracle::random_kernel(spec, rng);
      OpCounter counter;
      multilinear_form(k, random_vector(n, rng), &counter);
      EXPECT_LE(counter.multiply_adds, 4 * param_count(spec)) << d << " " << n;
    }
  OpCounter dense_counter;
  multilinear_form(DenseKernel(3, 8), std::vector<double>(8, 1.0), &dense_counter);
  EXPECT_LE(dense_counter.multiply_adds, 4u * 512u);
}

TEST(Matvec, ZeroKernel) {
  const auto y = matvec(hk_zeros(2, 8, 1, 2), std::vector<double>(8, 3.0));
  for (double v : y) EXPECT_EQ(v, 0.0);
}

TEST(Matvec, ToeplitzIdentity) {
  std::vector<double> row(8, 0.0);
  row[0] = 1.0;
  std::mt19937_64 rng(2);
  const auto x = random_vector(8, rng);
  EXPECT_EQ(matvec(SymToeplitz(row), x), x);
}

TEST(Matvec, AllReprsMatchDenseOracle) {
  std::mt19937_64 rng(13);
  for (std::size_t n = 1; n <= 64; n *= 2) {
    std::vector<KernelSpec> specs{{Repr::dense, 2, n}, {Repr::toeplitz_sym, 2, n}};
    if (n >= 2) specs.push_back({Repr::hierarchical, 2, n, 1, 2});
    specs.push_back({Repr::hierarchical, 2, n, 3, 1});
    for (const auto& spec : specs) {
      const auto k = oracle::random_kernel(spec, rng);
      const auto x = random_vector(n, rng);
      EXPECT_LT(oracle::relative_error(matvec(k, x), oracle::brute_matvec(k, x)), 1e-12);
    }
  }
}

TEST(Matvec, Errors) {
  EXPECT_THROW(matvec(hk_zeros(3, 8, 1, 2), std::vector<double>(8)), std::invalid_argument);
  EXPECT_THROW(matvec(DenseKernel(2, 8), std::vector<double>(4)), std::invalid_argument);
}

TEST(Gradients, DenseClosedForms) {
  std::mt19937_64 rng(17);
  DenseKernel d(2, 4, random_vector(16, rng));
  const auto w = random_vector(4, rng);
  const auto g = grad_multilinear_form(d, w, 2.5);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(g[i * 4 + j], 2.5 * w[i] * w[j]);

  const auto x = random_vector(4, rng);
  const auto up = random_vector(4, rng);
  const auto gm = grad_matvec(d, x, up);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(gm[i * 4 + j], up[i] * x[j]);
}

TEST(Gradients, ToeplitzTiedEntries) {
  std::mt19937_64 rng(19);
  const SymToeplitz t(random_vector(8, rng));
  const auto x = random_vector(8, rng);
  const auto up = random_vector(8, rng);
  const auto g = grad_matvec(t, x, up);
  for (std::size_t m = 0; m < 8; ++m) {
    double want = 0.0;
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j)
        if ((i > j ? i - j : j - i) == m) want += up[i] * x[j];
    EXPECT_NEAR(g[m], want, 1e-13);
  }
}

TEST(Gradients, ZeroWindowGivesZeroGradient) {
  const auto h = hk_random(3, 8, 2, 2, 1.0, 5);
  for (double g : grad_multilinear_form(h, std::vector<double>(8, 0.0), 1.0)) EXPECT_EQ(g, 0.0);
}

TEST(Gradients, MatchFiniteDifferences) {
  std::mt19937_64 rng(23);
  for (const auto& spec : small_specs()) {
    const auto k = oracle::random_kernel(spec, rng);
    const auto w = random_vector(spec.side, rng);
    const double up = 1.7;
    const auto analytic = grad_multilinear_form(k, w, up);
    const auto numeric = oracle::fd_gradient(
        [&](std::span<const double> p) { return up * multilinear_form(unflatten(p, spec), w); },
        flatten(k));
    EXPECT_LT(oracle::max_scaled_error(analytic, numeric), 1e-5) << to_string(spec.repr);

    if (spec.order != 2) continue;
    const auto ups = random_vector(spec.side, rng);
    const auto gm = grad_matvec(k, w, ups);
    const auto nm = oracle::fd_gradient(
        [&](std::span<const double> p) {
          const auto y = matvec(unflatten(p, spec), w);
          double s = 0.0;
          for (std::size_t i = 0; i < y.size(); ++i) s += ups[i] * y[i];
          return s;
        },
        flatten(k));
    EXPECT_LT(oracle::max_scaled_error(gm, nm), 1e-5) << to_string(spec.repr);
  }
}

TEST(Batched, ManyRowsMatchPerSample) {
  std::mt19937_64 rng(31);
  for (const KernelSpec spec : {KernelSpec{Repr::hierarchical, 2, 32, 2, 2}, KernelSpec{Repr::hierarchical, 3, 8, 2, 1},
                                KernelSpec{Repr::hierarchical, 2, 32, 1, 16}}) {
    const auto k = oracle::random_kernel(spec, rng);
    const Eigen::Index rows = 600;
    const Eigen::MatrixXd windows = Eigen::MatrixXd::Random(rows, static_cast<Eigen::Index>(spec.side));
    const Eigen::VectorXd up = Eigen::VectorXd::Random(rows);
    const Eigen::VectorXd batch = forms(k, windows);
    std::vector<double> gsum(param_count(k), 0.0);
    add_form_grads(k, windows, up, gsum);
    std::vector<double> want_g(param_count(k), 0.0);
    for (Eigen::Index r = 0; r < rows; ++r) {
      std::vector<double> w(windows.cols());
      for (Eigen::Index c = 0; c < windows.cols(); ++c) w[c] = windows(r, c);
      EXPECT_NEAR(batch[r], oracle::brute_form(k, w), 1e-11 * (1 + std::abs(batch[r])));
      const auto g = grad_multilinear_form(k, w, up[r]);
      for (std::size_t i = 0; i < g.size(); ++i) want_g[i] += g[i];
    }
    EXPECT_LT(oracle::relative_error(gsum, want_g), 1e-12);
  }
}

TEST(Batched, FormsAndGradsMatchPerSample) {
  std::mt19937_64 rng(29);
  for (const auto& spec : small_specs()) {
    const auto k = oracle::random_kernel(spec, rng);
    const Eigen::Index rows = 5;
    Eigen::MatrixXd windows(rows, static_cast<Eigen::Index>(spec.side));
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < windows.cols(); ++c) windows(r, c) = random_vector(1, rng)[0];
    Eigen::VectorXd up(rows);
    for (Eigen::Index r = 0; r < rows; ++r) up[r] = random_vector(1, rng)[0];

    const Eigen::VectorXd batch = forms(k, windows);
    std::vector<double> gsum(param_count(k), 0.0);
    add_form_grads(k, windows, up, gsum);
    std::vector<double> want_g(param_count(k), 0.0);
    for (Eigen::Index r = 0; r < rows; ++r) {
      std::vector<double> w(windows.cols());
      for (Eigen::Index c = 0; c < windows.cols(); ++c) w[c] = windows(r, c);
      EXPECT_LT(oracle::relative_error(batch[r], multilinear_form(k, w)), 1e-12);
      const auto g = grad_multilinear_form(k, w, up[r]);
      for (std::size_t i = 0; i < g.size(); ++i) want_g[i] += g[i];
    }
    EXPECT_LT(oracle::relative_error(gsum, want_g), 1e-12) << to_string(spec.repr);

    if (spec.order != 2) continue;
    const Eigen::MatrixXd y = matvec_rows(k, windows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      std::vector<double> x(windows.cols());
      for (Eigen::Index c = 0; c < windows.cols(); ++c) x[c] = windows(r, c);
      const auto want = matvec(k, x);
      for (Eigen::Index c = 0; c < windows.cols(); ++c) EXPECT_NEAR(y(r, c), want[c], 1e-12);
    }
  }
}

TEST(Flatten, RoundTripOnRandomVectors) {
  std::mt19937_64 rng(31);
  for (const auto& spec : small_specs()) {
    const auto p = random_vector(param_count(spec), rng);
    EXPECT_EQ(flatten(unflatten(p, spec)), p);
  }
}

TEST(Flatten, ZerosFlattenToZeros) {
  const auto p = flatten(hk_zeros(2, 16, 1, 2));
  EXPECT_EQ(p.size(), 128u);
  for (double x : p) EXPECT_EQ(x, 0.0);
}

TEST(Flatten, LayoutIsContiguousAndStable) {
  const KernelSpec spec{Repr::hierarchical, 2, 8, 1, 2};
  const auto layout = param_layout(spec);
  ASSERT_EQ(layout, param_layout(spec));
  std::size_t pos = 0;
  for (const auto& seg : layout) {
    EXPECT_EQ(seg.offset, pos);
    pos += seg.size;
  }
  EXPECT_EQ(pos, param_count(spec));
  EXPECT_EQ(layout.front().label, "root.block1");
  EXPECT_EQ(layout.back().label, "root.1.1.leaf");
}

TEST(Flatten, SizeMismatch) {
  EXPECT_THROW(unflatten(std::vector<double>(10), KernelSpec{Repr::dense, 2, 4}), std::invalid_argument);
}

TEST(Project, ExactLowRankIsFixedPoint) {
  const auto h = hk_random(2, 16, 2, 2, 1.0, 37);
  const auto d = to_dense(h);
  const auto back = to_dense(project_to_hierarchical(d, 2, 2));
  EXPECT_LT(oracle::relative_error(back.values(), d.values()), 1e-10);
}

TEST(Project, FullRankReconstructsExactly) {
  std::mt19937_64 rng(41);
  const DenseKernel d(2, 16, random_vector(256, rng));
  const auto back = to_dense(project_to_hierarchical(d, 8, 2));
  EXPECT_LT(oracle::relative_error(back.values(), d.values()), 1e-12);
}

TEST(Project, RejectsHigherOrder) {
  EXPECT_THROW(project_to_hierarchical(DenseKernel(3, 4), 1, 2), std::invalid_argument);
}

}  // namespace
}  // namespace cgid
