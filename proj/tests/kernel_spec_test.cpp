#include <gtest/gtest.h>

#include "cgid/kernel.hpp"
#include "oracles.hpp"

namespace cgid {
namespace {

KernelSpec hier(int d, std::size_t n, int k, std::size_t leaf) {
  return {Repr::hierarchical, d, n, k, leaf};
}

std::size_t enumerate_stored(const KernelSpec& spec) {
  std::size_t total = 0;
  detail::for_each_segment(make_zero_kernel(spec), [&](std::span<const double> s) { total += s.size(); });
  return total;
}

TEST(ParamCount, SyntheticOperatorCounts) {
  EXPECT_EQ(param_count(KernelSpec{Repr::dense, 2, 16}), 256u);
  EXPECT_EQ(param_count(KernelSpec{Repr::toeplitz_sym, 2, 16}), 16u);
  EXPECT_EQ(param_count(hier(2, 16, 1, 2)), 128u);
}

TEST(ParamCount, FilamentMemoryWithLeafTwo) {
  // A(p) = 2k 2^p + 2 A(p-1), A(1) = 4: 4, 16, 48, 128, 320, 768, 1792.
  EXPECT_EQ(param_count(hier(2, 128, 1, 2)), 1792u);
  EXPECT_EQ(enumerate_stored(hier(2, 128, 1, 2)), 1792u);
}

TEST(ParamCount, LeafOfSideTwoIsDense) {
  for (int k = 1; k <= 4; ++k) EXPECT_EQ(param_count(hier(2, 2, k, 2)), 4u);
}

TEST(ParamCount, LeafSizeOneMatchesClosedForm) {
  EXPECT_EQ(param_count(hier(2, 128, 1, 1)), 1920u);
}

TEST(ParamCount, MatchesStructureEnumeration) {
  for (int d = 2; d <= 4; ++d)
    for (std::size_t n = 1; n <= 64; n *= 2)
      for (int k = 1; k <= 3; ++k)
        for (std::size_t leaf = 1; leaf <= n && leaf <= 4; leaf *= 2) {
          const auto spec = hier(d, n, k, leaf);
          EXPECT_EQ(param_count(spec), enumerate_stored(spec)) << d << " " << n << " " << k << " " << leaf;
        }
  EXPECT_EQ(param_count(KernelSpec{Repr::dense, 3, 8}), enumerate_stored(KernelSpec{Repr::dense, 3, 8}));
}

TEST(ParamCount, Errors) {
  EXPECT_THROW(param_count(KernelSpec{Repr::dense, 2, 12}), std::invalid_argument);
  EXPECT_THROW(param_count(hier(2, 12, 1, 2)), std::invalid_argument);
  EXPECT_THROW(param_count(KernelSpec{Repr::toeplitz_sym, 3, 16}), std::invalid_argument);
  EXPECT_THROW(param_count(hier(2, 2, 1, 4)), std::invalid_argument);
}

TEST(ClosedForm, KnownValues) {
  EXPECT_EQ(param_bound_closed_form(7, 2, 1), 1920u);
  EXPECT_EQ(param_bound_closed_form(0, 2, 1), 1u);
  EXPECT_EQ(param_bound_closed_form(4, 2, 1), 144u);
}

TEST(ClosedForm, SolvesCorrectedRecurrence) {
  for (int p = 0; p <= 10; ++p)
    for (int d = 2; d <= 4; ++d)
      for (int k = 1; k <= 3; ++k)
        EXPECT_EQ(param_bound_closed_form(p, d, k), oracle::unrolled_recurrence(p, d, k)) << p << d << k;
}

TEST(ClosedForm, MatrixCaseReducesToTwoKpPlusOne) {
  for (int p = 0; p <= 10; ++p)
    for (int k = 1; k <= 3; ++k)
      EXPECT_EQ(param_bound_closed_form(p, 2, k), (std::uint64_t{1} << p) * (2u * k * p + 1));
}

TEST(ClosedForm, BoundsExactCountWithUnitLeaves) {
  for (int d = 2; d <= 4; ++d)
    for (int p = 0; p <= 10; ++p)
      for (int k = 1; k <= 3; ++k)
        EXPECT_LE(param_count(hier(d, std::size_t{1} << p, k, 1)), param_bound_closed_form(p, d, k));
}

TEST(ParamCount, SyntheticRatio) {
  const auto t = param_count(KernelSpec{Repr::toeplitz_sym, 2, 16});
  EXPECT_EQ(param_count(hier(2, 16, 1, 2)), 8 * t);
  EXPECT_EQ(param_count(KernelSpec{Repr::dense, 2, 16}), 16 * t);
}

TEST(Repr, ParseRoundTrip) {
  for (auto r : {Repr::dense, Repr::hierarchical, Repr::toeplitz_sym})
    EXPECT_EQ(parse_repr(to_string(r)), r);
  EXPECT_THROW(parse_repr("sparse"), std::invalid_argument);
}

}  // namespace
}  // namespace cgid
