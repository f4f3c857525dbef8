#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "cgl/assignment.hpp"
#include "cgl/random.hpp"

using namespace cgl;

TEST(Hungarian, SmallExamples) {
  const Assignment a = hungarian(CostMatrix{{4, 1, 3}, {2, 0, 5}, {3, 2, 2}});
  EXPECT_EQ(a.perm, (std::vector<std::size_t>{1, 0, 2}));
  EXPECT_DOUBLE_EQ(a.total_cost, 5.0);

  const Assignment id = hungarian(CostMatrix{{0, 1}, {1, 0}});
  EXPECT_EQ(id.perm, (std::vector<std::size_t>{0, 1}));
  const Assignment swap = hungarian(CostMatrix{{1, 0}, {0, 1}});
  EXPECT_EQ(swap.perm, (std::vector<std::size_t>{1, 0}));
  EXPECT_DOUBLE_EQ(swap.total_cost, 0.0);
}

TEST(Hungarian, SingleAndEmpty) {
  EXPECT_EQ(hungarian(CostMatrix{{7.5}}).perm, (std::vector<std::size_t>{0}));
  EXPECT_TRUE(hungarian(CostMatrix(0, {})).perm.empty());
}

TEST(Hungarian, NegativeCosts) {
  const Assignment a = hungarian(CostMatrix{{-1, -5}, {-4, -1}});
  EXPECT_EQ(a.perm, (std::vector<std::size_t>{1, 0}));
  EXPECT_DOUBLE_EQ(a.total_cost, -9.0);
}

TEST(Hungarian, TiesBreakLexicographically) {
  const Assignment a = hungarian(CostMatrix{{1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
  EXPECT_EQ(a.perm, (std::vector<std::size_t>{0, 1, 2}));
  // Rows 0 and 1 are identical, so (0, 1, 2) and (1, 0, 2) both cost 1.
  const Assignment b = hungarian(CostMatrix{{0, 1, 2}, {0, 1, 2}, {5, 5, 0}});
  EXPECT_EQ(b.perm, (std::vector<std::size_t>{0, 1, 2}));
  const Assignment c = hungarian(CostMatrix{{1, 0, 1}, {0, 1, 1}, {1, 1, 0}});
  EXPECT_EQ(c.perm, (std::vector<std::size_t>{1, 0, 2}));
}

TEST(Hungarian, AgreesWithBruteForceOnRandomMatrices) {
  Rng rng(2024);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.below(7);
    std::vector<double> costs(n * n);
    // Integer costs make ties common so the tie-break rule gets exercised.
    const bool integer = t % 2 == 0;
    for (double& c : costs) c = integer ? static_cast<double>(rng.below(4)) : rng.uniform(-3, 3);
    const CostMatrix m(n, costs);
    const Assignment fast = hungarian(m);
    const Assignment slow = brute_force_assignment(m);
    ASSERT_NEAR(fast.total_cost, slow.total_cost, 1e-9) << "trial " << t;
    ASSERT_EQ(fast.perm, slow.perm) << "trial " << t;
    ASSERT_DOUBLE_EQ(fast.total_cost, assignment_cost(m, fast.perm));
    std::vector<std::size_t> sorted = fast.perm;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(sorted[i], i);
  }
}

TEST(Hungarian, LargerMatricesBeatEveryTranspositionOfTheirResult) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 20;
    std::vector<double> costs(n * n);
    for (double& c : costs) c = rng.uniform();
    const CostMatrix m(n, costs);
    const Assignment a = hungarian(m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        std::vector<std::size_t> p = a.perm;
        std::swap(p[i], p[j]);
        ASSERT_GE(assignment_cost(m, p), a.total_cost - 1e-12);
      }
    }
  }
}

TEST(Hungarian, RejectsNonFiniteEntries) {
  try {
    hungarian(CostMatrix{{0, 1}, {std::nan(""), 2}});
    FAIL();
  } catch (const AssignmentError& e) {
    EXPECT_NE(std::string(e.what()).find("(1, 0)"), std::string::npos) << e.what();
  }
  EXPECT_THROW(hungarian(CostMatrix{{INFINITY}}), AssignmentError);
}

TEST(CostMatrix, RejectsBadShapes) {
  EXPECT_THROW(CostMatrix(2, std::vector<double>(3)), AssignmentError);
  EXPECT_THROW((CostMatrix{{1, 2}, {3}}), AssignmentError);
}

TEST(BruteForce, LimitedToNine) {
  EXPECT_THROW(brute_force_assignment(CostMatrix(10, std::vector<double>(100, 0.0))), AssignmentError);
}
