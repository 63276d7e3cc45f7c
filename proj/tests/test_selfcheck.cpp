#include <gtest/gtest.h>

#include "objslam/selfcheck.hpp"

using namespace objslam;

TEST(SelfCheck, AllJacobiansPass) {
  const auto r = check_jacobians(1, 30);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.trials, 30u);
  ASSERT_EQ(r.entries.size(), 10u);
  for (const auto& e : r.entries) EXPECT_LT(e.max_error, 1e-6) << e.name;
}

TEST(SelfCheck, NegativeControlFails) {
  const auto r = check_jacobians(1, 5, true);
  EXPECT_FALSE(r.passed);
  bool flagged = false;
  for (const auto& e : r.entries) {
    if (e.name == "riekf.H") {
      flagged = true;
      EXPECT_GT(e.max_error, 0.1);
    }
  }
  EXPECT_TRUE(flagged);
}

TEST(SelfCheck, ReportListsEveryBlock) {
  const auto text = check_jacobians(2, 3).format();
  for (const char* name : {"riekf.F", "riekf.G", "riekf.H", "riekf.aug_state", "riekf.aug_noise",
                           "stdekf.F", "stdekf.G", "stdekf.H", "stdekf.aug_state",
                           "stdekf.aug_noise"}) {
    EXPECT_NE(text.find(name), std::string::npos) << name;
  }
  EXPECT_NE(text.find("PASS"), std::string::npos);
}
