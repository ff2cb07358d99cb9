#include <gtest/gtest.h>

#include <set>
#include <string>

#include "splitpit/error.hpp"
#include "splitpit/gradcheck.hpp"

namespace splitpit {
namespace {

TEST(RunGradientChecks, EveryCheckIsWithinTolerance) {
  const auto results = run_gradient_checks(GradCheckConfig{});
  ASSERT_GE(results.size(), 30u);
  std::set<std::string> names;
  for (const auto& r : results) {
    EXPECT_LT(r.max_rel_error, 1e-4) << r.name;
    EXPECT_TRUE(names.insert(r.name).second) << "duplicate check " << r.name;
  }
}

TEST(RunGradientChecks, DeterministicForASeed) {
  GradCheckConfig c;
  c.seed = 5;
  const auto a = run_gradient_checks(c);
  const auto b = run_gradient_checks(c);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].max_rel_error, b[i].max_rel_error);
  }
}

TEST(GradCheckConfig, Validation) {
  GradCheckConfig c;
  EXPECT_NO_THROW(c.validate());
  c.eps = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = GradCheckConfig{};
  c.hidden = 0;
  EXPECT_THROW(c.validate(), ValidationError);
}

}  // namespace
}  // namespace splitpit
