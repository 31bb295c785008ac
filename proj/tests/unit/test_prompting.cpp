#include <gtest/gtest.h>

#include <set>

#include "probekit/prompting.hpp"
#include "test_support.hpp"

namespace probekit {
namespace {

TEST(BuiltinTemplates, FiveInCanonicalOrder) {
  const auto& t = builtin_templates();
  ASSERT_EQ(t.size(), 5u);
  EXPECT_EQ(t[0].pattern, "{}");
  EXPECT_EQ(t[1].pattern, "Consider the instantaneous pleasantness of \"{}\"");
  EXPECT_EQ(t[2].pattern, "How pleasant is the following scenario? \"{}\"");
  EXPECT_EQ(t[3].pattern, "\"{}\" is better than");
  EXPECT_EQ(t[4].pattern, "\"{}\" is more pleasant than");
  std::set<std::string> ids;
  for (const auto& tpl : t) {
    EXPECT_NO_THROW(validate_template(tpl));
    ids.insert(tpl.id);
  }
  EXPECT_EQ(ids.size(), 5u);
}

TEST(ApplyTemplate, IdentityCopiesScenario) {
  EXPECT_EQ(apply_template(builtin_templates()[0], Scenario{"x"}), "x");
}

TEST(ApplyTemplate, InstantaneousPleasantnessExpansion) {
  const Scenario s{"I ate an apple since it looked tasty and sweet, but it was sour."};
  EXPECT_EQ(apply_template(builtin_templates()[1], s),
            "Consider the instantaneous pleasantness of \"I ate an apple since it looked tasty and sweet, but it "
            "was sour.\"");
}

TEST(ApplyTemplate, NoTrailingSpaceAdded) {
  EXPECT_EQ(apply_template(builtin_templates()[4], Scenario{"s"}), "\"s\" is more pleasant than");
}

TEST(ApplyTemplate, PlaceholderCountMustBeOne) {
  EXPECT_PK_ERROR(apply_template(PromptTemplate{"none", "no placeholder"}, Scenario{"s"}),
                  ErrorKind::InvalidTemplate);
  EXPECT_PK_ERROR(validate_template(PromptTemplate{"two", "{} and {}"}), ErrorKind::InvalidTemplate);
}

TEST(ApplyTemplate, PlaceholderInsideScenarioIsNotExpanded) {
  EXPECT_EQ(apply_template(PromptTemplate{"q", "<{}>"}, Scenario{"a {} b"}), "<a {} b>");
}

TEST(ApplyTemplate, InjectiveAndContainsScenarioProperty) {
  testing::for_all(200, 21, [](std::mt19937_64& rng, int) {
    const Scenario a{testing::random_text(rng)};
    Scenario b{testing::random_text(rng)};
    if (a == b) b.text += "!";
    for (const auto& tpl : builtin_templates()) {
      const std::string pa = apply_template(tpl, a);
      EXPECT_NE(pa, apply_template(tpl, b));
      EXPECT_NE(pa.find(a.text), std::string::npos);
    }
  });
}

TEST(ParseTemplates, TabSeparatedWithComments) {
  const auto t = parse_templates("# custom prompts\n\nplain\t{}\nask\tIs \"{}\" nice?\n");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[1].id, "ask");
  EXPECT_EQ(t[1].pattern, "Is \"{}\" nice?");
}

TEST(ParseTemplates, RejectsBadLines) {
  EXPECT_THROW(parse_templates("no tab here\n"), Error);
  EXPECT_PK_ERROR(parse_templates("x\tnothing\n"), ErrorKind::InvalidTemplate);
}

}  // namespace
}  // namespace probekit
