#include <gtest/gtest.h>

#include "rag/errors.hpp"
#include "rag/filter.hpp"

using namespace rag;

namespace {

const Metadata kDoc = {{"year", std::int64_t{2020}},
                       {"score", 0.75},
                       {"region", std::string("EU")},
                       {"public", true}};

FilterPredicate parse(const char* json) { return filter_from_json(nlohmann::json::parse(json)); }

}  // namespace

TEST(Filter, EmptyMatchesEverything) {
  EXPECT_TRUE(FilterPredicate{}.matches(kDoc));
  EXPECT_TRUE(FilterPredicate{}.matches({}));
  EXPECT_TRUE(filter_from_json(nullptr).clauses.empty());
}

TEST(Filter, Operators) {
  EXPECT_TRUE(parse(R"([{"key":"year","op":"==","value":2020}])").matches(kDoc));
  EXPECT_FALSE(parse(R"([{"key":"year","op":"!=","value":2020}])").matches(kDoc));
  EXPECT_TRUE(parse(R"([{"key":"year","op":"<","value":2021}])").matches(kDoc));
  EXPECT_TRUE(parse(R"([{"key":"year","op":"<=","value":2020}])").matches(kDoc));
  EXPECT_FALSE(parse(R"([{"key":"year","op":">","value":2020}])").matches(kDoc));
  EXPECT_TRUE(parse(R"([{"key":"year","op":">=","value":2020}])").matches(kDoc));
  EXPECT_TRUE(parse(R"([{"key":"region","op":"in","values":["ASIA","EU"]}])").matches(kDoc));
  EXPECT_FALSE(parse(R"([{"key":"region","op":"in","values":[]}])").matches(kDoc));
  EXPECT_TRUE(parse(R"([{"key":"region","op":"<","value":"F"}])").matches(kDoc));
  EXPECT_TRUE(parse(R"([{"key":"public","op":">","value":false}])").matches(kDoc));
}

TEST(Filter, ConjunctionAndShorthand) {
  EXPECT_TRUE(parse(R"({"year":2020,"region":"EU"})").matches(kDoc));
  EXPECT_FALSE(parse(R"({"year":2020,"region":"US"})").matches(kDoc));
  EXPECT_FALSE(parse(R"([{"key":"year","op":">=","value":2019},{"key":"score","op":">","value":0.8}])")
                   .matches(kDoc));
}

TEST(Filter, NumericTypesCompareAcrossIntAndFloat) {
  EXPECT_TRUE(parse(R"({"year":2020.0})").matches(kDoc));
  EXPECT_TRUE(parse(R"([{"key":"score","op":"<","value":1}])").matches(kDoc));
}

TEST(Filter, MissingKeyOrTypeMismatchIsFalse) {
  EXPECT_FALSE(parse(R"({"missing":1})").matches(kDoc));
  EXPECT_FALSE(parse(R"([{"key":"missing","op":"!=","value":1}])").matches(kDoc));
  EXPECT_FALSE(parse(R"({"year":"2020"})").matches(kDoc));
  EXPECT_FALSE(parse(R"([{"key":"region","op":"!=","value":5}])").matches(kDoc));
  EXPECT_FALSE(parse(R"({"public":1})").matches(kDoc));
}

TEST(Filter, JsonRoundTrip) {
  const auto f = parse(
      R"([{"key":"year","op":">=","value":2019},{"key":"region","op":"in","values":["EU",1,true]}])");
  EXPECT_EQ(filter_from_json(filter_to_json(f)), f);
}

TEST(Filter, Rejections) {
  for (const char* bad : {R"("year")", R"([{"key":"year","op":"~","value":1}])",
                          R"([{"key":"year","op":"=="}])", R"([{"key":"year","op":"in","value":1}])",
                          R"([{"op":"==","value":1}])", R"({"year":[2020]})",
                          R"([{"key":"","op":"==","value":1}])"}) {
    try {
      parse(bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidFilter) << bad;
    }
  }
}
