#include <catch_amalgamated.hpp>

#include <agreelearn/dataset.hpp>

#include <sstream>

using namespace agreelearn;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

Dataset parse(const std::string& text, const CsvColumns& cols = {}) {
  std::istringstream in(text);
  return load_csv(in, cols);
}

Dataset column(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return make_dataset({"c"}, m);
}

}  // namespace

TEST_CASE("load_csv marks missing cells and strips the label column") {
  const auto d = parse("a,b,label\n1,2,0\n?,4,1\n5,,0");
  REQUIRE(d.n_samples() == 3);
  REQUIRE(d.attributes == std::vector<std::string>{"a", "b"});
  CHECK(d.missing(1, 0));
  CHECK(d.missing(2, 1));
  CHECK_FALSE(d.missing(0, 0));
  CHECK(d.values(2, 0) == 5.0);
  CHECK(*d.labels == std::vector<int>{0, 1, 0});
}

TEST_CASE("load_csv accepts a header-only file") {
  const auto d = parse("a,b,label\n");
  CHECK(d.n_samples() == 0);
  CHECK(d.n_attributes() == 2);
  CHECK_NOTHROW(d.validate());
}

TEST_CASE("load_csv reports row and column of a non-numeric field") {
  try {
    parse("a,b,label\n1,x,0\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 1);
    CHECK(e.column() == "b");
  }
}

TEST_CASE("load_csv rejects ragged rows and duplicate headers") {
  CHECK_THROWS_AS(parse("a,b,label\n1,2\n"), ParseError);
  CHECK_THROWS_AS(parse("a,a,label\n1,2,0\n"), SchemaError);
  CHECK_THROWS_AS(parse("a,b\n1,2\n"), SchemaError);  // no label column
}

TEST_CASE("load_csv reads survival and stage columns") {
  CsvColumns cols;
  cols.survival = std::make_pair(std::string("months"), std::string("event"));
  cols.tnm = "tnm";
  const auto d = parse("x,months,event,tnm,label\n0.5,72,0,2,1\n1.5,40,1,3,0\n", cols);
  REQUIRE(d.n_attributes() == 1);
  CHECK((*d.survival)[0].months == 72.0);
  CHECK_FALSE((*d.survival)[0].event);
  CHECK((*d.survival)[1].event);
  CHECK(*d.tnm_stage == std::vector<int>{2, 3});
  CHECK_THROWS_AS(parse("x,months,event,tnm,label\n0.5,72,0,5,1\n", cols), ParseError);
}

TEST_CASE("write_csv and load_csv round-trip exactly") {
  CsvColumns cols;
  cols.survival = std::make_pair(std::string("months"), std::string("event"));
  cols.tnm = "tnm_stage";
  const auto d = parse("p,q,months,event,tnm_stage,label\n0.1,?,12.5,1,2,0\n1e-300,3.25,80,0,3,1\n", cols);
  std::ostringstream out;
  write_csv(out, d, cols);
  const auto back = parse(out.str(), cols);
  CHECK(back.values(0, 0) == d.values(0, 0));
  CHECK(back.values(1, 0) == d.values(1, 0));
  CHECK(back.missing(0, 1));
  CHECK(*back.labels == *d.labels);
  CHECK(*back.tnm_stage == *d.tnm_stage);
  std::ostringstream again;
  write_csv(again, back, cols);
  CHECK(again.str() == out.str());
}

TEST_CASE("impute_mean") {
  SECTION("fills with the observed mean") {
    auto d = column({1, 0, 3});
    d.missing(1, 0) = true;
    const auto out = impute_mean(d);
    CHECK(out.values(1, 0) == 2.0);
    CHECK_FALSE(out.has_missing());
  }
  SECTION("is the identity without missing values") {
    const auto d = column({4, 5, 6});
    CHECK(impute_mean(d).values == d.values);
  }
  SECTION("is idempotent") {
    auto d = column({1, 0, 8, 0});
    d.missing(1, 0) = d.missing(3, 0) = true;
    const auto once = impute_mean(d);
    CHECK(impute_mean(once).values == once.values);
  }
  SECTION("fails on a fully missing attribute") {
    auto d = column({0, 0});
    d.missing.setConstant(true);
    CHECK_THROWS_WITH(impute_mean(d), ContainsSubstring("'c'"));
  }
}

TEST_CASE("normalize_zscore uses the population standard deviation") {
  CHECK(normalize_zscore(column({0, 2})).values(0, 0) == -1.0);
  CHECK(normalize_zscore(column({0, 2})).values(1, 0) == 1.0);
  const auto constant = normalize_zscore(column({5, 5, 5}));
  CHECK(constant.values.isZero());

  const auto d = [] {
    Matrix m(7, 3);
    m << 1, 2, 3, 4, 5, 6, 7, 8, 9.5, 0.1, 0.2, 0.3, -4, 2, 2, 9, 9, 9, 3, 1, 4;
    return make_dataset({"a", "b", "c"}, m);
  }();
  const auto z = normalize_zscore(d);
  for (Eigen::Index j = 0; j < 3; ++j) {
    const double mean = z.values.col(j).mean();
    const double sd = std::sqrt((z.values.col(j).array() - mean).square().mean());
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(sd - 1) < 1e-10);
  }
  const auto twice = normalize_zscore(z);
  CHECK((twice.values - z.values).cwiseAbs().maxCoeff() < 1e-12);

  auto with_missing = column({1, 2});
  with_missing.missing(0, 0) = true;
  CHECK_THROWS_AS(normalize_zscore(with_missing), PreconditionError);
}

TEST_CASE("linearize") {
  const auto d = column({0.5, 2});
  const auto r = linearize(d, {{"c", Transform::reciprocal}});
  CHECK(r.values(0, 0) == 2.0);
  CHECK(r.values(1, 0) == 0.5);
  CHECK(linearize(d, {}).values == d.values);
  CHECK_THROWS_WITH(linearize(column({1, 0}), {{"c", Transform::log}}), ContainsSubstring("row 1"));
  CHECK_THROWS_AS(linearize(column({0, 1}), {{"c", Transform::reciprocal}}), PreconditionError);
  CHECK_THAT(linearize(column({std::exp(2.0)}), {{"c", Transform::log}}).values(0, 0), WithinAbs(2.0, 1e-15));
}

TEST_CASE("binarize_survival") {
  Dataset d = column({1, 2, 3});
  d.survival = std::vector<SurvivalRecord>{{72, false}, {40, true}, {40, false}};
  const auto b = binarize_survival(d);
  REQUIRE(b.n_samples() == 2);
  CHECK(*b.labels == std::vector<int>{1, 0});
  CHECK(b.values(0, 0) == 1.0);
  CHECK(b.values(1, 0) == 2.0);
  CHECK_THROWS_AS(binarize_survival(column({1})), PreconditionError);
}

TEST_CASE("Dataset::validate enforces the invariants") {
  Dataset d = column({1, 2});
  d.labels = std::vector<int>{0};
  CHECK_THROWS_AS(d.validate(), SchemaError);
  d.labels = std::vector<int>{0, 2};
  CHECK_THROWS_AS(d.validate(), PreconditionError);
  d.labels.reset();
  d.values(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(d.validate(), PreconditionError);
  d.missing(0, 0) = true;
  CHECK_NOTHROW(d.validate());
}
