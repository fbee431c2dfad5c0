#include <doctest.h>

#include <random>

#include "flood/error.hpp"
#include "flood/evaluation.hpp"
#include "support.hpp"

using namespace flood;

namespace {

const GeoTransform g4{0, 0, 1, 4, 4};

MaskGrid mask_of(std::initializer_list<int> cells) {
  MaskGrid m(g4);
  for (int i : cells) m.set(static_cast<std::size_t>(i), true);
  return m;
}

// Hand-counted 4x4 fixture. Truth is wet on cells 0..3. Some covers 10 cells
// including 0, 1 and 2. Highest covers 0..4, so 4 of its 5 cells are wet.
// These counts cannot come from a nested map (highest would need cell 3 in
// some), so the fixture is scored as given.
RiskMap fixture() {
  const MaskGrid some = mask_of({0, 1, 2, 4, 5, 6, 7, 8, 9, 10});
  const MaskGrid highest = mask_of({0, 1, 2, 3, 4});
  return {some, some, highest, Grid(g4, 0.0)};
}

EvalReport with_srr_hrp(std::optional<double> srr, std::optional<double> hrp) {
  EvalReport r;
  r.srr = srr;
  r.hrp = hrp;
  r.srr_count = srr ? 1 : 0;
  r.hrp_count = hrp ? 1 : 0;
  return r;
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("hand-counted fixture") {
    const EvalReport r = evaluate(fixture(), mask_of({0, 1, 2, 3}));
    REQUIRE(r.srr);
    REQUIRE(r.hrp);
    REQUIRE(r.rar);
    CHECK(*r.srr == 0.75);
    CHECK(*r.hrp == 0.8);
    CHECK(*r.rar == 2.0);
    CHECK(r.wet_total == 4);
    CHECK(r.some.hits == 3);
    CHECK(r.some.predicted == 10);
    CHECK(r.highest.hits == 4);
    CHECK(r.highest.predicted == 5);
    CHECK(r.n_valid == 16);
    CHECK(*r.srr * r.wet_total == r.some.hits);
  }

  TEST_CASE("perfect forecast") {
    const MaskGrid truth = mask_of({3, 7, 8});
    const EvalReport r = evaluate({truth, truth, truth, Grid(g4, 1.0)}, truth);
    CHECK(*r.srr == 1.0);
    CHECK(*r.hrp == 1.0);
    CHECK(*r.rar == 1.0);
  }

  TEST_CASE("zero denominators are undefined") {
    const EvalReport r = evaluate({mask_of({1}), MaskGrid(g4), MaskGrid(g4), Grid(g4, 0.0)}, mask_of({1, 2}));
    CHECK(r.srr == 0.5);
    CHECK_FALSE(r.hrp);
    CHECK_FALSE(r.rar);
    const EvalReport dry = evaluate(fixture(), MaskGrid(g4));
    CHECK_FALSE(dry.srr);
    CHECK(dry.hrp == 0.0);  // zero hits over a nonempty region is a real zero
    const std::string text = to_text(r);
    CHECK(text.find("hrp: undefined\n") != std::string::npos);
    CHECK(to_csv_row("e", r).rfind("e,0.5,,,", 0) == 0);
  }

  TEST_CASE("valid mask restricts every count") {
    MaskGrid valid(g4, true);
    valid.set(std::size_t{3}, false);
    valid.set(std::size_t{4}, false);
    const EvalReport r = evaluate(fixture(), mask_of({0, 1, 2, 3}), valid);
    CHECK(r.n_valid == 14);
    CHECK(*r.srr == 1.0);
    CHECK(*r.hrp == 1.0);
    CHECK(*r.rar == 3.0);
  }

  TEST_CASE("all-valid mask equals no mask, and metrics stay in range") {
    std::mt19937_64 gen(55);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
      Grid p(g4, 0.0);
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = u(gen);
      const RiskMap risk = discretize(p, {0.3, 0.6, 0.8});
      const MaskGrid truth = test::random_mask(g4, gen);
      const EvalReport a = evaluate(risk, truth), b = evaluate(risk, truth, MaskGrid(g4, true));
      REQUIRE(a.srr == b.srr);
      REQUIRE(a.hrp == b.hrp);
      REQUIRE(a.rar == b.rar);
      if (a.srr) REQUIRE((*a.srr >= 0.0 && *a.srr <= 1.0));
      if (a.hrp) REQUIRE((*a.hrp >= 0.0 && *a.hrp <= 1.0));
      if (a.rar) REQUIRE(*a.rar >= 1.0);

      // More Some pixels never lower SRR; more wet Highest pixels never lower HRP.
      RiskMap grown = risk;
      const std::size_t i = gen() % g4.size();
      grown.some.set(i, true);
      const EvalReport c = evaluate(grown, truth);
      if (a.srr) REQUIRE(*c.srr >= *a.srr);
      if (truth[i]) {
        grown.higher.set(i, true);
        grown.highest.set(i, true);
        const EvalReport d = evaluate(grown, truth);
        if (a.hrp) REQUIRE(*d.hrp >= *a.hrp);
      }
    }
  }

  TEST_CASE("aggregate averages defined metrics") {
    const EvalReport one = evaluate(fixture(), mask_of({0, 1, 2, 3}));
    const EvalReport self = aggregate({one});
    CHECK(self.srr == one.srr);
    CHECK(self.hrp == one.hrp);
    CHECK(self.rar == one.rar);

    const EvalReport m = aggregate({with_srr_hrp(1.0, std::nullopt), with_srr_hrp(0.8, 0.6)});
    CHECK(*m.srr == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(m.srr_count == 2);
    CHECK(*m.hrp == 0.6);
    CHECK(m.hrp_count == 1);
    CHECK_FALSE(m.rar);
    CHECK(m.rar_count == 0);

    CHECK_THROWS_AS(aggregate({}), ValidationError);
  }

  TEST_CASE("per-pixel aggregate pools the counts") {
    const MaskGrid truth_a = mask_of({0, 1, 2, 3});
    const MaskGrid truth_b = mask_of({0});
    const EvalReport a = evaluate(fixture(), truth_a), b = evaluate(fixture(), truth_b);
    const EvalReport pooled = aggregate({a, b}, Weighting::per_pixel);
    CHECK(pooled.wet_total == 5);
    CHECK(pooled.some.hits == 4);
    CHECK(*pooled.srr == 0.8);
    CHECK(*pooled.hrp == 0.5);  // (4 + 1) / (5 + 5)
    CHECK(*pooled.rar == 2.0);
    const EvalReport event = aggregate({a, b});
    CHECK(*event.srr == 0.875);
    CHECK(event.wet_total == 5);
  }

  TEST_CASE("geometry mismatch") {
    CHECK_THROWS_AS(evaluate(fixture(), MaskGrid({0, 0, 1, 4, 5})), ValidationError);
  }
}
