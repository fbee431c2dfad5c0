#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "flood/error.hpp"
#include "flood/threshold_model.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace flood;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// A single-pixel stack from a list of (level, wet) observations.
ObservationStack one_pixel(const std::vector<oracle::Observation>& history) {
  const GeoTransform geo{0, 0, 1, 1, 1};
  ObservationStack s{geo, {}};
  for (const auto& o : history) s.snapshots.push_back({o.level, MaskGrid(geo, o.wet), MaskGrid(geo, true)});
  return s;
}

}  // namespace

TEST_SUITE("threshold") {
  TEST_CASE("separable history") {
    const ThresholdField f = fit_thresholds(one_pixel({{3.0, false}, {4.0, true}, {5.0, true}}));
    CHECK(f.t_recall[0] == 4.0);
    CHECK(f.t_precision[0] == 4.0);
    CHECK(f.coverage[0]);

    const ModelMasks at4 = predict(f, 4.0);
    CHECK(at4.some[0]);
    CHECK_FALSE(at4.highest[0]);
    CHECK(predict(f, 4.0001).highest[0]);
    CHECK_FALSE(predict(f, 3.9).some[0]);
  }

  TEST_CASE("inconsistent history keeps both operating points") {
    const ThresholdField f = fit_thresholds(one_pixel({{5.0, true}, {6.0, false}}));
    CHECK(f.t_recall[0] == 5.0);
    CHECK(f.t_precision[0] == 6.0);
    CHECK(predict(f, 5.0).some[0]);
    CHECK_FALSE(predict(f, 4.99).some[0]);
    CHECK_FALSE(predict(f, 6.0).highest[0]);
    CHECK(predict(f, 6.01).highest[0]);
  }

  TEST_CASE("always dry, always wet and unobserved pixels") {
    const GeoTransform geo{0, 0, 1, 1, 3};
    ObservationStack s{geo, {}};
    for (double level : {1.0, 2.0, 3.0}) {
      MaskGrid wet(geo), valid(geo, true);
      wet.set(0, 1, true);
      valid.set(0, 2, false);
      s.snapshots.push_back({level, wet, valid});
    }
    const ThresholdField f = fit_thresholds(s);
    CHECK(f.t_recall[0] == inf);
    CHECK(f.t_precision[0] == inf);  // highest dry is 3.0, raised to t_recall
    CHECK(f.t_recall[1] == 1.0);
    CHECK(f.t_precision[1] == 1.0);
    CHECK(f.t_recall[2] == inf);
    CHECK(f.t_precision[2] == inf);
    CHECK_FALSE(f.coverage[2]);

    const ModelMasks high = predict(f, 1e9);
    CHECK_FALSE(high.some[0]);
    CHECK(high.some[1]);
    CHECK_FALSE(high.some[2]);
    const ModelMasks low = predict(f, -1e9);
    CHECK(low.some.empty());
    CHECK(low.highest.empty());
  }

  TEST_CASE("never-dry pixel is predicted wet at any level above its lowest wet") {
    const ThresholdField f = fit_thresholds(one_pixel({{2.0, true}, {7.0, true}}));
    CHECK(f.t_recall[0] == 2.0);
    CHECK(f.t_precision[0] == 2.0);
  }

  TEST_CASE("fit errors") {
    const GeoTransform geo{0, 0, 1, 2, 2};
    CHECK_THROWS_AS(fit_thresholds(ObservationStack{geo, {}}), ValidationError);
    ObservationStack bad{geo, {{1.0, MaskGrid(geo), MaskGrid(GeoTransform{0, 0, 1, 2, 3}, true)}}};
    CHECK_THROWS_AS(fit_thresholds(bad), ValidationError);
    CHECK_THROWS_AS(predict(fit_thresholds(one_pixel({{1.0, true}})), std::nan("")), ValidationError);
  }

  TEST_CASE("random histories match the exhaustive search") {
    std::mt19937_64 gen(123);
    std::uniform_int_distribution<int> len(0, 8);
    std::uniform_int_distribution<int> lvl(0, 12);
    const GeoTransform geo{0, 0, 1, 10, 10};
    for (int round = 0; round < 20; ++round) {
      const int n = 1 + len(gen);
      ObservationStack s{geo, {}};
      for (int k = 0; k < n; ++k) {
        // Coarse levels make repeated values and wet/dry ties at one level common.
        s.snapshots.push_back({0.5 * lvl(gen), test::random_mask(geo, gen), test::random_mask(geo, gen, 0.8)});
      }
      const ThresholdField f = fit_thresholds(s);
      for (std::size_t i = 0; i < geo.size(); ++i) {
        std::vector<oracle::Observation> h;
        for (const auto& snap : s.snapshots) {
          if (snap.valid[i]) h.push_back({snap.gauge_level, snap.wet[i]});
        }
        const auto [tr, tp] = oracle::thresholds(h);
        REQUIRE(f.t_recall[i] == tr);
        REQUIRE(f.t_precision[i] == tp);
        REQUIRE(f.coverage[i] == !h.empty());
      }
    }
  }

  TEST_CASE("predict is nested and monotone, and fit ignores snapshot order") {
    std::mt19937_64 gen(77);
    const GeoTransform geo{0, 0, 1, 8, 9};
    ObservationStack s{geo, {}};
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int k = 0; k < 8; ++k) s.snapshots.push_back({u(gen), test::random_mask(geo, gen), test::random_mask(geo, gen, 0.9)});
    const ThresholdField f = fit_thresholds(s);

    std::vector<double> levels(60);
    for (double& l : levels) l = u(gen);
    for (const auto& snap : s.snapshots) levels.push_back(snap.gauge_level);
    std::sort(levels.begin(), levels.end());
    ModelMasks prev = predict(f, levels.front());
    for (double l : levels) {
      const ModelMasks m = predict(f, l);
      REQUIRE(m.highest.subset_of(m.some));
      REQUIRE(prev.some.subset_of(m.some));
      REQUIRE(prev.highest.subset_of(m.highest));
      prev = m;
    }

    for (int k = 0; k < 10; ++k) {
      ObservationStack shuffled = s;
      std::shuffle(shuffled.snapshots.begin(), shuffled.snapshots.end(), gen);
      const ThresholdField g = fit_thresholds(shuffled);
      REQUIRE(g.t_recall == f.t_recall);
      REQUIRE(g.t_precision == f.t_precision);
    }
  }

  TEST_CASE("training labels are reproduced on separable pixels") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    const GeoTransform geo{0, 0, 1, 6, 6};
    // Every pixel is wet exactly above its own hidden threshold.
    std::vector<double> hidden(geo.size());
    for (double& t : hidden) t = u(gen);
    ObservationStack s{geo, {}};
    for (int k = 0; k < 15; ++k) {
      const double level = u(gen);
      MaskGrid wet(geo);
      for (std::size_t i = 0; i < geo.size(); ++i) wet.set(i, level >= hidden[i]);
      s.snapshots.push_back({level, wet, test::random_mask(geo, gen, 0.85)});
    }
    const ThresholdField f = fit_thresholds(s);
    for (const auto& snap : s.snapshots) {
      const ModelMasks m = predict(f, snap.gauge_level);
      for (std::size_t i = 0; i < geo.size(); ++i) {
        if (!snap.valid[i]) continue;
        if (snap.wet[i]) CHECK(m.some[i]);
        if (!snap.wet[i]) CHECK_FALSE(m.highest[i]);
      }
    }
  }

  TEST_CASE("save and load keep infinities and coverage") {
    const GeoTransform geo{3, 4, 2, 1, 4};
    ObservationStack s{geo, {}};
    MaskGrid wet(geo), valid(geo, true);
    wet.set(0, 1, true);
    valid.set(0, 3, false);
    s.snapshots.push_back({2.5, wet, valid});
    wet.set(0, 2, true);
    s.snapshots.push_back({0.1 + 0.2, wet, valid});
    const ThresholdField f = fit_thresholds(s);

    test::TempDir dir("threshold");
    save_threshold_field(f, dir.path());
    const ThresholdField back = load_threshold_field(dir.path());
    CHECK(back.geo == f.geo);
    CHECK(back.t_recall == f.t_recall);
    CHECK(back.t_precision == f.t_precision);
    CHECK(back.coverage == f.coverage);
    CHECK_THROWS_AS(load_threshold_field(dir / "nope"), IoError);
  }
}
