#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "aoitail/params.hpp"

using namespace aoitail;

TEST_CASE("defaults reproduce the reference scenario constants") {
  const SimParams p;
  CHECK(p.pair_count == 80);
  CHECK(p.rb_count == 20);
  CHECK(p.max_power_w == Catch::Approx(0.19952623149688797).epsilon(1e-12));
  CHECK(p.noise_psd_w_hz == Catch::Approx(3.981071705534986e-21).epsilon(1e-12));
  CHECK(p.pl_intercept == Catch::Approx(1.4125375446227555e-07).epsilon(1e-12));
  CHECK(p.pl_intercept_nlos == Catch::Approx(3.548133892335753e-06).epsilon(1e-12));
  CHECK(p.speed_mps == Catch::Approx(16.666666666666668).epsilon(1e-12));
}

TEST_CASE("derived quantities at the defaults") {
  const SimParams p;
  const DerivedParams d = derive(p);
  CHECK(d.arrivals_per_slot == Catch::Approx(0.375).margin(1e-15));
  CHECK(d.margin_pkts == Catch::Approx(-5.125).margin(1e-12));
  CHECK(d.excess_mean_cap == Catch::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(d.excess_moment2_cap == Catch::Approx(50.0 / 66.0).epsilon(1e-12));
  CHECK(d.arrivals_per_s == Catch::Approx(125.0).epsilon(1e-12));

  // The tabulated four-digit values are reproduced to 1e-4.
  CHECK(std::abs(d.excess_mean_cap - 0.8334) <= 1e-4);
  CHECK(std::abs(d.excess_moment2_cap - 0.7576) <= 1e-4);
}

TEST_CASE("margin override wins over the derived margin") {
  SimParams p;
  p.margin_override = -3.25;
  CHECK(derive(p).margin_pkts == Catch::Approx(-3.25).margin(1e-15));
}

TEST_CASE("derivation is a pure function of its inputs") {
  SimParams p;
  p.arrival_bps = 0.7e6;
  p.gpd_shape_cap = -2.5;
  const DerivedParams a = derive(p);
  const DerivedParams b = derive(p);
  CHECK(a.arrivals_per_slot == b.arrivals_per_slot);
  CHECK(a.margin_pkts == b.margin_pkts);
  CHECK(a.excess_mean_cap == b.excess_mean_cap);
  CHECK(a.excess_moment2_cap == b.excess_moment2_cap);
}

TEST_CASE("cap identity holds across the shape range") {
  SimParams p;
  for (double xi : {-10.0, -5.0, -1.0, -0.25, 0.0, 0.2, 0.49}) {
    p.gpd_shape_cap = xi;
    const DerivedParams d = derive(p);
    const double expect = d.excess_mean_cap * d.excess_mean_cap * 2.0 * (1.0 - xi) /
                          (1.0 - 2.0 * xi);
    CHECK(d.excess_moment2_cap == Catch::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("validation names the violated condition") {
  SimParams p;
  p.slot_s = -1;
  CHECK_THROWS_WITH(validate(p), Catch::Matchers::ContainsSubstring("tau > 0"));

  p = SimParams{};
  p.street_spacing_m = 60;  // does not divide 250
  CHECK_THROWS_WITH(validate(p), Catch::Matchers::ContainsSubstring("street_spacing"));

  p = SimParams{};
  p.tolerance = {0.5, 0.5};  // neither 1 nor K entries
  CHECK_THROWS_WITH(validate(p), Catch::Matchers::ContainsSubstring("epsilon"));

  p = SimParams{};
  p.gpd_shape_cap = 0.5;
  CHECK_THROWS_WITH(validate(p), Catch::Matchers::ContainsSubstring("xi_th"));
}

TEST_CASE("arrival rate too low for the deadline is rejected") {
  SimParams p;
  p.arrival_bps = 50e3;  // 50 kbit/s -> fewer than 1/d arrivals per second
  CHECK_THROWS_WITH(derive(p), Catch::Matchers::ContainsSubstring("A/tau >= 1/d"));
}

TEST_CASE("config parsing: units, lists, comments, overrides") {
  std::istringstream in(
      "# comment only\n"
      "K = 4\n"
      "P_max = 20  # dBm\n"
      "epsilon = 1e-3, 2e-3, 3e-3, 4e-3\n"
      "l0 = -60\n"
      "indicator_rate = full_power\n"
      "psi = -3.25\n");
  const SimParams p = params_from_config(in);
  CHECK(p.pair_count == 4);
  CHECK(p.max_power_w == Catch::Approx(0.1).epsilon(1e-12));
  REQUIRE(p.tolerance.size() == 4);
  CHECK(p.tolerance_of(2) == Catch::Approx(3e-3));
  CHECK(p.pl_intercept == Catch::Approx(1e-6).epsilon(1e-12));
  CHECK(p.indicator_rate == IndicatorRate::full_power);
  REQUIRE(p.margin_override.has_value());
  CHECK(*p.margin_override == Catch::Approx(-3.25));
}

TEST_CASE("config parsing rejects unknown keys and junk") {
  std::istringstream bad_key("K = 4\nbogus = 1\n");
  CHECK_THROWS_WITH(params_from_config(bad_key),
                    Catch::Matchers::ContainsSubstring("bogus"));

  std::istringstream no_eq("K 4\n");
  CHECK_THROWS_AS(params_from_config(no_eq), ConfigError);

  std::istringstream bad_value("K = four\n");
  CHECK_THROWS_AS(params_from_config(bad_value), ConfigError);
}

TEST_CASE("scalar tolerance broadcasts to every pair") {
  const SimParams p;
  CHECK(p.tolerance_of(0) == Catch::Approx(1e-3));
  CHECK(p.tolerance_of(79) == Catch::Approx(1e-3));
}
