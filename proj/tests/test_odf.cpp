#include <doctest.h>

#include <cmath>
#include <numbers>

#include "drumhead/constants.hpp"
#include "drumhead/odf.hpp"

using namespace drumhead;

namespace {

constexpr double deg = std::numbers::pi / 180.0;

BeamGeometry beams(double theta_deg) {
  BeamGeometry g;
  g.theta_r = theta_deg * deg;
  return g;
}

}  // namespace

TEST_CASE("effective wavevector and lattice wavelength at 4.8 degrees") {
  const auto g = beams(4.8);
  CHECK(effective_wavevector(g) == doctest::Approx(1.681e6).epsilon(1e-3));
  CHECK(lattice_wavelength(g) == doctest::Approx(3.74e-6).epsilon(2e-3));
  CHECK(std::abs(lattice_wavelength(g) - 3.7e-6) / 3.7e-6 < 0.02);
}

TEST_CASE("wavevector limits") {
  CHECK(effective_wavevector(beams(0.0)) == 0.0);
  CHECK(effective_wavevector(beams(1e-9)) < 1e-2);
  const double k = constants::two_pi / 313.133e-9;
  CHECK(effective_wavevector(beams(180.0)) == doctest::Approx(2 * k).epsilon(1e-15));
}

TEST_CASE("wavevector increases with crossing angle") {
  double last = 0.0;
  for (double t = 1.0; t < 180.0; t += 1.0) {
    const double k = effective_wavevector(beams(t));
    CHECK(k > last);
    last = k;
  }
}

TEST_CASE("beam geometry validation") {
  CHECK_NOTHROW(beams(4.8).validate());
  CHECK_THROWS_AS(beams(0.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(beams(95.0).validate(), std::invalid_argument);
  auto g = beams(4.8);
  g.wavelength = -1.0;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}

TEST_CASE("Stark-shift null angle") {
  SUBCASE("equal and opposite differences give 45 degrees") {
    const StarkCoefficients c{2.0e6, 1.0e6, -3.0e6, -2.0e6};
    CHECK(acss_null_angle(c) == doctest::Approx(45 * deg).epsilon(1e-14));
  }
  SUBCASE("engineered ratio -(tan 65)^2 gives 65 degrees") {
    const double t2 = std::pow(std::tan(65 * deg), 2);
    const StarkCoefficients c{-t2 * 1e6, 0.0, 1e6, 0.0};
    const double phi = acss_null_angle(c);
    CHECK(phi == doctest::Approx(65 * deg).epsilon(1e-13));
    CHECK(std::abs(acss_shift(c, phi)) <= 1e-12 * std::max(std::abs(c.a_up), std::abs(c.b_up)));
  }
  SUBCASE("no null when the sigma differences vanish or signs agree") {
    CHECK_THROWS_AS(acss_null_angle(StarkCoefficients{1e6, 0.0, 5e5, 5e5}), NoNullAngleError);
    CHECK_THROWS_AS(acss_null_angle(StarkCoefficients{1e6, 0.0, 2e6, 1e6}), NoNullAngleError);
  }
}

TEST_CASE("null angle zeroes the differential shift over random coefficients") {
  for (int k = 1; k <= 50; ++k) {
    const double da = std::sin(1.3 * k) * 1e7;
    const double db = -std::copysign(std::abs(std::cos(0.7 * k)) * 1e7 + 1.0, da);
    const StarkCoefficients c{da + 3e6, 3e6, db - 2e6, -2e6};
    const double phi = acss_null_angle(c);
    CHECK(phi > 0.0);
    CHECK(phi < std::numbers::pi / 2);
    CHECK(std::abs(acss_shift(c, phi)) <= 1e-12 * std::max(std::abs(da), std::abs(db)));
  }
}

TEST_CASE("state-dependent forces") {
  const double dk = 1.681e6;
  const StarkCoefficients c{2e5, -3e5, 7e4, 1e4};
  const auto pure_pi = state_dependent_forces(c, 0.0, dk);
  CHECK(pure_pi.up == doctest::Approx(2 * dk * constants::hbar * c.a_up).epsilon(1e-15));
  CHECK(pure_pi.down == doctest::Approx(2 * dk * constants::hbar * c.a_dn).epsilon(1e-15));

  // A_up cos^2 - B_up sin^2 = -(A_dn cos^2 - B_dn sin^2) at 30 degrees.
  const double phi = 30 * deg;
  const double c2 = std::pow(std::cos(phi), 2), s2 = std::pow(std::sin(phi), 2);
  StarkCoefficients anti{4e5, 0.0, 1e5, 0.0};
  anti.a_dn = -(anti.a_up * c2 - anti.b_up * s2) / c2;
  const auto f = state_dependent_forces(anti, phi, dk);
  CHECK(f.antisymmetric);
  CHECK_FALSE(pure_pi.antisymmetric);
}

TEST_CASE("force calibration against intensity") {
  CHECK(force_from_intensity(1.0) == 1.5e-23);
  CHECK(force_from_intensity(0.0) == 0.0);
  CHECK(force_from_intensity(2.0) == doctest::Approx(3.0e-23).epsilon(1e-15));
  CHECK(force_from_intensity(0.37) == doctest::Approx(0.37 * 1.5e-23).epsilon(1e-15));
  CHECK_THROWS_AS(force_from_intensity(-1.0), std::invalid_argument);
}

TEST_CASE("drive configuration invariants") {
  DriveConfig d;
  d.forces = {1e-23};
  d.sequence = SpinEcho{500e-6, 65e-6};
  CHECK_NOTHROW(d.validate(10));
  CHECK(odf_on_time(d.sequence) == 1e-3);
  CHECK(odf_on_time(PulseSequence{Ramsey{500e-6}}) == 500e-6);

  d.forces = {1e-23, 1e-23, 1e-23};
  CHECK_THROWS_AS(d.validate(10), std::invalid_argument);
  d.forces = {-1e-23};
  CHECK_THROWS_AS(d.validate(10), std::invalid_argument);
  d.forces = {1e-23};
  d.sequence = SpinEcho{0.0, 65e-6};
  CHECK_THROWS_AS(d.validate(10), std::invalid_argument);
  d.sequence = SpinEcho{1e-4, -1.0};
  CHECK_THROWS_AS(d.validate(10), std::invalid_argument);
  d.sequence = Ramsey{1e-4};
  d.gamma = -1.0;
  CHECK_THROWS_AS(d.validate(10), std::invalid_argument);

  DriveConfig spread;
  spread.forces = {1.0e-23, 1.1e-23, 0.95e-23};
  CHECK_FALSE(spread.spread_flagged());
  spread.forces = {1.0e-23, 1.3e-23, 0.9e-23};
  CHECK(spread.spread_flagged());
}
