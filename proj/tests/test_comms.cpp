#include "relay/comms.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace relay;

namespace {

std::mt19937 rng(4242);

Attitude random_attitude() {
  std::uniform_real_distribution<double> ang(-1.3, 1.3);
  return Attitude(ang(rng), ang(rng), 0.0);
}

Vec3 random_unit() {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-3);
  return v.normalized();
}

LinkBudget reference_budget() {
  LinkBudget b;
  b.k_relay_bs = 1e9;
  b.k_uav_uav = 1e9;
  return b;
}

}  // namespace

TEST_CASE("dipole_gain anchor values") {
  CHECK(dipole_gain(kPi / 2) == Catch::Approx(1.64).margin(1e-9));
  CHECK(dipole_gain(0.0) == 0.0);
  CHECK(dipole_gain(kPi) == 0.0);
  CHECK(dipole_gain(kPi / 4) == Catch::Approx(1.0298).margin(1e-3));
  CHECK_THROWS_AS(dipole_gain(-0.1), std::domain_error);
  CHECK_THROWS_AS(dipole_gain(kPi + 0.1), std::domain_error);
}

TEST_CASE("dipole_gain is even about broadside") {
  std::uniform_real_distribution<double> ang(0.0, kPi);
  for (int i = 0; i < 1000; ++i) {
    const double theta = ang(rng);
    CHECK(dipole_gain(theta) == Catch::Approx(dipole_gain(kPi - theta)).margin(1e-12));
  }
}

TEST_CASE("gain_attitude_vector anchor values") {
  const Vec7 hover = gain_attitude_vector(Attitude(0, 0));
  Vec7 expect;
  expect << 1, 0, 0, -1, 0, 0, 0;
  CHECK((hover - expect).cwiseAbs().maxCoeff() < 1e-15);

  const Vec7 pitched = gain_attitude_vector(Attitude(0, kPi / 2));
  expect << 1, -1, 0, 0, 0, 0, 0;
  CHECK((pitched - expect).cwiseAbs().maxCoeff() < 1e-12);

  const Vec7 rolled = gain_attitude_vector(Attitude(kPi / 4, 0));
  expect << 1, 0, -0.5, -0.5, 0, 0, 1;
  CHECK((rolled - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("direction_quadratic_vector anchor values") {
  Vec7 expect;
  expect << 1, 1, 0, 0, 0, 0, 0;
  CHECK((direction_quadratic_vector(Vec3(1, 0, 0)) - expect).cwiseAbs().maxCoeff() < 1e-15);
  expect << 1, 0, 0, 1, 0, 0, 0;
  CHECK((direction_quadratic_vector(Vec3(0, 0, 1)) - expect).cwiseAbs().maxCoeff() < 1e-15);
  const double r = 1.0 / std::sqrt(3.0);
  const Vec7 diag = direction_quadratic_vector(Vec3(r, r, r));
  for (int i = 1; i < 7; ++i) CHECK(diag[i] == Catch::Approx(1.0 / 3.0).margin(1e-12));
  CHECK_THROWS_AS(direction_quadratic_vector(Vec3(1, 1, 0)), std::domain_error);
}

TEST_CASE("quadratic form equals the squared broadside projection") {
  // g.v must equal the squared norm of the body-frame link direction
  // projected onto the plane normal to the dipole axis, to 1e-10
  for (int i = 0; i < 1000; ++i) {
    const Attitude att = random_attitude();
    const Vec3 d = random_unit();
    const double gv = gain_attitude_vector(att).dot(direction_quadratic_vector(d));
    const Vec3 body = rotation_world_to_body(att) * d;
    const double horiz = body.x() * body.x() + body.y() * body.y();
    CHECK(gv == Catch::Approx(horiz).margin(1e-10));
  }
}

TEST_CASE("surrogate tracks the exact power pattern within 0.12") {
  double worst = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    const double theta = kPi * i / 10000.0;
    const double exact = dipole_gain(theta) * dipole_gain(theta) / (1.64 * 1.64);
    const double surrogate = std::sin(theta) * std::sin(theta);
    worst = std::max(worst, std::abs(exact - surrogate));
  }
  CHECK(worst <= 0.12);
}

TEST_CASE("approx_power_gain anchor values") {
  CHECK(approx_power_gain(Attitude(0, 0), Vec3(1, 0, 0)) == Catch::Approx(2.6896).margin(1e-12));
  CHECK(approx_power_gain(Attitude(0, 0), Vec3(0, 0, 1)) == 0.0);
  CHECK(approx_power_gain(Attitude(0, kPi / 4), Vec3(1, 0, 0)) ==
        Catch::Approx(1.64 * 1.64 * 0.5).margin(1e-9));
}

TEST_CASE("exact_power_gain anchor values") {
  CHECK(exact_power_gain(Attitude(0, 0), Vec3(1, 0, 0)) == Catch::Approx(2.6896).margin(1e-9));
  CHECK(exact_power_gain(Attitude(0, 0), Vec3(0, 0, 1)) == 0.0);
  CHECK(exact_power_gain(Attitude(0, kPi / 2), Vec3(1, 0, 0)) == Catch::Approx(0.0).margin(1e-9));
  CHECK_THROWS_AS(exact_power_gain(Attitude(0, 0), Vec3(0, 0, 0)), std::domain_error);
}

TEST_CASE("link_snrs across the three models") {
  const Vec3 relay(0, 3, 1.5), bs(1, 3, 1.5), peer(4, 3, 1.5);
  const Attitude hover;
  for (GainModel model :
       {GainModel::Exact, GainModel::QuadraticSurrogate, GainModel::PatternAgnostic}) {
    const LinkSnrs s = link_snrs(relay, hover, peer, hover, bs, reference_budget(), model);
    CHECK(s.snr_bs == Catch::Approx(1e9).margin(1e-2));
  }

  // pattern-agnostic: pure inverse square law
  LinkBudget b = reference_budget();
  const LinkSnrs far = link_snrs(Vec3(0, 0, 0), hover, Vec3(0, 0, 10), hover,
                                 Vec3(10, 0, 0), b, GainModel::PatternAgnostic);
  CHECK(far.snr_uav == Catch::Approx(1e7).margin(1e-4));
  CHECK(far.snr_bs == Catch::Approx(1e7).margin(1e-4));

  // vertical link: axial nulls on both dipoles
  const LinkSnrs null = link_snrs(Vec3(4, 3, 0.5), hover, Vec3(4, 3, 1.5), hover,
                                  Vec3(1, 3, 1.5), b, GainModel::Exact);
  CHECK(null.snr_uav == 0.0);

  CHECK_THROWS_AS(link_snrs(relay, hover, relay, hover, bs, b, GainModel::Exact),
                  std::domain_error);
}

TEST_CASE("surrogate and agnostic SNRs differ by the horizontal factor at hover") {
  std::uniform_real_distribution<double> d(-5.0, 5.0);
  const Attitude hover;
  const LinkBudget b = reference_budget();
  for (int i = 0; i < 200; ++i) {
    const Vec3 relay(d(rng), d(rng), d(rng));
    const Vec3 bs(d(rng), d(rng), d(rng));
    const Vec3 peer(d(rng), d(rng), d(rng));
    if ((relay - bs).norm() < 0.1 || (relay - peer).norm() < 0.1) continue;
    const LinkSnrs sur = link_snrs(relay, hover, peer, hover, bs, b, GainModel::QuadraticSurrogate);
    const LinkSnrs agn = link_snrs(relay, hover, peer, hover, bs, b, GainModel::PatternAgnostic);
    const double dz = unit_direction(relay, bs).z();
    CHECK(sur.snr_bs == Catch::Approx(agn.snr_bs * (1.0 - dz * dz)).epsilon(1e-12));
    CHECK(sur.snr_uav >= 0.0);
    CHECK(std::isfinite(sur.snr_uav));
    CHECK(std::isfinite(agn.snr_uav));
  }
}

TEST_CASE("rates derive from SNRs and the bottleneck") {
  const LinkSample s = make_link_sample(0.5, {3.0, 1.0});
  CHECK(s.rate_uav == Catch::Approx(2.0));
  CHECK(s.rate_bs == Catch::Approx(1.0));
  CHECK(s.rate_end_to_end == Catch::Approx(1.0));
  CHECK(s.t == 0.5);
}
