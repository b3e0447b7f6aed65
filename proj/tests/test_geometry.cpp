#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "omnifht/errors.hpp"
#include "omnifht/geometry.hpp"

using namespace omnifht;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

Rotation random_rotation(std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Rotation(n(rng), n(rng), n(rng), n(rng));
}

OpticsConfig default_optics() { return OpticsConfig{}; }

}  // namespace

TEST_CASE("rotation compose/inverse is identity") {
  std::mt19937 rng(7);
  for (int i = 0; i < 100; ++i) {
    const Rotation r = random_rotation(rng);
    CHECK(geodesic_distance(r.compose(r.inverse()), Rotation::identity()) <
          1e-7);
    CHECK(std::abs(r.quat().norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("rotation apply matches matrix") {
  std::mt19937 rng(8);
  for (int i = 0; i < 20; ++i) {
    const Rotation r = random_rotation(rng);
    const Eigen::Vector3d v(1.0, -2.0, 0.5);
    CHECK((r.apply(v) - r.matrix() * v).norm() < 1e-12);
  }
}

TEST_CASE("geodesic distance examples and properties") {
  CHECK(geodesic_distance(Rotation::identity(), Rotation::identity()) ==
        doctest::Approx(0.0));
  CHECK(geodesic_distance(Rotation::identity(), Rotation::about_z(kPi)) ==
        doctest::Approx(kPi));
  CHECK(geodesic_distance(Rotation::about_z(10 * kDeg),
                          Rotation::about_z(40 * kDeg)) ==
        doctest::Approx(30 * kDeg));

  // Quaternion-sign invariance.
  const Rotation a(0.3, 0.5, -0.2, 0.7);
  const Rotation b(-0.3, -0.5, 0.2, -0.7);
  CHECK(geodesic_distance(a, b) < 1e-12);

  // Triangle inequality on random triples.
  std::mt19937 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Rotation x = random_rotation(rng), y = random_rotation(rng),
                   z = random_rotation(rng);
    CHECK(geodesic_distance(x, z) <=
          geodesic_distance(x, y) + geodesic_distance(y, z) + 1e-6);
  }
}

TEST_CASE("ewald_lift examples") {
  const OpticsConfig cfg = default_optics();
  const double km = cfg.k_medium();

  const auto on_axis = ewald_lift(0.0, 0.0, cfg);
  REQUIRE(on_axis.has_value());
  CHECK(on_axis->kz == doctest::Approx(km));

  CHECK_FALSE(ewald_lift(cfg.k_support() + 1e-9, 0.0, cfg).has_value());

  // Closed form: kz(km/2, 0) = km*sqrt(3)/2. km/2 is inside the NA disk for
  // NA/n_m = 0.7/1.33 > 0.5.
  const auto mid = ewald_lift(km / 2.0, 0.0, cfg);
  REQUIRE(mid.has_value());
  CHECK(mid->kz == doctest::Approx(km * std::sqrt(3.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("ewald_lift satisfies the sphere equation on random in-band points") {
  const OpticsConfig cfg = default_optics();
  const double km = cfg.k_medium();
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> u(-cfg.k_support(), cfg.k_support());
  int tested = 0;
  while (tested < 1000) {
    const double kx = u(rng), ky = u(rng);
    const auto k = ewald_lift(kx, ky, cfg);
    if (!k) continue;
    ++tested;
    const double r2 = k->kx * k->kx + k->ky * k->ky + k->kz * k->kz;
    CHECK(std::abs(r2 - km * km) <= 1e-9 * km * km);
  }
}

TEST_CASE("so3_coarse_grid size, identity, covering radius") {
  const auto grid30 = so3_coarse_grid(30.0);
  CHECK(grid30.size() >= 400);
  CHECK(grid30.size() <= 1200);
  CHECK(geodesic_distance(grid30[0], Rotation::identity()) < 1e-12);

  const auto grid15 = so3_coarse_grid(15.0);
  CHECK(grid15.size() > grid30.size());

  CHECK_THROWS_AS(so3_coarse_grid(0.0), ConfigError);
  CHECK_THROWS_AS(so3_coarse_grid(91.0), ConfigError);

  // Monte-Carlo covering check: every random rotation has a grid point
  // within the step.
  std::mt19937 rng(17);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Rotation r = random_rotation(rng);
    double best = kPi;
    for (const auto& g : grid30) best = std::min(best, geodesic_distance(r, g));
    worst = std::max(worst, best);
  }
  CHECK(worst <= 30 * kDeg);
}

TEST_CASE("local_refine_grid shape and bounds") {
  Pose center;
  center.rotation = Rotation::about_y(40 * kDeg);
  center.translation_um = {1.0, -2.0};

  const auto grid = local_refine_grid(center, 15.0, 0.3);
  CHECK(grid.size() == 243);

  bool has_center = false;
  double max_rot = 0.0;
  for (const auto& p : grid) {
    max_rot = std::max(max_rot, geodesic_distance(p.rotation, center.rotation));
    if (geodesic_distance(p.rotation, center.rotation) < 1e-12 &&
        (p.translation_um - center.translation_um).norm() < 1e-12)
      has_center = true;
  }
  CHECK(has_center);
  CHECK(max_rot <= 26 * kDeg);

  const auto frozen = local_refine_grid(center, 10.0, 0.0);
  for (const auto& p : frozen)
    CHECK((p.translation_um - center.translation_um).norm() == 0.0);
}

TEST_CASE("align_pose_tracks recovers a planted global rotation") {
  std::mt19937 rng(19);
  std::vector<Pose> ref(40);
  for (auto& p : ref) p.rotation = random_rotation(rng);

  SUBCASE("identical tracks") {
    const auto a = align_pose_tracks(ref, ref);
    CHECK(a.global.angle() < 0.6 * kDeg);
    for (double r : a.residuals_rad) CHECK(r < 0.6 * kDeg);
  }

  SUBCASE("conjugated track") {
    const Rotation g = Rotation::about_x(20 * kDeg);
    std::vector<Pose> est(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i)
      est[i].rotation = g.compose(ref[i].rotation);
    const auto a = align_pose_tracks(est, ref);
    CHECK(geodesic_distance(a.global, Rotation::about_x(-20 * kDeg)) <
          1.0 * kDeg);
    for (double r : a.residuals_rad) CHECK(r <= 1.0 * kDeg);
  }

  SUBCASE("independent random tracks stay misaligned") {
    std::vector<Pose> est(100), truth(100);
    for (auto& p : est) p.rotation = random_rotation(rng);
    for (auto& p : truth) p.rotation = random_rotation(rng);
    const auto a = align_pose_tracks(est, truth);
    CHECK(a.mean_residual_rad > 30 * kDeg);
  }

  SUBCASE("invariant to a common rotation applied to both tracks") {
    std::vector<Pose> est(ref.size());
    std::mt19937 rng2(23);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      est[i].rotation =
          ref[i].rotation.compose(Rotation::about_y(3 * kDeg));  // small jitter
    }
    const auto base = align_pose_tracks(est, ref);
    const Rotation common = random_rotation(rng2);
    std::vector<Pose> est2 = est, ref2 = ref;
    for (auto& p : est2) p.rotation = common.compose(p.rotation);
    for (auto& p : ref2) p.rotation = common.compose(p.rotation);
    const auto moved = align_pose_tracks(est2, ref2);
    CHECK(std::abs(moved.mean_residual_rad - base.mean_residual_rad) <=
          0.5 * kDeg);
  }

  SUBCASE("reflection detection") {
    std::vector<Pose> est(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i)
      est[i].rotation = ref[i].rotation.reflected_z();
    const auto no_flag = align_pose_tracks(est, ref, false);
    const auto flagged = align_pose_tracks(est, ref, true);
    CHECK(flagged.used_reflection);
    CHECK(flagged.mean_residual_rad < 0.6 * kDeg);
    CHECK(flagged.mean_residual_rad <= no_flag.mean_residual_rad);
  }

  SUBCASE("length mismatch") {
    std::vector<Pose> est(ref.size() - 1);
    CHECK_THROWS_AS(align_pose_tracks(est, ref), DataError);
  }
}

TEST_CASE("zxy factorization round-trips") {
  std::mt19937 rng(29);
  std::uniform_real_distribution<double> u(-80 * kDeg, 80 * kDeg);
  for (int i = 0; i < 200; ++i) {
    const double roll = u(rng), pitch = u(rng), yaw = u(rng);
    const Rotation r = compose_zxy(roll, pitch, yaw);
    const EulerZXY e = factor_zxy(r);
    // geodesic_distance resolves ~2e-8 near zero (acos conditioning).
    CHECK(geodesic_distance(compose_zxy(e.roll_rad, e.pitch_rad, e.yaw_rad),
                            r) < 1e-6);
    CHECK(e.pitch_rad == doctest::Approx(pitch).epsilon(1e-9));
  }
}

TEST_CASE("optics config validation") {
  OpticsConfig cfg = default_optics();
  CHECK_NOTHROW(cfg.validate());
  cfg.numerical_aperture = 1.4;  // exceeds n_medium
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = default_optics();
  cfg.roi_size_px = 96;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
