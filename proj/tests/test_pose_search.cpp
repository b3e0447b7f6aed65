#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "omnifht/errors.hpp"
#include "omnifht/forward_model.hpp"
#include "omnifht/geometry.hpp"
#include "omnifht/pose_search.hpp"

using namespace omnifht;

namespace {

constexpr double kPi = std::numbers::pi;

OpticsConfig small_cfg(int roi = 32) {
  OpticsConfig cfg;
  cfg.roi_size_px = roi;
  return cfg;
}

// Asymmetric spectrum: two tight off-axis gaussian lobes plus a phase-ramped
// envelope, so rotations and translations both have a unique best fit and
// wrong rotations decorrelate quickly at the coarse grid spacing.
std::complex<double> lobed_spectrum(const Eigen::Vector3d& u) {
  const Eigen::Vector3d a(0.20, -0.12, 0.08);
  const Eigen::Vector3d b(-0.15, 0.22, -0.18);
  const double g1 = std::exp(-(u - a).squaredNorm() / (2.0 * 0.08 * 0.08));
  const double g2 = std::exp(-(u - b).squaredNorm() / (2.0 * 0.08 * 0.08));
  const double env = std::exp(-u.squaredNorm() / (2.0 * 0.30 * 0.30));
  const std::complex<double> ramp =
      std::polar(1.0, 15.0 * u.x() - 8.0 * u.y());
  return g1 + std::complex<double>(0.4, 0.3) * g2 + 0.4 * ramp * env;
}

FunctionSampler lobed_sampler() { return FunctionSampler(lobed_spectrum); }

std::vector<std::complex<double>> observed_at(const SpectrumSampler& s,
                                              const Pose& pose,
                                              const BandGrid& band) {
  return predict_band(s, pose, band);
}

}  // namespace

TEST_CASE("search config validation rejects bad values") {
  SearchConfig ok;
  CHECK_NOTHROW(ok.validate());
  SearchConfig bad = ok;
  bad.coarse_rot_step_deg = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ok;
  bad.trans_step = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ok;
  bad.top_k = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ok;
  bad.n_refine_iters = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("similarity hits its extreme and orthogonal cases") {
  const auto cfg = small_cfg();
  BandGrid band(cfg, cfg.roi_size_px);
  const auto sampler = lobed_sampler();
  const auto pred = observed_at(sampler, Pose{}, band);

  std::vector<std::complex<double>> neg(pred), rot(pred);
  for (auto& v : neg) v = -v;
  for (auto& v : rot) v *= std::complex<double>(0.0, 1.0);

  CHECK(similarity(pred, pred) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(similarity(pred, neg) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(similarity(pred, rot)) < 1e-12);
}

TEST_CASE("similarity is scale invariant and zero on empty fields") {
  const auto cfg = small_cfg(16);
  const auto sampler = lobed_sampler();
  auto f1 = predict_perturbation(sampler, Pose{}, cfg, 16);
  Pose other;
  other.rotation = Rotation::about_y(0.3);
  auto f2 = predict_perturbation(sampler, other, cfg, 16);

  const double base = similarity(f1, f2);
  ComplexField2D f1s = f1, f2s = f2;
  for (std::size_t i = 0; i < f1s.size(); ++i) f1s.data()[i] *= 2.0;
  for (std::size_t i = 0; i < f2s.size(); ++i) f2s.data()[i] *= 3.0;
  CHECK(similarity(f1s, f2s) == doctest::Approx(base).epsilon(1e-12));
  for (std::size_t i = 0; i < f1s.size(); ++i) f1s.data()[i] = -f1s.data()[i];
  CHECK(similarity(f1s, f2) == doctest::Approx(-base).epsilon(1e-12));

  ComplexField2D zero(16, 16, cfg.pixel_pitch_um, Domain::FourierSpace);
  CHECK(similarity(zero, f2) == 0.0);
  ComplexField2D wrong(32, 32, cfg.pixel_pitch_um, Domain::FourierSpace);
  CHECK_THROWS_AS(similarity(wrong, f2), ConfigError);
}

TEST_CASE("scored pose ordering: score first, identity wins ties, then t") {
  ScoredPose hi, lo;
  hi.score = 0.9;
  lo.score = 0.2;
  CHECK(scored_pose_less(hi, lo));
  CHECK_FALSE(scored_pose_less(lo, hi));

  ScoredPose ident, tilted;
  ident.score = tilted.score = 0.5;
  tilted.pose.rotation = Rotation::about_x(0.4);
  CHECK(scored_pose_less(ident, tilted));

  ScoredPose ta = ident, tb = ident;
  ta.pose.translation_um = Eigen::Vector2d(-1.0, 0.0);
  tb.pose.translation_um = Eigen::Vector2d(0.5, 0.0);
  CHECK(scored_pose_less(ta, tb));
}

TEST_CASE("spherically symmetric sampler resolves ties to the identity") {
  const auto cfg = small_cfg(16);
  BandGrid band(cfg, 16);
  FunctionSampler constant(
      [](const Eigen::Vector3d&) { return std::complex<double>(1.0, 0.0); });
  const auto obs = observed_at(constant, Pose{}, band);

  SearchConfig scfg;
  scfg.n_refine_iters = 2;
  const ScoredPose got = search_pose_band(obs, constant, band, scfg);
  CHECK(got.score == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(geodesic_distance(got.pose.rotation, Rotation::identity()) < 1e-12);
  CHECK(got.pose.translation_um.norm() < 1e-12);
}

TEST_CASE("plants a grid-aligned pose and recovers it") {
  const auto cfg = small_cfg();
  BandGrid band(cfg, cfg.roi_size_px);
  const auto sampler = lobed_sampler();
  const double W = cfg.roi_width_um();

  const auto grid = so3_coarse_grid(30.0);
  REQUIRE(grid.size() > 40);
  Pose truth;
  truth.rotation = grid[37];
  truth.translation_um = Eigen::Vector2d(0.2 * W, -0.1 * W);
  const auto obs = observed_at(sampler, truth, band);

  const ScoredPose got = search_pose_band(obs, sampler, band, SearchConfig{});
  CHECK(geodesic_distance(got.pose.rotation, truth.rotation) < kPi / 180.0);
  CHECK((got.pose.translation_um - truth.translation_um).norm() < 0.05 * W);
  CHECK(got.score > 0.999);
}

TEST_CASE("recovers an off-grid pose to within the final granularity") {
  const auto cfg = small_cfg();
  BandGrid band(cfg, cfg.roi_size_px);
  const auto sampler = lobed_sampler();
  const double W = cfg.roi_width_um();

  Pose truth;
  truth.rotation =
      Rotation::from_axis_angle(Eigen::Vector3d(1.0, 1.0, -0.5), 17.0 * kPi /
                                180.0);
  truth.translation_um = Eigen::Vector2d(0.233 * W, -0.047 * W);
  const auto obs = observed_at(sampler, truth, band);

  SearchTrace trace;
  const ScoredPose got =
      search_pose_band(obs, sampler, band, SearchConfig{}, nullptr, &trace);
  // Final rotational step is 30/2^5 deg; one refinement hop spans up to
  // sqrt(3) times that, so ~2.5 deg is the expected terminal granularity.
  CHECK(geodesic_distance(got.pose.rotation, truth.rotation) <
        2.5 * kPi / 180.0);
  CHECK((got.pose.translation_um - truth.translation_um).norm() < 0.02 * W);

  REQUIRE(trace.stage_best_score.size() == 6);
  for (std::size_t i = 1; i < trace.stage_best_score.size(); ++i)
    CHECK(trace.stage_best_score[i] >= trace.stage_best_score[i - 1] - 1e-9);
}

TEST_CASE("ramp-factored scoring matches one-shot prediction scoring") {
  const auto cfg = small_cfg();
  BandGrid band(cfg, cfg.roi_size_px);
  const auto sampler = lobed_sampler();
  const double W = cfg.roi_width_um();

  Pose data_pose;
  data_pose.rotation = Rotation::about_y(0.7);
  data_pose.translation_um = Eigen::Vector2d(0.1 * W, 0.05 * W);
  const auto obs = observed_at(sampler, data_pose, band);

  std::mt19937 rng(99);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Pose> candidates;
  for (int i = 0; i < 100; ++i) {
    Pose p;
    p.rotation = Rotation::from_axis_angle(
        Eigen::Vector3d(unit(rng), unit(rng), unit(rng)).normalized(),
        angle(rng));
    p.translation_um = Eigen::Vector2d(0.4 * W * unit(rng), 0.4 * W * unit(rng));
    // Duplicate every fourth rotation to exercise the shared-sample path.
    candidates.push_back(p);
    if (i % 4 == 0) {
      Pose q = p;
      q.translation_um = Eigen::Vector2d(0.4 * W * unit(rng), 0.0);
      candidates.push_back(q);
    }
  }

  const auto fast = score_candidates(obs, sampler, band, candidates);
  REQUIRE(fast.size() == candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double brute = score_pose(obs, sampler, band, candidates[i]);
    CHECK(std::abs(fast[i] - brute) < 1e-10);
  }
}

TEST_CASE("returned score equals a direct rescore of the returned pose") {
  const auto cfg = small_cfg();
  BandGrid band(cfg, cfg.roi_size_px);
  const auto sampler = lobed_sampler();
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    Pose truth;
    truth.rotation = Rotation::from_axis_angle(
        Eigen::Vector3d(unit(rng), unit(rng), unit(rng)).normalized(),
        0.9 * unit(rng));
    truth.translation_um =
        Eigen::Vector2d(unit(rng), unit(rng)) * 0.3 * cfg.roi_width_um();
    const auto obs = observed_at(sampler, truth, band);
    SearchConfig scfg;
    scfg.n_refine_iters = 3;
    const ScoredPose got = search_pose_band(obs, sampler, band, scfg);
    CHECK(std::abs(got.score - score_pose(obs, sampler, band, got.pose)) <
          1e-10);
  }
}

TEST_CASE("search_all preserves frame order and matches single searches") {
  const auto cfg = small_cfg(16);
  const auto sampler = lobed_sampler();
  const double W = cfg.roi_width_um();

  std::vector<Pose> poses(3);
  poses[0].rotation = Rotation::about_y(0.5);
  poses[1].rotation = Rotation::about_x(-0.4);
  poses[1].translation_um = Eigen::Vector2d(0.1 * W, 0.0);
  poses[2].rotation = Rotation::about_z(1.1);

  std::vector<ComplexField2D> frames;
  for (const auto& p : poses)
    frames.push_back(predict_perturbation(sampler, p, cfg, 16));

  SearchConfig scfg;
  scfg.n_refine_iters = 2;
  const auto all = search_all(frames, sampler, cfg, scfg);
  REQUIRE(all.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const ScoredPose one = search_pose(frames[i], sampler, cfg, scfg);
    CHECK(all[i].score == one.score);
    CHECK(geodesic_distance(all[i].pose.rotation, one.pose.rotation) < 1e-12);
    CHECK(all[i].pose.translation_um == one.pose.translation_um);
  }

  std::vector<ComplexField2D> permuted{frames[2], frames[0], frames[1]};
  const auto per = search_all(permuted, sampler, cfg, scfg);
  CHECK(per[0].score == all[2].score);
  CHECK(per[1].score == all[0].score);
  CHECK(per[2].score == all[1].score);
}

TEST_CASE("90 planted frames recover with sub-degree median error") {
  const auto cfg = small_cfg();
  BandGrid band(cfg, cfg.roi_size_px);
  const auto sampler = lobed_sampler();
  const double W = cfg.roi_width_um();

  const auto grid = so3_coarse_grid(30.0);
  std::mt19937 rng(2025);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(grid.size()) - 1);
  std::uniform_int_distribution<int> tpick(-3, 3);

  std::vector<Pose> truths(90);
  std::vector<std::vector<std::complex<double>>> bands(90);
  for (int i = 0; i < 90; ++i) {
    truths[i].rotation = grid[pick(rng)];
    truths[i].translation_um =
        Eigen::Vector2d(0.1 * tpick(rng) * W, 0.1 * tpick(rng) * W);
    bands[i] = observed_at(sampler, truths[i], band);
  }

  const auto got = search_all_band(bands, sampler, band, SearchConfig{});
  std::vector<double> errs(90);
  for (int i = 0; i < 90; ++i)
    errs[i] = geodesic_distance(got[i].pose.rotation, truths[i].rotation);
  std::nth_element(errs.begin(), errs.begin() + 45, errs.end());
  CHECK(errs[45] < 1.5 * kPi / 180.0);
}

TEST_CASE("warm start never scores below the incumbent pose") {
  const auto cfg = small_cfg();
  BandGrid band(cfg, cfg.roi_size_px);
  const auto sampler = lobed_sampler();

  Pose truth;
  truth.rotation =
      Rotation::from_axis_angle(Eigen::Vector3d(0.2, 1.0, 0.4), 0.5);
  truth.translation_um = Eigen::Vector2d(0.31, -0.77);
  const auto obs = observed_at(sampler, truth, band);

  // A deliberately crippled search that cannot reach the planted pose on
  // its own; the warm-started incumbent must still survive.
  SearchConfig scfg;
  scfg.coarse_rot_step_deg = 90.0;
  scfg.trans_half_range = 0.0;
  scfg.trans_step = 0.1;
  scfg.top_k = 1;
  scfg.n_refine_iters = 1;
  scfg.warm_start = true;

  const double incumbent = score_pose(obs, sampler, band, truth);
  const ScoredPose got = search_pose_band(obs, sampler, band, scfg, &truth);
  CHECK(got.score >= incumbent - 1e-12);
  CHECK(got.score > 0.999);
}

TEST_CASE("search rejects an observation that does not match the band") {
  const auto cfg = small_cfg(16);
  BandGrid band(cfg, 16);
  std::vector<std::complex<double>> wrong(band.size() + 3);
  const auto sampler = lobed_sampler();
  CHECK_THROWS_AS(search_pose_band(wrong, sampler, band, SearchConfig{}),
                  ConfigError);
  CHECK_THROWS_AS(score_pose(wrong, sampler, band, Pose{}), ConfigError);
}
