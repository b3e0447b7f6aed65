#include "omnifht/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "omnifht/errors.hpp"

namespace omnifht {
namespace {

constexpr double kPi = std::numbers::pi;

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

}  // namespace

Rotation::Rotation(double w, double x, double y, double z) : q_(w, x, y, z) {
  q_.normalize();
}

Rotation::Rotation(const Eigen::Quaterniond& q) : q_(q) { q_.normalize(); }

Rotation Rotation::from_unit_wxyz(double w, double x, double y, double z) {
  Rotation r;
  r.q_ = Eigen::Quaterniond(w, x, y, z);
  // q.normalize() is not a bitwise no-op on unit input, so deserialization
  // must bypass it for saved rotations to survive a round trip exactly.
  if (std::abs(r.q_.squaredNorm() - 1.0) > 1e-9)
    throw DataError("Rotation: quaternion is not unit length");
  return r;
}

Rotation Rotation::from_axis_angle(const Eigen::Vector3d& axis,
                                   double angle_rad) {
  const double n = axis.norm();
  if (n == 0.0) return Rotation();
  return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, axis / n)));
}

Rotation Rotation::about_x(double angle_rad) {
  return from_axis_angle(Eigen::Vector3d::UnitX(), angle_rad);
}
Rotation Rotation::about_y(double angle_rad) {
  return from_axis_angle(Eigen::Vector3d::UnitY(), angle_rad);
}
Rotation Rotation::about_z(double angle_rad) {
  return from_axis_angle(Eigen::Vector3d::UnitZ(), angle_rad);
}

Rotation Rotation::from_matrix(const Eigen::Matrix3d& m) {
  return Rotation(Eigen::Quaterniond(m));
}

Rotation Rotation::compose(const Rotation& rhs) const {
  return Rotation(q_ * rhs.q_);
}

Rotation Rotation::inverse() const { return Rotation(q_.conjugate()); }

Eigen::Vector3d Rotation::apply(const Eigen::Vector3d& v) const {
  return q_ * v;
}

Eigen::Vector4d Rotation::canonical_wxyz() const {
  Eigen::Vector4d v(q_.w(), q_.x(), q_.y(), q_.z());
  for (int i = 0; i < 4; ++i) {
    if (v[i] > 0.0) break;
    if (v[i] < 0.0) {
      v = -v;
      break;
    }
  }
  return v;
}

Rotation Rotation::reflected_z() const {
  return Rotation(q_.w(), -q_.x(), -q_.y(), q_.z());
}

double Rotation::angle() const {
  return 2.0 * std::acos(clamp_unit(std::abs(q_.w())));
}

double geodesic_distance(const Rotation& a, const Rotation& b) {
  const double d = std::abs(a.quat().dot(b.quat()));
  return 2.0 * std::acos(clamp_unit(d));
}

double OpticsConfig::k_medium() const {
  return 2.0 * kPi * n_medium / wavelength_um;
}

double OpticsConfig::k_support() const {
  return k_medium() * numerical_aperture / n_medium;
}

void OpticsConfig::validate() const {
  if (!(wavelength_um > 0.0)) throw ConfigError("wavelength_um must be > 0");
  if (!(n_medium > 0.0)) throw ConfigError("n_medium must be > 0");
  if (!(numerical_aperture > 0.0 && numerical_aperture < n_medium))
    throw ConfigError("numerical_aperture must satisfy 0 < NA < n_medium");
  if (!(pixel_pitch_um > 0.0)) throw ConfigError("pixel_pitch_um must be > 0");
  if (roi_size_px < 8 || (roi_size_px & (roi_size_px - 1)) != 0)
    throw ConfigError("roi_size_px must be a power of two >= 8");
  if (!std::isfinite(defocus_z0_um)) throw ConfigError("defocus_z0_um must be finite");
}

std::optional<FrequencyCoord> ewald_lift(double Kx, double Ky,
                                         const OpticsConfig& cfg) {
  const double ksup = cfg.k_support();
  const double rho2 = Kx * Kx + Ky * Ky;
  if (rho2 > ksup * ksup) return std::nullopt;
  const double km = cfg.k_medium();
  return FrequencyCoord{Kx, Ky, std::sqrt(km * km - rho2)};
}

std::vector<Eigen::Vector3d> fibonacci_sphere(int n) {
  // Golden-angle spiral; offset 0.5 keeps points away from the poles.
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(n);
  const double golden_angle = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * i;
    pts.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return pts;
}

std::vector<Rotation> so3_coarse_grid(double step_deg) {
  if (!(step_deg > 0.0 && step_deg <= 90.0))
    throw ConfigError("so3_coarse_grid: step_deg must be in (0, 90]");
  const double step_rad = step_deg * kPi / 180.0;

  // Direction count sized so the sphere covering radius stays below half the
  // total budget; the spin half-step consumes the other half. The composed
  // distance obeys cos(d/2) = cos(tilt/2) cos(spin/2), so the split is not
  // additive and this density passes the Monte-Carlo covering check.
  const int n_dir = static_cast<int>(std::ceil(10.0 / (step_rad * step_rad)));
  const int n_spin = static_cast<int>(std::ceil(360.0 / step_deg));

  std::vector<Eigen::Vector3d> dirs;
  dirs.emplace_back(0.0, 0.0, 1.0);  // identity viewing direction first
  for (const auto& v : fibonacci_sphere(n_dir)) dirs.push_back(v);

  std::vector<Rotation> grid;
  grid.reserve(dirs.size() * n_spin);
  std::set<std::array<long long, 4>> seen;
  const Eigen::Vector3d ez = Eigen::Vector3d::UnitZ();
  for (const auto& dir : dirs) {
    const Rotation tilt(Eigen::Quaterniond::FromTwoVectors(ez, dir));
    for (int s = 0; s < n_spin; ++s) {
      const Rotation r = tilt.compose(Rotation::about_z(2.0 * kPi * s / n_spin));
      const Eigen::Vector4d c = r.canonical_wxyz();
      std::array<long long, 4> key;
      for (int i = 0; i < 4; ++i)
        key[i] = static_cast<long long>(std::llround(c[i] * 1e9));
      if (seen.insert(key).second) grid.push_back(r);
    }
  }
  return grid;
}

std::vector<Pose> local_refine_grid(const Pose& center, double rot_step_deg,
                                    double trans_step_um) {
  if (!(rot_step_deg >= 0.0) || !(trans_step_um >= 0.0))
    throw ConfigError("local_refine_grid: steps must be >= 0");
  const double rs = rot_step_deg * kPi / 180.0;
  std::vector<Pose> out;
  out.reserve(243);
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dz = -1; dz <= 1; ++dz) {
        // Rotation-vector perturbation: a single axis-angle step along
        // (dx,dy,dz), so the largest candidate offset is sqrt(3)*step.
        const Eigen::Vector3d v(dx, dy, dz);
        const Rotation perturb =
            Rotation::from_axis_angle(v, v.norm() * rs);
        const Rotation rot = perturb.compose(center.rotation);
        for (int tx = -1; tx <= 1; ++tx)
          for (int ty = -1; ty <= 1; ++ty) {
            Pose p;
            p.rotation = rot;
            p.translation_um =
                center.translation_um +
                Eigen::Vector2d(tx * trans_step_um, ty * trans_step_um);
            out.push_back(p);
          }
      }
  return out;
}

namespace {

// Mean alignment residual; relative quaternions m_i = q_ref * q_est^-1 are
// precomputed so each candidate costs one 4-dot per frame:
// d(G*est, ref) = 2 acos |<q_G, m>|.
double mean_alignment_residual(const Eigen::Quaterniond& g,
                               const std::vector<Eigen::Quaterniond>& rel) {
  double sum = 0.0;
  const Eigen::Vector4d gv(g.w(), g.x(), g.y(), g.z());
  for (const auto& m : rel) {
    const double d = std::abs(gv[0] * m.w() + gv[1] * m.x() + gv[2] * m.y() +
                              gv[3] * m.z());
    sum += 2.0 * std::acos(clamp_unit(d));
  }
  return sum / rel.size();
}

TrackAlignment align_one_track(const std::vector<Rotation>& est,
                               const std::vector<Rotation>& ref) {
  std::vector<Eigen::Quaterniond> rel;
  rel.reserve(est.size());
  for (std::size_t i = 0; i < est.size(); ++i)
    rel.push_back(ref[i].quat() * est[i].quat().conjugate());

  Rotation best;
  double best_score = mean_alignment_residual(best.quat(), rel);
  for (const Rotation& g : so3_coarse_grid(5.0)) {
    const double s = mean_alignment_residual(g.quat(), rel);
    if (s < best_score) {
      best_score = s;
      best = g;
    }
  }
  for (double step = 2.5; step >= 0.25; step *= 0.5) {
    const double rs = step * kPi / 180.0;
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          const Eigen::Vector3d v(dx, dy, dz);
          const Rotation cand =
              Rotation::from_axis_angle(v, v.norm() * rs).compose(best);
          const double s = mean_alignment_residual(cand.quat(), rel);
          if (s < best_score) {
            best_score = s;
            best = cand;
          }
        }
  }

  TrackAlignment out;
  out.global = best;
  out.residuals_rad.reserve(est.size());
  for (std::size_t i = 0; i < est.size(); ++i)
    out.residuals_rad.push_back(
        geodesic_distance(best.compose(est[i]), ref[i]));
  out.mean_residual_rad = best_score;
  return out;
}

}  // namespace

TrackAlignment align_pose_tracks(const std::vector<Pose>& estimated,
                                 const std::vector<Pose>& reference,
                                 bool try_reflection) {
  if (estimated.size() != reference.size() || estimated.empty())
    throw DataError("align_pose_tracks: tracks must have equal nonzero length");

  std::vector<Rotation> est, ref;
  est.reserve(estimated.size());
  ref.reserve(reference.size());
  for (const auto& p : estimated) est.push_back(p.rotation);
  for (const auto& p : reference) ref.push_back(p.rotation);

  TrackAlignment direct = align_one_track(est, ref);
  if (!try_reflection) return direct;

  std::vector<Rotation> est_ref;
  est_ref.reserve(est.size());
  for (const auto& r : est) est_ref.push_back(r.reflected_z());
  TrackAlignment mirrored = align_one_track(est_ref, ref);
  if (mirrored.mean_residual_rad < direct.mean_residual_rad) {
    mirrored.used_reflection = true;
    return mirrored;
  }
  return direct;
}

EulerZXY factor_zxy(const Rotation& r) {
  const Eigen::Matrix3d m = r.matrix();
  EulerZXY e;
  const double sb = clamp_unit(m(2, 1));
  e.pitch_rad = std::asin(sb);
  if (std::abs(sb) < 1.0 - 1e-9) {
    e.roll_rad = std::atan2(-m(2, 0), m(2, 2));
    e.yaw_rad = std::atan2(-m(0, 1), m(1, 1));
  } else {
    // Gimbal-locked: only yaw+roll is determined; attribute it all to yaw.
    e.roll_rad = 0.0;
    e.yaw_rad = std::atan2(m(1, 0), m(0, 0));
  }
  return e;
}

Rotation compose_zxy(double roll_rad, double pitch_rad, double yaw_rad) {
  return Rotation::about_z(yaw_rad)
      .compose(Rotation::about_x(pitch_rad))
      .compose(Rotation::about_y(roll_rad));
}

Eigen::Vector3d zyz_angles(const Rotation& r) {
  return r.matrix().eulerAngles(2, 1, 2);
}

}  // namespace omnifht
