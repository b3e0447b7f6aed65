#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <optional>
#include <vector>

namespace omnifht {

// Unit-quaternion rotation. Every constructor and operation renormalizes, so
// ||q|| == 1 holds within 1e-9 at all times.
class Rotation {
 public:
  Rotation() : q_(Eigen::Quaterniond::Identity()) {}
  Rotation(double w, double x, double y, double z);
  explicit Rotation(const Eigen::Quaterniond& q);

  static Rotation identity() { return Rotation(); }
  // Deserialization path: takes already-unit components without the
  // renormalization step so saved rotations round-trip bit-exactly. Throws
  // DataError when the components are not unit length.
  static Rotation from_unit_wxyz(double w, double x, double y, double z);
  static Rotation from_axis_angle(const Eigen::Vector3d& axis, double angle_rad);
  static Rotation about_x(double angle_rad);
  static Rotation about_y(double angle_rad);
  static Rotation about_z(double angle_rad);
  static Rotation from_matrix(const Eigen::Matrix3d& m);

  // compose(r).apply(v) == apply(r.apply(v)); `this` acts last.
  Rotation compose(const Rotation& rhs) const;
  Rotation inverse() const;
  Eigen::Vector3d apply(const Eigen::Vector3d& v) const;
  Eigen::Matrix3d matrix() const { return q_.toRotationMatrix(); }
  const Eigen::Quaterniond& quat() const { return q_; }

  // Sign-canonicalized (w,x,y,z): first nonzero component positive. Used for
  // deterministic ordering and tie-breaking.
  Eigen::Vector4d canonical_wxyz() const;

  // Conjugation by the mirror z -> -z; the rotation a reflected volume
  // would require in place of this one.
  Rotation reflected_z() const;

  double angle() const;  // rotation angle in [0, pi]

 private:
  Eigen::Quaterniond q_;
};

inline Rotation operator*(const Rotation& a, const Rotation& b) {
  return a.compose(b);
}

// 2*acos(|<qa,qb>|), the rotation angle of a*inverse(b). Range [0, pi],
// symmetric, invariant to quaternion sign.
double geodesic_distance(const Rotation& a, const Rotation& b);

struct Pose {
  Rotation rotation;
  Eigen::Vector2d translation_um = Eigen::Vector2d::Zero();
};

struct OpticsConfig {
  double wavelength_um = 0.532;
  double n_medium = 1.33;
  double numerical_aperture = 0.7;
  double pixel_pitch_um = 0.147;
  int roi_size_px = 64;
  double defocus_z0_um = 0.0;

  double k_medium() const;   // 2*pi*n_medium/wavelength
  double k_support() const;  // NA disk radius in frequency, k_m*NA/n_medium
  double roi_width_um() const { return pixel_pitch_um * roi_size_px; }
  void validate() const;  // throws ConfigError
};

struct FrequencyCoord {
  double kx = 0.0, ky = 0.0, kz = 0.0;  // rad/um
};

// Lifts a transverse frequency onto the Ewald sphere of radius k_m,
// kz = sqrt(k_m^2 - Kx^2 - Ky^2). Illumination is along +z. Returns nullopt
// outside the NA support disk Kx^2+Ky^2 <= k_support^2.
std::optional<FrequencyCoord> ewald_lift(double Kx, double Ky,
                                         const OpticsConfig& cfg);

// Quasi-uniform cover of SO(3) with covering radius <= step_deg: golden-ratio
// sphere points for the viewing direction (plus +z exactly, so the identity
// is element 0) crossed with a uniform in-plane angle. Deterministic order.
std::vector<Rotation> so3_coarse_grid(double step_deg);

// 3x3x3 rotational neighborhood (axis perturbations of -step..+step about
// x, y, z composed onto the center) x 3x3 translation neighborhood.
// 243 candidates, center included.
std::vector<Pose> local_refine_grid(const Pose& center, double rot_step_deg,
                                    double trans_step_um);

// Unit sphere points along the golden-angle spiral; quasi-uniform for any n.
std::vector<Eigen::Vector3d> fibonacci_sphere(int n);

struct TrackAlignment {
  Rotation global;                    // minimizer of mean d(G*est[i], ref[i])
  std::vector<double> residuals_rad;  // per-frame d(G*est[i], ref[i])
  double mean_residual_rad = 0.0;
  bool used_reflection = false;
};

// Finds the single global rotation minimizing the mean geodesic distance
// between G*estimated[i] and reference[i]; 5-degree grid search followed by
// local refinement to 0.5 degrees. With try_reflection, also evaluates the
// z-mirror-conjugated estimated track and keeps whichever aligns better.
TrackAlignment align_pose_tracks(const std::vector<Pose>& estimated,
                                 const std::vector<Pose>& reference,
                                 bool try_reflection = false);

// Factorization R = about_z(yaw) * about_x(pitch) * about_y(roll); the
// parameterization of the simulated acquisition trajectories.
struct EulerZXY {
  double roll_rad = 0.0, pitch_rad = 0.0, yaw_rad = 0.0;
};
EulerZXY factor_zxy(const Rotation& r);
Rotation compose_zxy(double roll_rad, double pitch_rad, double yaw_rad);

// ZYZ Euler angles (alpha, beta, gamma), R = Rz(alpha)*Ry(beta)*Rz(gamma).
Eigen::Vector3d zyz_angles(const Rotation& r);

}  // namespace omnifht
