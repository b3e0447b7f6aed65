#pragma once

#include <Eigen/Dense>

#include <numbers>
#include <vector>

#include "omnifht/field.hpp"
#include "omnifht/geometry.hpp"
#include "omnifht/volume.hpp"

namespace omnifht {

struct PhantomSphere {
  Eigen::Vector3d center_um = Eigen::Vector3d::Zero();
  double radius_um = 0.0;
  double ri = 1.0;
};

// Sphere-set phantom over a medium background. Later spheres override
// earlier ones, so vacuoles are carved by placing medium-RI spheres inside
// the cell body.
struct Phantom {
  std::vector<PhantomSphere> spheres;

  // Cell body (r = 3 um, RI 1.35) with two medium-RI vacuoles, sized to fit
  // a 64^3 grid at 0.147 um pitch with margin for rotation.
  static Phantom vacuolated_cell(double n_medium);
};

enum class TrajectoryKind { kSingleAxis, kMultiAxisSinusoidal, kFile };

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::kSingleAxis;
  int n_frames = 180;
  double roll_step_deg = 2.0;
  double pitch_amp_deg = 30.0;
  double yaw_amp_deg = 30.0;
  double pitch_phase_rad = 0.0;
  double yaw_phase_rad = std::numbers::pi / 2.0;
};

// RI volume of the phantom, anti-aliased by averaging a 2x2x2 subsample of
// each voxel. Throws ConfigError when a sphere pokes outside the cube.
Volume3D rasterize(const Phantom& phantom, int n_grid, double voxel_pitch_um,
                   double n_medium);

// Ground-truth poses, t = 0. Roll advances by roll_step per frame about the
// transverse y axis (the flow-rotation axis; rolling about the optical axis
// would keep every frame on the same Ewald cap). The sinusoidal kind adds
// pitch/yaw = amp * sin(2 pi i / n_frames + phase).
std::vector<Pose> trajectory_poses(const TrajectorySpec& spec);

// out(x) = vol(R^{-1} x), trilinear about the grid center; samples falling
// outside the source grid read `fill`.
Volume3D resample_rotated(const Volume3D& vol, const Rotation& rotation,
                          std::complex<double> fill);

// Multislice propagation of a unit plane wave along z through the RI
// volume: per slice a thin phase screen exp(i k0 (n - n_m) dz) followed by
// an angular-spectrum step of dz in the medium, then back-propagation to
// the volume center plane and carrier removal. The result is the object
// field O at the focal plane, so downstream z0 = 0. z_substeps > 1 splits
// every slice for convergence checks.
ComplexField2D bpm_propagate(const Volume3D& ri_volume,
                             const OpticsConfig& cfg, int z_substeps = 1);

// 3D Fourier transform of the unit ball indicator of the given radius:
// 4 pi (sin(kr) - kr cos(kr)) / k^3, with the k -> 0 limit 4/3 pi r^3.
double ball_transform(double k_rad_um, double radius_um);

// Weak-scattering prediction for a centered ball of scattering-potential
// contrast delta_f: the closed-form ball transform pushed through the
// Ewald-sphere measurement map. Returns the band-limited real-space psi;
// rotation-invariant, and linear in delta_f.
ComplexField2D analytic_sphere_psi(double radius_um, double delta_f,
                                   const Pose& pose, const OpticsConfig& cfg,
                                   int roi_px);

struct Dataset {
  std::vector<ComplexField2D> psi;  // real-space Rytov perturbation per frame
  std::vector<Pose> poses;
  Volume3D ground_truth_ri;
};

// Per frame: trilinear-rotate the RI grid, bpm_propagate, Rytov transform,
// and the pose translation ramp when t is nonzero. Deterministic: identical
// inputs produce identical bytes.
Dataset generate_dataset(const Phantom& phantom, const std::vector<Pose>& poses,
                         const OpticsConfig& cfg, int roi_px);
Dataset generate_dataset(const Phantom& phantom, const TrajectorySpec& spec,
                         const OpticsConfig& cfg, int roi_px);

}  // namespace omnifht
