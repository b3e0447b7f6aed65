#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "omnifht/field.hpp"
#include "omnifht/geometry.hpp"
#include "omnifht/volume.hpp"

namespace omnifht {

struct FscShell {
  double freq_per_um = 0.0;  // shell center, cycles per micrometer
  double correlation = 0.0;
};

// Fourier shell correlation over one-bin shells:
// Re(sum F_a conj(F_b)) / sqrt(sum |F_a|^2 * sum |F_b|^2) per shell, shells
// 0..n/2. Symmetric in its arguments and invariant to positive rescaling.
std::vector<FscShell> fsc(const Volume3D& vol_a, const Volume3D& vol_b);

struct Resolution {
  double value_um = 0.0;
  // False when the curve never dropped below the threshold; value_um then
  // holds the Nyquist-limited resolution (two voxel pitches).
  bool crossed = false;
};

// First crossing below the threshold, linearly interpolated between shells;
// shell 0 carries only the mean and is excluded.
Resolution resolution_at(const std::vector<FscShell>& curve, double threshold);

// Global rotation g maximizing the contrast correlation of the second
// volume resampled by g against the first; coarse grid at reduced
// resolution, then halving local refinements at full resolution. Contrast
// means value minus background (n_medium for RI volumes, 0 for potentials).
Rotation align_volumes(const Volume3D& vol_a, const Volume3D& vol_b,
                       double background);

double volume_correlation(const Volume3D& vol_a, const Volume3D& vol_b,
                          double background);

struct HalfSetResult {
  std::vector<FscShell> curve;
  Resolution resolution;  // at the 1/7 threshold
  Rotation gauge;         // applied to the second half before correlation
};

using ReconFn = std::function<Volume3D(const std::vector<ComplexField2D>&,
                                       const std::vector<int>& frame_ids)>;

// Splits frames into two interleaved half-sets (by index parity after
// sorting by frame id), reconstructs each independently, aligns the gauge
// rotation, and evaluates the half-set FSC. frame_ids defaults to 0..N-1.
HalfSetResult half_set_fsc(const std::vector<ComplexField2D>& frames,
                           const ReconFn& recon, double background,
                           const std::vector<int>* frame_ids = nullptr);

struct SliceMetrics {
  double mae = 0.0;
  double cross_corr = 0.0;                // Pearson over the slice
  std::vector<double> profile_recon;      // central row of the slice
  std::vector<double> profile_truth;
};

// Per-slice agreement at height z_um (0 is the volume center).
SliceMetrics slice_metrics(const Volume3D& vol, const Volume3D& truth,
                           double z_um);

struct PoseReport {
  TrackAlignment alignment;
  double median_error_rad = 0.0;
  double mean_error_rad = 0.0;
  // Trajectory-parameterization curves (roll/pitch/yaw) of the aligned
  // estimates and of the reference, plus ZYZ curves for plotting.
  std::vector<EulerZXY> zxy_estimated, zxy_reference;
  std::vector<Eigen::Vector3d> zyz_estimated, zyz_reference;
};

PoseReport pose_report(const std::vector<Pose>& estimated,
                       const std::vector<Pose>& reference);

}  // namespace omnifht
