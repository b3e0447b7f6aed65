#pragma once

#include <Eigen/Dense>

#include <vector>

#include "omnifht/field.hpp"
#include "omnifht/geometry.hpp"

namespace omnifht {

// Off-axis sideband: carrier center and bandpass radius in cycles/um.
struct SidebandParams {
  double carrier_fx_cyc_um = 0.0;
  double carrier_fy_cyc_um = 0.0;
  double radius_cyc_um = 0.0;
};

// Isolates the +1 diffraction order: circular bandpass at the carrier,
// recentered to DC (integer bin shift plus an exact residual ramp), inverse
// transform, then normalization so the border-median amplitude is 1.
ComplexField2D demodulate_offaxis(const ComplexField2D& hologram,
                                  const SidebandParams& params,
                                  const OpticsConfig& cfg);

// I = |O + exp(i 2 pi (fx x + fy y))|^2 on the object's grid.
ComplexField2D synthesize_offaxis_hologram(const ComplexField2D& object,
                                           const SidebandParams& params);

// Multiplies the spectrum by exp(i kz dz), kz = sqrt(k_m^2 - k_rho^2);
// evanescent modes are zeroed. Unitary on the propagating band.
ComplexField2D angular_spectrum_propagate(const ComplexField2D& field,
                                          double dz_um,
                                          const OpticsConfig& cfg);

// Unweighted least-squares unwrapping (discrete-cosine Poisson solve)
// followed by congruence projection, so output == input (mod 2 pi) at every
// pixel and the additive field is an integer number of cycles.
Eigen::MatrixXd unwrap_phase(const Eigen::MatrixXd& wrapped_rad);

// psi = ln|O| + i unwrap(arg O) for a background-normalized object field.
ComplexField2D rytov_perturbation(const ComplexField2D& object_field);

// Divides by the median amplitude over the outer border (margin_fraction of
// each dimension), making the background amplitude 1.
ComplexField2D normalize_background(const ComplexField2D& field,
                                    double margin_fraction = 0.1);

// Optional denoise: Gaussian blur with sigma in pixels (0 = no-op).
ComplexField2D gaussian_blur(const ComplexField2D& field, double sigma_px);

struct RoiTrack {
  std::vector<ComplexField2D> rois;     // unflagged crops, in frame order
  std::vector<int> source_frames;       // original index of each crop
  std::vector<int> flagged;             // excluded frames
  std::vector<Eigen::Vector2i> centers; // (row, col) per unflagged frame
};

// Otsu threshold on |psi|, largest connected component centroid, fixed-size
// crop. Frames are flagged when the foreground is empty, the centroid jumps
// more than roi_px/2 between consecutive frames, or the component area jumps
// by more than 50% (occlusion).
RoiTrack extract_roi_track(const std::vector<ComplexField2D>& frames,
                           int roi_px);

// Refocus scan: returns the dz in [dz_min, dz_max] (n_steps samples) whose
// propagated field has minimum amplitude variance. Phase objects develop
// amplitude contrast only away from focus, so the minimum marks the focal
// plane.
double autofocus_dz(const ComplexField2D& field, const OpticsConfig& cfg,
                    double dz_min_um, double dz_max_um, int n_steps);

// Locates the +1 sideband of a real off-axis hologram: strongest spectral
// peak outside the zero-order zone (radius 2 NA/lambda around DC), restricted
// to the fy >= 0 half-plane, refined to sub-bin accuracy by parabolic
// interpolation. Throws DataError unless the peak is at least 3x the median
// amplitude of its own radius annulus (no discernible carrier otherwise).
SidebandParams estimate_carrier(const ComplexField2D& hologram,
                                const OpticsConfig& cfg);

// Full hologram -> psi pipeline: carrier estimation on the first frame,
// demodulation, refocusing (fixed dz or per-frame autofocus scan), optional
// Gaussian denoise, Rytov transform, optional ROI tracking.
struct PreprocessConfig {
  double dz_um = 0.0;       // fixed refocus distance (ignored with autofocus)
  bool autofocus = false;   // scan [autofocus_min_um, autofocus_max_um]
  double autofocus_min_um = -20.0;
  double autofocus_max_um = 20.0;
  int autofocus_steps = 41;
  double blur_sigma_px = 0.0;  // 0 = no denoise
  int roi_px = 0;              // 0 = keep full frames, no tracking
};

struct PreprocessResult {
  std::vector<ComplexField2D> psi;  // per kept frame, ROI-cropped if requested
  RoiTrack track;                   // populated only when roi_px > 0
  SidebandParams carrier;
  std::vector<double> dz_used_um;   // refocus distance applied per frame
};

PreprocessResult preprocess_holograms(
    const std::vector<ComplexField2D>& holograms, const PreprocessConfig& pcfg,
    const OpticsConfig& cfg);

}  // namespace omnifht
