#pragma once

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <utility>
#include <vector>

#include "omnifht/field.hpp"
#include "omnifht/geometry.hpp"
#include "omnifht/volume.hpp"

namespace omnifht {

// Abstract evaluator of the Fourier-domain scattering potential. Inputs are
// physical frequencies divided by 2*k_support, so the acquisition band maps
// into [-0.5, 0.5]^3 (rim points under rotation may poke slightly past).
class SpectrumSampler {
 public:
  virtual ~SpectrumSampler() = default;
  virtual std::complex<double> sample(const Eigen::Vector3d& k_norm) const = 0;
  // Batched evaluation; coords are columns. Default loops over sample().
  virtual void sample_many(const Eigen::Matrix3Xd& k_norm,
                           std::complex<double>* out) const;
};

class FunctionSampler : public SpectrumSampler {
 public:
  explicit FunctionSampler(
      std::function<std::complex<double>(const Eigen::Vector3d&)> fn)
      : fn_(std::move(fn)) {}
  std::complex<double> sample(const Eigen::Vector3d& k_norm) const override {
    return fn_(k_norm);
  }

 private:
  std::function<std::complex<double>(const Eigen::Vector3d&)> fn_;
};

// Trilinear interpolator over a centered N^3 spectrum grid with spacing
// 2*pi/(n*pitch); zero outside the grid.
class GriddedSampler : public SpectrumSampler {
 public:
  GriddedSampler(std::vector<std::complex<double>> centered_spectrum, int n,
                 double voxel_pitch_um, double k_support);
  // DFT of a stored real-space potential volume, calibrated to the
  // continuous transform (x pitch^3) and recentered.
  static GriddedSampler from_volume(const Volume3D& f, double k_support);

  std::complex<double> sample(const Eigen::Vector3d& k_norm) const override;

 private:
  std::vector<std::complex<double>> grid_;  // centered, C-order [kz][ky][kx]
  int n_;
  double inv_dk_, k_scale_;  // k_phys = k_norm * k_scale; index = k*inv_dk + n/2
};

// One in-band frequency bin of an ROI: FFT-layout indices and the Ewald lift.
struct BandBin {
  int row, col;
  double kx, ky, kz;  // rad/um, kz on the sphere of radius k_m
};

// Per-geometry table of in-band bins, Ewald coordinates, and the complex
// per-bin factor of the measurement model.
class BandGrid {
 public:
  BandGrid(const OpticsConfig& cfg, int roi_px);

  const std::vector<BandBin>& bins() const { return bins_; }
  std::size_t size() const { return bins_.size(); }
  int roi_px() const { return roi_px_; }
  double pixel_pitch_um() const { return pitch_; }
  double k_support() const { return k_support_; }
  double k_medium() const { return k_medium_; }

  // i/(2 kz) * exp(i (kz - k_m) z0): the t=0 measurement factor.
  const std::vector<std::complex<double>>& base_factors() const {
    return base_;
  }
  // exp(i (kx tx + ky ty)) per bin.
  std::vector<std::complex<double>> translation_ramp(
      const Eigen::Vector2d& t_um) const;

  // Object-frame sampler coordinates (columns) for rotation R: the axial
  // offset -k_m is applied before rotation, then the 2*k_support scaling.
  Eigen::Matrix3Xd object_coords(const Rotation& r) const;

 private:
  std::vector<BandBin> bins_;
  std::vector<std::complex<double>> base_;
  Eigen::Matrix3Xd shifted_;  // (kx, ky, kz - k_m) per bin
  int roi_px_;
  double pitch_, k_support_, k_medium_;
};

// f-hat values at the rotated band coordinates (no measurement factor).
std::vector<std::complex<double>> sample_band(const SpectrumSampler& sampler,
                                              const Rotation& r,
                                              const BandGrid& band);

// Band-limited prediction: sample_band * base factor * translation ramp.
std::vector<std::complex<double>> predict_band(const SpectrumSampler& sampler,
                                               const Pose& pose,
                                               const BandGrid& band);

std::vector<std::complex<double>> band_values(const ComplexField2D& psi_hat,
                                              const BandGrid& band);

ComplexField2D band_to_field(const std::vector<std::complex<double>>& values,
                             const BandGrid& band);

// Fourier-space psi-hat of the sampler under a pose; out-of-band bins are 0.
ComplexField2D predict_perturbation(const SpectrumSampler& sampler,
                                    const Pose& pose, const OpticsConfig& cfg,
                                    int roi_px);

// Exact per-frequency inverse of predict_perturbation: object-frame Ewald
// coordinates (sphere through the origin) with the de-modulated f-hat values.
std::vector<std::pair<FrequencyCoord, std::complex<double>>> measure_to_ewald(
    const ComplexField2D& psi_hat, const Pose& pose, const OpticsConfig& cfg);

// n = n_m sqrt(Re f / k_m^2 + 1); voxels with a negative radicand are set to
// n_m * 1e-3 and counted in *clamped if given.
Volume3D ri_from_potential(const Volume3D& f, const OpticsConfig& cfg,
                           long* clamped = nullptr);
Volume3D potential_from_ri(const Volume3D& n, const OpticsConfig& cfg);

// Realizes the sampler on the centered n^3 grid (zero outside the L2 ball
// ||k_norm|| > 0.5) and inverse-transforms to the real-space potential.
Volume3D extract_volume(const SpectrumSampler& sampler, int n_grid,
                        const OpticsConfig& cfg);

}  // namespace omnifht
