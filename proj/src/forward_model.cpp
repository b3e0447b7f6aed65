#include "omnifht/forward_model.hpp"

#include <cmath>
#include <cstddef>

#include "omnifht/errors.hpp"
#include "omnifht/fft.hpp"
#include "omnifht/threading.hpp"

namespace omnifht {

namespace {
constexpr std::complex<double> kI{0.0, 1.0};
}

void SpectrumSampler::sample_many(const Eigen::Matrix3Xd& k_norm,
                                  std::complex<double>* out) const {
  const Eigen::Index m = k_norm.cols();
  for (Eigen::Index j = 0; j < m; ++j) out[j] = sample(k_norm.col(j));
}

GriddedSampler::GriddedSampler(std::vector<std::complex<double>> spectrum,
                               int n, double voxel_pitch_um, double k_support)
    : grid_(std::move(spectrum)), n_(n) {
  if (n <= 0 || grid_.size() != static_cast<std::size_t>(n) * n * n)
    throw DataError("gridded sampler: spectrum size does not match n^3");
  const double dk = 2.0 * M_PI / (n * voxel_pitch_um);
  inv_dk_ = 1.0 / dk;
  k_scale_ = 2.0 * k_support;
}

GriddedSampler GriddedSampler::from_volume(const Volume3D& f,
                                           double k_support) {
  const int n = f.n();
  const std::size_t total = static_cast<std::size_t>(n) * n * n;
  const int h = n / 2;
  // Recenter r=0 to index 0, transform, calibrate to the continuous FT.
  std::vector<std::complex<double>> buf(total);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        buf[(static_cast<std::size_t>(z) * n + y) * n + x] =
            f.at((z + h) % n, (y + h) % n, (x + h) % n);
  fft::forward_3d(buf.data(), n, n, n);
  const double p3 = std::pow(f.voxel_pitch_um(), 3);
  std::vector<std::complex<double>> centered(total);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        centered[(static_cast<std::size_t>(z) * n + y) * n + x] =
            p3 * buf[(static_cast<std::size_t>((z + h) % n) * n +
                      (y + h) % n) *
                         n +
                     (x + h) % n];
  return GriddedSampler(std::move(centered), n, f.voxel_pitch_um(), k_support);
}

std::complex<double> GriddedSampler::sample(
    const Eigen::Vector3d& k_norm) const {
  const double half = n_ / 2.0;
  const double fx = k_norm.x() * k_scale_ * inv_dk_ + half;
  const double fy = k_norm.y() * k_scale_ * inv_dk_ + half;
  const double fz = k_norm.z() * k_scale_ * inv_dk_ + half;
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const int z0 = static_cast<int>(std::floor(fz));
  const double wx = fx - x0, wy = fy - y0, wz = fz - z0;
  auto fetch = [&](int z, int y, int x) -> std::complex<double> {
    if (x < 0 || x >= n_ || y < 0 || y >= n_ || z < 0 || z >= n_) return {};
    return grid_[(static_cast<std::size_t>(z) * n_ + y) * n_ + x];
  };
  std::complex<double> acc{};
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? wx : 1.0 - wx) * (dy ? wy : 1.0 - wy) *
                         (dz ? wz : 1.0 - wz);
        if (w != 0.0) acc += w * fetch(z0 + dz, y0 + dy, x0 + dx);
      }
  return acc;
}

BandGrid::BandGrid(const OpticsConfig& cfg, int roi_px)
    : roi_px_(roi_px),
      pitch_(cfg.pixel_pitch_um),
      k_support_(cfg.k_support()),
      k_medium_(cfg.k_medium()) {
  cfg.validate();
  const double km = k_medium_;
  for (int r = 0; r < roi_px; ++r) {
    const double ky = fft_freq(r, roi_px, pitch_);
    for (int c = 0; c < roi_px; ++c) {
      const double kx = fft_freq(c, roi_px, pitch_);
      auto lifted = ewald_lift(kx, ky, cfg);
      if (!lifted) continue;
      bins_.push_back({r, c, lifted->kx, lifted->ky, lifted->kz});
    }
  }
  const std::size_t m = bins_.size();
  base_.resize(m);
  shifted_.resize(3, static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    const BandBin& b = bins_[j];
    base_[j] = kI / (2.0 * b.kz) *
               std::exp(kI * ((b.kz - km) * cfg.defocus_z0_um));
    shifted_.col(static_cast<Eigen::Index>(j)) =
        Eigen::Vector3d(b.kx, b.ky, b.kz - km);
  }
}

std::vector<std::complex<double>> BandGrid::translation_ramp(
    const Eigen::Vector2d& t_um) const {
  std::vector<std::complex<double>> ramp(bins_.size());
  for (std::size_t j = 0; j < bins_.size(); ++j)
    ramp[j] = std::exp(kI * (bins_[j].kx * t_um.x() + bins_[j].ky * t_um.y()));
  return ramp;
}

Eigen::Matrix3Xd BandGrid::object_coords(const Rotation& r) const {
  const Eigen::Matrix3d rinv = r.inverse().matrix();
  return (rinv * shifted_) / (2.0 * k_support_);
}

std::vector<std::complex<double>> sample_band(const SpectrumSampler& sampler,
                                              const Rotation& r,
                                              const BandGrid& band) {
  std::vector<std::complex<double>> out(band.size());
  sampler.sample_many(band.object_coords(r), out.data());
  return out;
}

std::vector<std::complex<double>> predict_band(const SpectrumSampler& sampler,
                                               const Pose& pose,
                                               const BandGrid& band) {
  std::vector<std::complex<double>> vals =
      sample_band(sampler, pose.rotation, band);
  const auto& base = band.base_factors();
  const auto ramp = band.translation_ramp(pose.translation_um);
  for (std::size_t j = 0; j < vals.size(); ++j) vals[j] *= base[j] * ramp[j];
  return vals;
}

std::vector<std::complex<double>> band_values(const ComplexField2D& psi_hat,
                                              const BandGrid& band) {
  if (psi_hat.domain() != Domain::FourierSpace)
    throw DataError("band_values requires a fourier-space field");
  if (psi_hat.height() != band.roi_px() || psi_hat.width() != band.roi_px())
    throw DataError("band_values: field size does not match the band grid");
  std::vector<std::complex<double>> out(band.size());
  const auto& bins = band.bins();
  for (std::size_t j = 0; j < bins.size(); ++j)
    out[j] = psi_hat.at(bins[j].row, bins[j].col);
  return out;
}

ComplexField2D band_to_field(const std::vector<std::complex<double>>& values,
                             const BandGrid& band) {
  if (values.size() != band.size())
    throw DataError("band_to_field: value count does not match the band grid");
  ComplexField2D field(band.roi_px(), band.roi_px(), band.pixel_pitch_um(),
                       Domain::FourierSpace);
  const auto& bins = band.bins();
  for (std::size_t j = 0; j < bins.size(); ++j)
    field.at(bins[j].row, bins[j].col) = values[j];
  return field;
}

ComplexField2D predict_perturbation(const SpectrumSampler& sampler,
                                    const Pose& pose, const OpticsConfig& cfg,
                                    int roi_px) {
  BandGrid band(cfg, roi_px);
  return band_to_field(predict_band(sampler, pose, band), band);
}

std::vector<std::pair<FrequencyCoord, std::complex<double>>> measure_to_ewald(
    const ComplexField2D& psi_hat, const Pose& pose, const OpticsConfig& cfg) {
  BandGrid band(cfg, psi_hat.height());
  const auto vals = band_values(psi_hat, band);
  const auto& base = band.base_factors();
  const auto ramp = band.translation_ramp(pose.translation_um);
  const Eigen::Matrix3d rinv = pose.rotation.inverse().matrix();
  const double km = cfg.k_medium();
  std::vector<std::pair<FrequencyCoord, std::complex<double>>> out;
  out.reserve(vals.size());
  const auto& bins = band.bins();
  for (std::size_t j = 0; j < vals.size(); ++j) {
    const Eigen::Vector3d k =
        rinv * Eigen::Vector3d(bins[j].kx, bins[j].ky, bins[j].kz - km);
    out.push_back({FrequencyCoord{k.x(), k.y(), k.z()},
                   vals[j] / (base[j] * ramp[j])});
  }
  return out;
}

Volume3D ri_from_potential(const Volume3D& f, const OpticsConfig& cfg,
                           long* clamped) {
  const double km2 = cfg.k_medium() * cfg.k_medium();
  Volume3D n(f.n(), f.voxel_pitch_um());
  long bad = 0;
  const std::size_t total = f.size();
  for (std::size_t i = 0; i < total; ++i) {
    const double radicand = f.data()[i].real() / km2 + 1.0;
    if (radicand < 0.0) {
      n.data()[i] = cfg.n_medium * 1e-3;
      ++bad;
    } else {
      n.data()[i] = cfg.n_medium * std::sqrt(radicand);
    }
  }
  if (clamped) *clamped = bad;
  return n;
}

Volume3D potential_from_ri(const Volume3D& n, const OpticsConfig& cfg) {
  const double km2 = cfg.k_medium() * cfg.k_medium();
  const double inv_nm = 1.0 / cfg.n_medium;
  Volume3D f(n.n(), n.voxel_pitch_um());
  const std::size_t total = n.size();
  for (std::size_t i = 0; i < total; ++i) {
    const double ratio = n.data()[i].real() * inv_nm;
    f.data()[i] = km2 * (ratio * ratio - 1.0);
  }
  return f;
}

Volume3D extract_volume(const SpectrumSampler& sampler, int n_grid,
                        const OpticsConfig& cfg) {
  const int n = n_grid;
  const double pitch = cfg.pixel_pitch_um;
  const double inv_2ks = 1.0 / (2.0 * cfg.k_support());
  const std::size_t total = static_cast<std::size_t>(n) * n * n;
  std::vector<std::complex<double>> spec(total);

  // Batch per z-plane so the sampler's vectorized path gets sizable blocks.
  // Only coordinates inside the ball are evaluated; the rest stay zero.
  parallel_for(n, [&](long z0, long z1) {
    Eigen::Matrix3Xd coords(3, static_cast<Eigen::Index>(n) * n);
    std::vector<std::size_t> where(static_cast<std::size_t>(n) * n);
    for (long z = z0; z < z1; ++z) {
      const double kz = fft_freq(static_cast<int>(z), n, pitch);
      Eigen::Index m = 0;
      for (int y = 0; y < n; ++y) {
        const double ky = fft_freq(y, n, pitch);
        for (int x = 0; x < n; ++x) {
          const Eigen::Vector3d k(fft_freq(x, n, pitch) * inv_2ks,
                                  ky * inv_2ks, kz * inv_2ks);
          if (k.norm() > 0.5) continue;
          coords.col(m) = k;
          where[static_cast<std::size_t>(m++)] =
              (static_cast<std::size_t>(z) * n + y) * n + x;
        }
      }
      if (m == 0) continue;
      std::vector<std::complex<double>> vals(static_cast<std::size_t>(m));
      sampler.sample_many(coords.leftCols(m), vals.data());
      for (Eigen::Index i = 0; i < m; ++i)
        spec[where[static_cast<std::size_t>(i)]] = vals[static_cast<std::size_t>(i)];
    }
  });

  fft::inverse_3d(spec.data(), n, n, n);
  const double inv_p3 = 1.0 / std::pow(pitch, 3);
  Volume3D vol(n, pitch);
  const int h = n / 2;
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        vol.at(z, y, x) = inv_p3 * spec[(static_cast<std::size_t>((z + h) % n) *
                                             n +
                                         (y + h) % n) *
                                            n +
                                        (x + h) % n];
  return vol;
}

}  // namespace omnifht
