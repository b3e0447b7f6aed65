#include "omnifht/phantom.hpp"

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <sstream>

#include "omnifht/errors.hpp"
#include "omnifht/field_pipeline.hpp"
#include "omnifht/forward_model.hpp"
#include "omnifht/threading.hpp"

namespace omnifht {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr std::complex<double> kI{0.0, 1.0};
constexpr double kDegToRad = kPi / 180.0;
}  // namespace

Phantom Phantom::vacuolated_cell(double n_medium) {
  Phantom p;
  p.spheres.push_back({{0.0, 0.0, 0.0}, 3.0, 1.35});
  p.spheres.push_back({{1.1, 0.5, 0.7}, 0.9, n_medium});
  p.spheres.push_back({{-1.0, -0.6, -0.7}, 0.75, n_medium});
  return p;
}

Volume3D rasterize(const Phantom& phantom, int n_grid, double voxel_pitch_um,
                   double n_medium) {
  const double half = 0.5 * n_grid * voxel_pitch_um;
  if (phantom.spheres.empty())
    throw ConfigError("rasterize: phantom has no spheres");
  for (const PhantomSphere& s : phantom.spheres) {
    if (!(s.radius_um > 0.0))
      throw ConfigError("rasterize: sphere radius must be positive");
    if (s.center_um.cwiseAbs().maxCoeff() + s.radius_um > half) {
      std::ostringstream msg;
      msg << "rasterize: sphere of radius " << s.radius_um
          << " um pokes outside the " << 2.0 * half << " um cube";
      throw ConfigError(msg.str());
    }
  }
  Volume3D vol(n_grid, voxel_pitch_um);
  const double c = n_grid / 2.0;
  parallel_for(static_cast<std::size_t>(n_grid), [&](std::size_t zb,
                                                     std::size_t ze) {
    for (std::size_t z = zb; z < ze; ++z)
      for (int y = 0; y < n_grid; ++y)
        for (int x = 0; x < n_grid; ++x) {
          double acc = 0.0;
          for (int sub = 0; sub < 8; ++sub) {
            const double off_x = (sub & 1) ? 0.25 : -0.25;
            const double off_y = (sub & 2) ? 0.25 : -0.25;
            const double off_z = (sub & 4) ? 0.25 : -0.25;
            const Eigen::Vector3d pos((x - c + off_x) * voxel_pitch_um,
                                      (y - c + off_y) * voxel_pitch_um,
                                      (static_cast<double>(z) - c + off_z) *
                                          voxel_pitch_um);
            double ri = n_medium;
            for (const PhantomSphere& s : phantom.spheres)
              if ((pos - s.center_um).squaredNorm() <=
                  s.radius_um * s.radius_um)
                ri = s.ri;
            acc += ri;
          }
          vol.at(static_cast<int>(z), y, x) = acc / 8.0;
        }
  });
  return vol;
}

std::vector<Pose> trajectory_poses(const TrajectorySpec& spec) {
  if (spec.n_frames < 1)
    throw ConfigError("trajectory: n_frames must be at least 1");
  if (spec.kind == TrajectoryKind::kFile)
    throw ConfigError("trajectory: file trajectories carry explicit poses");
  std::vector<Pose> poses;
  poses.reserve(static_cast<std::size_t>(spec.n_frames));
  for (int i = 0; i < spec.n_frames; ++i) {
    const double roll = i * spec.roll_step_deg * kDegToRad;
    double pitch = 0.0, yaw = 0.0;
    if (spec.kind == TrajectoryKind::kMultiAxisSinusoidal) {
      const double u = 2.0 * kPi * i / spec.n_frames;
      pitch = spec.pitch_amp_deg * kDegToRad *
              std::sin(u + spec.pitch_phase_rad);
      yaw = spec.yaw_amp_deg * kDegToRad * std::sin(u + spec.yaw_phase_rad);
    }
    Pose p;
    p.rotation = compose_zxy(roll, pitch, yaw);
    poses.push_back(p);
  }
  return poses;
}

Volume3D resample_rotated(const Volume3D& vol, const Rotation& rotation,
                          std::complex<double> fill) {
  const int n = vol.n();
  Volume3D out(n, vol.voxel_pitch_um());
  // Voxel units: the isotropic pitch cancels from x = R x'.
  const Eigen::Matrix3d rinv = rotation.inverse().matrix();
  const double c = n / 2.0;
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t zb,
                                                std::size_t ze) {
    for (std::size_t z = zb; z < ze; ++z)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          const Eigen::Vector3d src =
              rinv * Eigen::Vector3d(x - c, y - c, static_cast<double>(z) - c);
          const double fx = src.x() + c, fy = src.y() + c, fz = src.z() + c;
          const int x0 = static_cast<int>(std::floor(fx));
          const int y0 = static_cast<int>(std::floor(fy));
          const int z0 = static_cast<int>(std::floor(fz));
          const double wx = fx - x0, wy = fy - y0, wz = fz - z0;
          std::complex<double> acc{};
          for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                const double w = (dx ? wx : 1.0 - wx) * (dy ? wy : 1.0 - wy) *
                                 (dz ? wz : 1.0 - wz);
                if (w == 0.0) continue;
                const int xi = x0 + dx, yi = y0 + dy, zi = z0 + dz;
                const bool inside = xi >= 0 && xi < n && yi >= 0 && yi < n &&
                                    zi >= 0 && zi < n;
                acc += w * (inside ? vol.at(zi, yi, xi) : fill);
              }
          out.at(static_cast<int>(z), y, x) = acc;
        }
  });
  return out;
}

ComplexField2D bpm_propagate(const Volume3D& ri_volume,
                             const OpticsConfig& cfg, int z_substeps) {
  if (z_substeps < 1)
    throw ConfigError("bpm: z_substeps must be at least 1");
  const int n = ri_volume.n();
  const double dz = ri_volume.voxel_pitch_um();
  const double sub_dz = dz / z_substeps;
  const double k0 = 2.0 * kPi / cfg.wavelength_um;
  ComplexField2D field(n, n, dz, Domain::RealSpace);
  for (std::size_t i = 0; i < field.size(); ++i) field.data()[i] = 1.0;
  std::vector<std::complex<double>> screen(static_cast<std::size_t>(n) * n);
  for (int z = 0; z < n; ++z) {
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        screen[static_cast<std::size_t>(y) * n + x] = std::exp(
            kI * (k0 * (ri_volume.at(z, y, x).real() - cfg.n_medium) *
                  sub_dz));
    for (int s = 0; s < z_substeps; ++s) {
      for (std::size_t i = 0; i < field.size(); ++i)
        field.data()[i] *= screen[i];
      field = angular_spectrum_propagate(field, sub_dz, cfg);
    }
  }
  // Exit plane is n*dz/2 past the center; refocus and strip the carrier the
  // net n*dz/2 of medium propagation put on the axial plane wave.
  field = angular_spectrum_propagate(field, -0.5 * n * dz, cfg);
  const std::complex<double> carrier =
      std::exp(kI * (cfg.k_medium() * 0.5 * n * dz));
  for (std::size_t i = 0; i < field.size(); ++i) field.data()[i] /= carrier;
  return field;
}

double ball_transform(double k_rad_um, double radius_um) {
  const double kr = k_rad_um * radius_um;
  if (kr < 1e-4) {
    const double volume = 4.0 / 3.0 * kPi * std::pow(radius_um, 3);
    return volume * (1.0 - kr * kr / 10.0);
  }
  return 4.0 * kPi * (std::sin(kr) - kr * std::cos(kr)) /
         (k_rad_um * k_rad_um * k_rad_um);
}

ComplexField2D analytic_sphere_psi(double radius_um, double delta_f,
                                   const Pose& pose, const OpticsConfig& cfg,
                                   int roi_px) {
  const double two_ks = 2.0 * cfg.k_support();
  FunctionSampler sampler([=](const Eigen::Vector3d& k_norm) {
    return std::complex<double>(
        delta_f * ball_transform(k_norm.norm() * two_ks, radius_um), 0.0);
  });
  return predict_perturbation(sampler, pose, cfg, roi_px).to_real_space();
}

Dataset generate_dataset(const Phantom& phantom,
                         const std::vector<Pose>& poses,
                         const OpticsConfig& cfg, int roi_px) {
  cfg.validate();
  if (poses.empty()) throw ConfigError("generate_dataset: empty pose list");
  Dataset ds{{},
             poses,
             rasterize(phantom, roi_px, cfg.pixel_pitch_um, cfg.n_medium)};
  ds.psi.reserve(poses.size());
  for (const Pose& pose : poses) {
    const Volume3D rotated =
        resample_rotated(ds.ground_truth_ri, pose.rotation, cfg.n_medium);
    ComplexField2D psi = rytov_perturbation(bpm_propagate(rotated, cfg));
    if (pose.translation_um.squaredNorm() > 0.0) {
      ComplexField2D hat = psi.to_fourier();
      for (int r = 0; r < hat.height(); ++r)
        for (int c = 0; c < hat.width(); ++c)
          hat.at(r, c) *= std::exp(kI * (hat.freq_col(c) *
                                             pose.translation_um.x() +
                                         hat.freq_row(r) *
                                             pose.translation_um.y()));
      psi = hat.to_real_space();
    }
    ds.psi.push_back(std::move(psi));
  }
  return ds;
}

Dataset generate_dataset(const Phantom& phantom, const TrajectorySpec& spec,
                         const OpticsConfig& cfg, int roi_px) {
  return generate_dataset(phantom, trajectory_poses(spec), cfg, roi_px);
}

}  // namespace omnifht
