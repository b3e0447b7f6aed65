#include "omnifht/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <vector>

#include "omnifht/errors.hpp"
#include "omnifht/fft.hpp"
#include "omnifht/phantom.hpp"

namespace omnifht {

namespace {

void require_same_grid(const Volume3D& a, const Volume3D& b,
                       const char* where) {
  if (a.n() != b.n())
    throw ConfigError(std::string(where) + ": grid sizes differ, " +
                      std::to_string(a.n()) + " vs " + std::to_string(b.n()));
  if (a.voxel_pitch_um() != b.voxel_pitch_um())
    throw ConfigError(std::string(where) + ": voxel pitches differ");
}

// Pearson correlation of two equally sized real sequences.
double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  const double vx = n * sxx - sx * sx, vy = n * syy - sy * sy;
  if (vx <= 0.0 || vy <= 0.0) return 0.0;
  return (n * sxy - sx * sy) / std::sqrt(vx * vy);
}

Volume3D downsample2(const Volume3D& v) {
  const int n = v.n() / 2;
  Volume3D out(n, v.voxel_pitch_um() * 2.0);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        std::complex<double> s{};
        for (int dz = 0; dz <= 1; ++dz)
          for (int dy = 0; dy <= 1; ++dy)
            for (int dx = 0; dx <= 1; ++dx)
              s += v.at(2 * z + dz, 2 * y + dy, 2 * x + dx);
        out.at(z, y, x) = s * 0.125;
      }
  return out;
}

}  // namespace

std::vector<FscShell> fsc(const Volume3D& vol_a, const Volume3D& vol_b) {
  require_same_grid(vol_a, vol_b, "fsc");
  const int n = vol_a.n();
  const int h = n / 2;
  const std::size_t total = vol_a.size();

  std::vector<std::complex<double>> fa(vol_a.data(), vol_a.data() + total);
  std::vector<std::complex<double>> fb(vol_b.data(), vol_b.data() + total);
  fft::forward_3d(fa.data(), n, n, n);
  fft::forward_3d(fb.data(), n, n, n);

  std::vector<double> cross(h + 1, 0.0), ea(h + 1, 0.0), eb(h + 1, 0.0);
  std::size_t idx = 0;
  for (int z = 0; z < n; ++z) {
    const int fz = z < h ? z : z - n;
    for (int y = 0; y < n; ++y) {
      const int fy = y < h ? y : y - n;
      for (int x = 0; x < n; ++x, ++idx) {
        const int fx = x < h ? x : x - n;
        const double r = std::sqrt(
            static_cast<double>(fx) * fx + static_cast<double>(fy) * fy +
            static_cast<double>(fz) * fz);
        const int s = static_cast<int>(std::lround(r));
        if (s > h) continue;
        cross[s] += (fa[idx] * std::conj(fb[idx])).real();
        ea[s] += std::norm(fa[idx]);
        eb[s] += std::norm(fb[idx]);
      }
    }
  }

  std::vector<FscShell> curve(h + 1);
  const double df = 1.0 / (n * vol_a.voxel_pitch_um());
  for (int s = 0; s <= h; ++s) {
    curve[s].freq_per_um = s * df;
    const double denom = ea[s] * eb[s];
    curve[s].correlation = denom > 0.0 ? cross[s] / std::sqrt(denom) : 0.0;
  }
  return curve;
}

Resolution resolution_at(const std::vector<FscShell>& curve, double threshold) {
  if (curve.empty()) throw ConfigError("resolution_at: empty curve");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ConfigError("resolution_at: threshold must lie in (0, 1)");
  for (std::size_t s = 1; s < curve.size(); ++s) {
    if (curve[s].correlation >= threshold) continue;
    if (s == 1) return {1.0 / curve[1].freq_per_um, true};
    const double c0 = curve[s - 1].correlation, c1 = curve[s].correlation;
    const double f0 = curve[s - 1].freq_per_um, f1 = curve[s].freq_per_um;
    const double f_cross = f0 + (c0 - threshold) / (c0 - c1) * (f1 - f0);
    return {1.0 / f_cross, true};
  }
  return {1.0 / curve.back().freq_per_um, false};
}

double volume_correlation(const Volume3D& vol_a, const Volume3D& vol_b,
                          double background) {
  require_same_grid(vol_a, vol_b, "volume_correlation");
  std::vector<double> xa(vol_a.size()), xb(vol_b.size());
  for (std::size_t i = 0; i < vol_a.size(); ++i) {
    xa[i] = vol_a.data()[i].real() - background;
    xb[i] = vol_b.data()[i].real() - background;
  }
  return pearson(xa, xb);
}

Rotation align_volumes(const Volume3D& vol_a, const Volume3D& vol_b,
                       double background) {
  require_same_grid(vol_a, vol_b, "align_volumes");

  Volume3D small_a = vol_a, small_b = vol_b;
  while (small_a.n() > 32) {
    small_a = downsample2(small_a);
    small_b = downsample2(small_b);
  }

  const std::complex<double> fill(background, 0.0);
  Rotation best;
  double best_corr = volume_correlation(small_a,
                                        resample_rotated(small_b, best, fill),
                                        background);
  for (const Rotation& g : so3_coarse_grid(20.0)) {
    const double c = volume_correlation(
        small_a, resample_rotated(small_b, g, fill), background);
    if (c > best_corr) {
      best_corr = c;
      best = g;
    }
  }

  // Halving hill-climbs at full resolution: axis-angle hops along the 26
  // lattice directions, iterated until the step yields no improvement.
  best_corr = volume_correlation(vol_a, resample_rotated(vol_b, best, fill),
                                 background);
  for (double step_deg = 10.0; step_deg >= 0.625; step_deg /= 2.0) {
    const double rs = step_deg * std::numbers::pi / 180.0;
    bool improved = true;
    while (improved) {
      improved = false;
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dz = -1; dz <= 1; ++dz) {
            if (dx == 0 && dy == 0 && dz == 0) continue;
            const Eigen::Vector3d v(dx, dy, dz);
            const Rotation cand =
                Rotation::from_axis_angle(v, rs).compose(best);
            const double c = volume_correlation(
                vol_a, resample_rotated(vol_b, cand, fill), background);
            if (c > best_corr) {
              best_corr = c;
              best = cand;
              improved = true;
            }
          }
    }
  }
  return best;
}

HalfSetResult half_set_fsc(const std::vector<ComplexField2D>& frames,
                           const ReconFn& recon, double background,
                           const std::vector<int>* frame_ids) {
  if (frames.size() < 2)
    throw ConfigError("half_set_fsc: need at least two frames");
  std::vector<int> ids;
  if (frame_ids) {
    if (frame_ids->size() != frames.size())
      throw ConfigError("half_set_fsc: frame id list does not match frames");
    ids = *frame_ids;
  } else {
    ids.resize(frames.size());
    std::iota(ids.begin(), ids.end(), 0);
  }

  std::vector<std::size_t> order(frames.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (ids[order[i]] == ids[order[i - 1]])
      throw ConfigError("half_set_fsc: duplicate frame id " +
                        std::to_string(ids[order[i]]));

  std::vector<ComplexField2D> even, odd;
  std::vector<int> even_ids, odd_ids;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k % 2 == 0) {
      even.push_back(frames[order[k]]);
      even_ids.push_back(ids[order[k]]);
    } else {
      odd.push_back(frames[order[k]]);
      odd_ids.push_back(ids[order[k]]);
    }
  }

  const Volume3D va = recon(even, even_ids);
  const Volume3D vb = recon(odd, odd_ids);

  HalfSetResult res;
  res.gauge = align_volumes(va, vb, background);
  const Volume3D vb_aligned =
      resample_rotated(vb, res.gauge, std::complex<double>(background, 0.0));
  res.curve = fsc(va, vb_aligned);
  res.resolution = resolution_at(res.curve, 1.0 / 7.0);
  return res;
}

SliceMetrics slice_metrics(const Volume3D& vol, const Volume3D& truth,
                           double z_um) {
  require_same_grid(vol, truth, "slice_metrics");
  const int n = vol.n();
  const int zi = n / 2 + static_cast<int>(std::lround(z_um /
                                                      vol.voxel_pitch_um()));
  if (zi < 0 || zi >= n)
    throw ConfigError("slice_metrics: z = " + std::to_string(z_um) +
                      " um lies outside the volume");

  SliceMetrics m;
  std::vector<double> xa, xb;
  xa.reserve(static_cast<std::size_t>(n) * n);
  xb.reserve(static_cast<std::size_t>(n) * n);
  double abs_sum = 0.0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double a = vol.at(zi, y, x).real();
      const double b = truth.at(zi, y, x).real();
      abs_sum += std::abs(a - b);
      xa.push_back(a);
      xb.push_back(b);
    }
  m.mae = abs_sum / (static_cast<double>(n) * n);
  m.cross_corr = pearson(xa, xb);
  m.profile_recon.resize(n);
  m.profile_truth.resize(n);
  for (int x = 0; x < n; ++x) {
    m.profile_recon[x] = vol.at(zi, n / 2, x).real();
    m.profile_truth[x] = truth.at(zi, n / 2, x).real();
  }
  return m;
}

PoseReport pose_report(const std::vector<Pose>& estimated,
                       const std::vector<Pose>& reference) {
  if (estimated.size() != reference.size())
    throw ConfigError("pose_report: track lengths differ, " +
                      std::to_string(estimated.size()) + " vs " +
                      std::to_string(reference.size()));
  PoseReport rep;
  rep.alignment = align_pose_tracks(estimated, reference, true);

  std::vector<double> errs = rep.alignment.residuals_rad;
  rep.mean_error_rad = rep.alignment.mean_residual_rad;
  if (!errs.empty()) {
    std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
    rep.median_error_rad = errs[errs.size() / 2];
  }

  for (std::size_t i = 0; i < estimated.size(); ++i) {
    Rotation est = estimated[i].rotation;
    if (rep.alignment.used_reflection) est = est.reflected_z();
    const Rotation aligned = rep.alignment.global.compose(est);
    rep.zxy_estimated.push_back(factor_zxy(aligned));
    rep.zxy_reference.push_back(factor_zxy(reference[i].rotation));
    rep.zyz_estimated.push_back(zyz_angles(aligned));
    rep.zyz_reference.push_back(zyz_angles(reference[i].rotation));
  }
  return rep;
}

}  // namespace omnifht
