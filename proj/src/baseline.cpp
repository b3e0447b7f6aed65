#include "omnifht/baseline.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "omnifht/errors.hpp"
#include "omnifht/fft.hpp"
#include "omnifht/threading.hpp"

namespace omnifht {

namespace {

constexpr double kWeightFloor = 1e-6;

struct SplatGrid {
  std::vector<std::complex<double>> value;
  std::vector<double> weight;

  explicit SplatGrid(std::size_t total) : value(total), weight(total) {}

  void add(const SplatGrid& other) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      value[i] += other.value[i];
      weight[i] += other.weight[i];
    }
  }
};

// Trilinear scatter in centered index space; samples falling outside the
// grid are dropped.
void splat(SplatGrid& g, int n, double inv_dk, const FrequencyCoord& k,
           const std::complex<double>& v) {
  const double cx = k.kx * inv_dk + n / 2;
  const double cy = k.ky * inv_dk + n / 2;
  const double cz = k.kz * inv_dk + n / 2;
  const int x0 = static_cast<int>(std::floor(cx));
  const int y0 = static_cast<int>(std::floor(cy));
  const int z0 = static_cast<int>(std::floor(cz));
  const double fx = cx - x0, fy = cy - y0, fz = cz - z0;
  for (int dz = 0; dz <= 1; ++dz)
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx) {
        const int x = x0 + dx, y = y0 + dy, z = z0 + dz;
        if (x < 0 || y < 0 || z < 0 || x >= n || y >= n || z >= n) continue;
        const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy) *
                         (dz ? fz : 1.0 - fz);
        const std::size_t idx = (static_cast<std::size_t>(z) * n + y) * n + x;
        g.value[idx] += v * w;
        g.weight[idx] += w;
      }
}

}  // namespace

std::vector<Pose> uniform_single_axis_poses(int n_frames, double total_deg) {
  if (n_frames < 1)
    throw ConfigError("uniform_single_axis_poses: need at least one frame");
  std::vector<Pose> poses(static_cast<std::size_t>(n_frames));
  const double step_rad =
      total_deg * std::numbers::pi / 180.0 / static_cast<double>(n_frames);
  for (int i = 0; i < n_frames; ++i)
    poses[static_cast<std::size_t>(i)].rotation = Rotation::about_y(i * step_rad);
  return poses;
}

Volume3D grid_invert_potential(const std::vector<ComplexField2D>& psi_stack,
                               const std::vector<Pose>& poses, int n_grid,
                               const OpticsConfig& cfg) {
  if (psi_stack.size() != poses.size())
    throw ConfigError("grid_invert: frame and pose counts differ, " +
                      std::to_string(psi_stack.size()) + " vs " +
                      std::to_string(poses.size()));
  cfg.validate();
  const int n = n_grid;
  const double pitch = cfg.pixel_pitch_um;
  Volume3D out(n, pitch);  // validates n

  const std::size_t total = static_cast<std::size_t>(n) * n * n;
  const double inv_dk = n * pitch / (2.0 * std::numbers::pi);

  // Frames are splatted block-parallel into per-block grids, then reduced
  // in fixed block order, so accumulation is reproducible for a given
  // worker count.
  const std::size_t n_blocks = std::max<std::size_t>(
      1, std::min<std::size_t>(static_cast<std::size_t>(worker_count()),
                               psi_stack.size() ? psi_stack.size() : 1));
  std::vector<SplatGrid> partials(n_blocks, SplatGrid(total));
  parallel_for(n_blocks, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      const std::size_t lo = psi_stack.size() * b / n_blocks;
      const std::size_t hi = psi_stack.size() * (b + 1) / n_blocks;
      for (std::size_t i = lo; i < hi; ++i) {
        const ComplexField2D hat = psi_stack[i].domain() == Domain::FourierSpace
                                       ? psi_stack[i]
                                       : psi_stack[i].to_fourier();
        for (const auto& [coord, value] :
             measure_to_ewald(hat, poses[i], cfg))
          splat(partials[b], n, inv_dk, coord, value);
      }
    }
  });
  for (std::size_t b = 1; b < n_blocks; ++b) partials[0].add(partials[b]);

  // Normalize, move the centered spectrum to FFT layout, invert.
  std::vector<std::complex<double>> spec(total);
  const int h = n / 2;
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const std::size_t c =
            (static_cast<std::size_t>((z + h) % n) * n + (y + h) % n) * n +
            (x + h) % n;
        spec[(static_cast<std::size_t>(z) * n + y) * n + x] =
            partials[0].weight[c] > kWeightFloor
                ? partials[0].value[c] / partials[0].weight[c]
                : std::complex<double>{};
      }
  fft::inverse_3d(spec.data(), n, n, n);

  const double inv_p3 = 1.0 / std::pow(pitch, 3);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        out.at(z, y, x) =
            inv_p3 *
            spec[(static_cast<std::size_t>((z + h) % n) * n + (y + h) % n) * n +
                 (x + h) % n];
  return out;
}

Volume3D grid_invert(const std::vector<ComplexField2D>& psi_stack,
                     const std::vector<Pose>& poses, int n_grid,
                     const OpticsConfig& cfg) {
  return ri_from_potential(grid_invert_potential(psi_stack, poses, n_grid, cfg),
                           cfg);
}

}  // namespace omnifht
