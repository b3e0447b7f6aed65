#pragma once

#include <complex>
#include <string>
#include <vector>

#include "omnifht/errors.hpp"

namespace omnifht {

// N^3 grid of the scattering potential f(r) (complex) or refractive index
// n(r) (real part used). C-order [z][y][x]; real-space origin at voxel
// (N/2, N/2, N/2); voxel pitch equals the pixel pitch of the source
// projections.
class Volume3D {
 public:
  Volume3D() = default;
  Volume3D(int n, double voxel_pitch_um)
      : n_(n),
        voxel_pitch_um_(voxel_pitch_um),
        data_(static_cast<std::size_t>(n) * n * n) {
    if (n < 2 || (n & (n - 1)) != 0)
      throw DataError("Volume3D: grid size must be a power of two, got " +
                      std::to_string(n));
    if (!(voxel_pitch_um > 0.0))
      throw DataError("Volume3D: voxel pitch must be positive");
  }

  int n() const { return n_; }
  double voxel_pitch_um() const { return voxel_pitch_um_; }

  std::complex<double>& at(int z, int y, int x) {
    return data_[(static_cast<std::size_t>(z) * n_ + y) * n_ + x];
  }
  const std::complex<double>& at(int z, int y, int x) const {
    return data_[(static_cast<std::size_t>(z) * n_ + y) * n_ + x];
  }
  std::complex<double>* data() { return data_.data(); }
  const std::complex<double>* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }

 private:
  int n_ = 0;
  double voxel_pitch_um_ = 0.0;
  std::vector<std::complex<double>> data_;
};

}  // namespace omnifht
