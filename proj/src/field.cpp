#include "omnifht/field.hpp"

#include <numbers>

#include "omnifht/errors.hpp"
#include "omnifht/fft.hpp"

namespace omnifht {
namespace {

bool power_of_two(int n) { return n >= 2 && (n & (n - 1)) == 0; }

// For even n, fftshift and ifftshift coincide: a circular shift by n/2.
ComplexField2D half_shifted(const ComplexField2D& f) {
  ComplexField2D out(f.height(), f.width(), f.pixel_pitch_um(), f.domain());
  const int h = f.height(), w = f.width();
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      out.at((r + h / 2) % h, (c + w / 2) % w) = f.at(r, c);
  return out;
}

}  // namespace

ComplexField2D::ComplexField2D(int height, int width, double pixel_pitch_um,
                               Domain domain)
    : height_(height),
      width_(width),
      pixel_pitch_um_(pixel_pitch_um),
      domain_(domain),
      data_(static_cast<std::size_t>(height) * width) {
  if (!power_of_two(height) || !power_of_two(width))
    throw DataError("ComplexField2D: dimensions must be powers of two, got " +
                    std::to_string(height) + "x" + std::to_string(width));
  if (!(pixel_pitch_um > 0.0))
    throw DataError("ComplexField2D: pixel pitch must be positive");
}

ComplexField2D ComplexField2D::to_fourier() const {
  if (domain_ != Domain::RealSpace)
    throw DataError("to_fourier: field is already fourier-space");
  ComplexField2D shifted = half_shifted(*this);  // center -> index 0
  fft::forward_2d(shifted.data(), height_, width_);
  const double s = pixel_pitch_um_ * pixel_pitch_um_;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted.data()[i] *= s;
  ComplexField2D out(height_, width_, pixel_pitch_um_, Domain::FourierSpace);
  out.data_ = std::move(shifted.data_);
  return out;
}

ComplexField2D ComplexField2D::to_real_space() const {
  if (domain_ != Domain::FourierSpace)
    throw DataError("to_real_space: field is not fourier-space");
  ComplexField2D tmp = *this;
  fft::inverse_2d(tmp.data(), height_, width_);
  const double s = 1.0 / (pixel_pitch_um_ * pixel_pitch_um_);
  for (std::size_t i = 0; i < tmp.size(); ++i) tmp.data()[i] *= s;
  tmp.domain_ = Domain::RealSpace;
  return half_shifted(tmp);  // index 0 -> center
}

ComplexField2D ComplexField2D::fftshifted() const { return half_shifted(*this); }

double ComplexField2D::freq_col(int col) const {
  return fft_freq(col, width_, pixel_pitch_um_);
}

double ComplexField2D::freq_row(int row) const {
  return fft_freq(row, height_, pixel_pitch_um_);
}

double fft_freq(int index, int n, double pitch_um) {
  const int m = index < n / 2 ? index : index - n;
  return 2.0 * std::numbers::pi * m / (n * pitch_um);
}

}  // namespace omnifht
