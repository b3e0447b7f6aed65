#pragma once

#include <complex>
#include <vector>

namespace omnifht {

enum class Domain { RealSpace, FourierSpace };

// A sampled 2D complex wave field or its spectrum, with physical pixel pitch.
// Height and width are powers of two. Real-space fields put x=0 at column
// W/2; fourier-space fields use FFT layout with DC at (0,0), and
// fftshifted() exposes the centered view.
class ComplexField2D {
 public:
  ComplexField2D() = default;
  ComplexField2D(int height, int width, double pixel_pitch_um, Domain domain);

  int height() const { return height_; }
  int width() const { return width_; }
  double pixel_pitch_um() const { return pixel_pitch_um_; }
  Domain domain() const { return domain_; }

  std::complex<double>& at(int row, int col) {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }
  const std::complex<double>& at(int row, int col) const {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }
  std::complex<double>* data() { return data_.data(); }
  const std::complex<double>* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }

  // Continuous-transform calibration: to_fourier() = pitch^2 * DFT with the
  // array center taken as x=0; to_real_space() is its exact inverse. The
  // pair makes spectra quantitative (units value*um^2), so Ewald-sphere
  // samples can be compared against analytic Fourier transforms directly.
  ComplexField2D to_fourier() const;
  ComplexField2D to_real_space() const;

  // Centered copy of a fourier-space field (DC moved to (H/2, W/2)).
  ComplexField2D fftshifted() const;

  // Angular frequency (rad/um) of an FFT-layout index.
  double freq_col(int col) const;
  double freq_row(int row) const;

 private:
  int height_ = 0, width_ = 0;
  double pixel_pitch_um_ = 0.0;
  Domain domain_ = Domain::RealSpace;
  std::vector<std::complex<double>> data_;
};

// FFT-layout angular frequency of index m on an n-point grid with the given
// pitch: 2*pi*m'/(n*pitch) with m' = m for m < n/2, m-n otherwise.
double fft_freq(int index, int n, double pitch_um);

}  // namespace omnifht
