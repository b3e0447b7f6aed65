#pragma once

#include <complex>
#include <cstddef>

namespace omnifht::fft {

// Unnormalized forward DFT (sign -1 in the exponent), in place, row-major.
void forward_2d(std::complex<double>* data, int height, int width);
void forward_3d(std::complex<double>* data, int n0, int n1, int n2);

// Inverse DFT normalized by 1/N so inverse(forward(x)) == x.
void inverse_2d(std::complex<double>* data, int height, int width);
void inverse_3d(std::complex<double>* data, int n0, int n1, int n2);

// DCT-II of each dimension (FFTW REDFT10), unnormalized.
void dct2_2d(double* data, int height, int width);
// DCT-III of each dimension (FFTW REDFT01); dct3_2d(dct2_2d(x)) == 4*h*w*x.
void dct3_2d(double* data, int height, int width);

}  // namespace omnifht::fft
