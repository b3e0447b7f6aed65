#include "omnifht/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>
#include <vector>

namespace omnifht::fft {
namespace {

// FFTW plan creation is not thread safe; execution via the new-array
// interface is. Plans are created once per shape with FFTW_ESTIMATE so
// repeated runs are bit-for-bit reproducible, and with FFTW_UNALIGNED so
// they apply to any caller buffer.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

using C2cKey = std::tuple<int, int, int, int>;  // n0, n1, n2, sign

fftw_plan c2c_plan(int n0, int n1, int n2, int sign) {
  static std::map<C2cKey, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(plan_mutex());
  const C2cKey key{n0, n1, n2, sign};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const std::size_t n = static_cast<std::size_t>(n0) * (n1 > 0 ? n1 : 1) *
                        (n2 > 0 ? n2 : 1);
  std::vector<std::complex<double>> scratch(n);
  auto* ptr = reinterpret_cast<fftw_complex*>(scratch.data());
  fftw_plan plan;
  if (n2 > 0) {
    plan = fftw_plan_dft_3d(n0, n1, n2, ptr, ptr, sign,
                            FFTW_ESTIMATE | FFTW_UNALIGNED);
  } else {
    plan = fftw_plan_dft_2d(n0, n1, ptr, ptr, sign,
                            FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  cache.emplace(key, plan);
  return plan;
}

using R2rKey = std::tuple<int, int, int>;  // h, w, kind

fftw_plan r2r_plan(int h, int w, fftw_r2r_kind kind) {
  static std::map<R2rKey, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(plan_mutex());
  const R2rKey key{h, w, static_cast<int>(kind)};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::vector<double> scratch(static_cast<std::size_t>(h) * w);
  fftw_plan plan = fftw_plan_r2r_2d(h, w, scratch.data(), scratch.data(), kind,
                                    kind, FFTW_ESTIMATE | FFTW_UNALIGNED);
  cache.emplace(key, plan);
  return plan;
}

void scale(std::complex<double>* data, std::size_t n, double s) {
  for (std::size_t i = 0; i < n; ++i) data[i] *= s;
}

}  // namespace

void forward_2d(std::complex<double>* data, int height, int width) {
  auto* ptr = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(c2c_plan(height, width, 0, FFTW_FORWARD), ptr, ptr);
}

void forward_3d(std::complex<double>* data, int n0, int n1, int n2) {
  auto* ptr = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(c2c_plan(n0, n1, n2, FFTW_FORWARD), ptr, ptr);
}

void inverse_2d(std::complex<double>* data, int height, int width) {
  auto* ptr = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(c2c_plan(height, width, 0, FFTW_BACKWARD), ptr, ptr);
  scale(data, static_cast<std::size_t>(height) * width,
        1.0 / (static_cast<double>(height) * width));
}

void inverse_3d(std::complex<double>* data, int n0, int n1, int n2) {
  auto* ptr = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(c2c_plan(n0, n1, n2, FFTW_BACKWARD), ptr, ptr);
  const double n = static_cast<double>(n0) * n1 * n2;
  scale(data, static_cast<std::size_t>(n0) * n1 * n2, 1.0 / n);
}

void dct2_2d(double* data, int height, int width) {
  fftw_execute_r2r(r2r_plan(height, width, FFTW_REDFT10), data, data);
}

void dct3_2d(double* data, int height, int width) {
  fftw_execute_r2r(r2r_plan(height, width, FFTW_REDFT01), data, data);
}

}  // namespace omnifht::fft
