#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "omnifht/errors.hpp"
#include "omnifht/fft.hpp"
#include "omnifht/field.hpp"
#include "omnifht/io.hpp"

using namespace omnifht;

namespace {

constexpr double kPi = std::numbers::pi;

std::filesystem::path temp_dir() {
  auto d = std::filesystem::temp_directory_path() / "omnifht_test_io";
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("fft forward/inverse round trip") {
  std::mt19937 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::complex<double>> v(32 * 16);
  for (auto& x : v) x = {n(rng), n(rng)};
  auto w = v;
  fft::forward_2d(w.data(), 32, 16);
  fft::inverse_2d(w.data(), 32, 16);
  double err = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) err = std::max(err, std::abs(w[i] - v[i]));
  CHECK(err < 1e-12);

  std::vector<std::complex<double>> v3(8 * 8 * 8);
  for (auto& x : v3) x = {n(rng), n(rng)};
  auto w3 = v3;
  fft::forward_3d(w3.data(), 8, 8, 8);
  fft::inverse_3d(w3.data(), 8, 8, 8);
  err = 0.0;
  for (std::size_t i = 0; i < v3.size(); ++i) err = std::max(err, std::abs(w3[i] - v3[i]));
  CHECK(err < 1e-12);
}

TEST_CASE("dct2/dct3 scaling") {
  std::mt19937 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(16 * 8);
  for (auto& x : v) x = n(rng);
  auto w = v;
  fft::dct2_2d(w.data(), 16, 8);
  fft::dct3_2d(w.data(), 16, 8);
  const double s = 4.0 * 16 * 8;
  double err = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) err = std::max(err, std::abs(w[i] / s - v[i]));
  CHECK(err < 1e-12);
}

TEST_CASE("field transform calibration matches the analytic Gaussian") {
  const int n = 128;
  const double pitch = 0.147, sigma = 0.5;
  ComplexField2D f(n, n, pitch, Domain::RealSpace);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double x = (c - n / 2) * pitch, y = (r - n / 2) * pitch;
      f.at(r, c) = std::exp(-(x * x + y * y) / (2 * sigma * sigma));
    }
  const ComplexField2D fh = f.to_fourier();
  // Continuous transform of the Gaussian: 2*pi*sigma^2*exp(-sigma^2 K^2/2).
  double max_err = 0.0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double kx = fh.freq_col(c), ky = fh.freq_row(r);
      const double expect =
          2 * kPi * sigma * sigma * std::exp(-sigma * sigma * (kx * kx + ky * ky) / 2);
      max_err = std::max(max_err, std::abs(fh.at(r, c) - std::complex<double>(expect)));
    }
  CHECK(max_err < 1e-9 * 2 * kPi * sigma * sigma);

  const ComplexField2D back = fh.to_real_space();
  double rt = 0.0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) rt = std::max(rt, std::abs(back.at(r, c) - f.at(r, c)));
  CHECK(rt < 1e-12);
}

TEST_CASE("fft_freq layout") {
  CHECK(fft_freq(0, 64, 0.147) == 0.0);
  CHECK(fft_freq(1, 64, 0.147) == doctest::Approx(2 * kPi / (64 * 0.147)));
  CHECK(fft_freq(63, 64, 0.147) == doctest::Approx(-2 * kPi / (64 * 0.147)));
  CHECK(fft_freq(32, 64, 0.147) == doctest::Approx(-kPi / 0.147));
}

TEST_CASE("fields require power-of-two dimensions") {
  CHECK_THROWS_AS(ComplexField2D(48, 64, 0.147, Domain::RealSpace), DataError);
  CHECK_THROWS_AS(ComplexField2D(64, 64, 0.0, Domain::RealSpace), DataError);
}

TEST_CASE("stack save/load round trip") {
  const auto dir = temp_dir();
  OpticsConfig cfg;
  std::mt19937 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<ComplexField2D> frames;
  for (int f = 0; f < 3; ++f) {
    ComplexField2D fld(16, 16, cfg.pixel_pitch_um, Domain::RealSpace);
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 16; ++c) fld.at(r, c) = {n(rng), n(rng)};
    frames.push_back(std::move(fld));
  }
  const std::string sidecar = (dir / "stack.json").string();
  io::save_stack(sidecar, frames, cfg, "psi");
  const auto [loaded, meta] = io::load_stack(sidecar);
  CHECK(meta.frames == 3);
  CHECK(meta.kind == "psi");
  CHECK(meta.wavelength_um == doctest::Approx(cfg.wavelength_um));
  REQUIRE(loaded.size() == 3);
  double err = 0.0;
  for (int f = 0; f < 3; ++f)
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 16; ++c)
        err = std::max(err, std::abs(loaded[f].at(r, c) - frames[f].at(r, c)));
  CHECK(err < 1e-6);  // float32 storage
}

TEST_CASE("hologram ingest pads to a power of two with the mean") {
  const auto dir = temp_dir();
  const std::string sidecar = (dir / "holo.json").string();
  // 6x6 single-channel stack written by hand.
  {
    nlohmann::json j;
    j["frames"] = 1;
    j["height"] = 6;
    j["width"] = 6;
    j["pixel_pitch_um"] = 0.147;
    j["wavelength_um"] = 0.532;
    j["n_medium"] = 1.33;
    j["na"] = 0.7;
    j["kind"] = "hologram";
    std::ofstream(sidecar) << j.dump();
    std::vector<float> px(36, 2.0f);
    std::ofstream bin(io::data_path_for(sidecar), std::ios::binary);
    bin.write(reinterpret_cast<const char*>(px.data()), px.size() * sizeof(float));
  }
  const auto [frames, meta] = io::load_stack(sidecar);
  REQUIRE(frames.size() == 1);
  CHECK(frames[0].height() == 8);
  CHECK(frames[0].width() == 8);
  CHECK(frames[0].at(0, 0).real() == doctest::Approx(2.0));  // mean fill
  CHECK(frames[0].at(4, 4).real() == doctest::Approx(2.0));
  CHECK(frames[0].at(4, 4).imag() == 0.0);
}

TEST_CASE("stack size mismatch is a data error") {
  const auto dir = temp_dir();
  const std::string sidecar = (dir / "bad.json").string();
  nlohmann::json j;
  j["frames"] = 2;
  j["height"] = 8;
  j["width"] = 8;
  j["pixel_pitch_um"] = 0.147;
  j["wavelength_um"] = 0.532;
  j["n_medium"] = 1.33;
  j["na"] = 0.7;
  j["kind"] = "psi";
  std::ofstream(sidecar) << j.dump();
  std::vector<float> px(10, 0.0f);  // far too short
  std::ofstream bin(io::data_path_for(sidecar), std::ios::binary);
  bin.write(reinterpret_cast<const char*>(px.data()), px.size() * sizeof(float));
  bin.close();
  CHECK_THROWS_AS(io::load_stack(sidecar), DataError);
}

TEST_CASE("volume and pose round trips") {
  const auto dir = temp_dir();
  Volume3D vol(8, 0.147);
  std::mt19937 rng(21);
  std::normal_distribution<double> n(1.33, 0.01);
  for (std::size_t i = 0; i < vol.size(); ++i) vol.data()[i] = n(rng);
  const std::string vpath = (dir / "vol.json").string();
  io::save_volume(vpath, vol, "ri");
  const auto [loaded, channel] = io::load_volume(vpath);
  CHECK(channel == "ri");
  CHECK(loaded.n() == 8);
  double err = 0.0;
  for (std::size_t i = 0; i < vol.size(); ++i)
    err = std::max(err, std::abs(loaded.data()[i].real() - vol.data()[i].real()));
  CHECK(err < 1e-6);

  std::vector<Pose> poses(5);
  std::mt19937 rng2(22);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& p : poses) {
    p.rotation = Rotation(g(rng2), g(rng2), g(rng2), g(rng2));
    p.translation_um = {g(rng2), g(rng2)};
  }
  const std::string ppath = (dir / "poses.json").string();
  io::save_poses(ppath, poses);
  const auto back = io::load_poses(ppath);
  REQUIRE(back.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(geodesic_distance(back[i].rotation, poses[i].rotation) < 1e-6);
    CHECK((back[i].translation_um - poses[i].translation_um).norm() < 1e-12);
  }
}
