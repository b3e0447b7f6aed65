#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "omnifht/errors.hpp"
#include "omnifht/field.hpp"
#include "omnifht/field_pipeline.hpp"

using namespace omnifht;

namespace {

constexpr double kPi = std::numbers::pi;

ComplexField2D make_field(int n, double pitch,
                          const std::function<std::complex<double>(double, double)>& fn) {
  ComplexField2D f(n, n, pitch, Domain::RealSpace);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      f.at(r, c) = fn((c - n / 2) * pitch, (r - n / 2) * pitch);
  return f;
}

double l2(const ComplexField2D& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += std::norm(f.data()[i]);
  return std::sqrt(s);
}

double rel_l2_diff(const ComplexField2D& a, const ComplexField2D& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a.data()[i] - b.data()[i]);
    den += std::norm(b.data()[i]);
  }
  return std::sqrt(num / den);
}

double wrap_pi(double x) {
  x = std::fmod(x + kPi, 2.0 * kPi);
  if (x < 0) x += 2.0 * kPi;
  return x - kPi;
}

// Band-limited bump: random spectrum inside |f| <= bw_cyc_um with a smooth
// taper, unit-normalized in max magnitude.
ComplexField2D bandlimited_bump(int n, double pitch, double bw_cyc_um,
                                unsigned seed) {
  ComplexField2D spec(n, n, pitch, Domain::FourierSpace);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double kbw = 2.0 * kPi * bw_cyc_um;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double kx = spec.freq_col(c), ky = spec.freq_row(r);
      const double k2 = kx * kx + ky * ky;
      if (k2 <= kbw * kbw)
        spec.at(r, c) = std::complex<double>(u(rng), u(rng)) *
                        std::exp(-2.0 * k2 / (kbw * kbw));
    }
  ComplexField2D field = spec.to_real_space();
  double vmax = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i)
    vmax = std::max(vmax, std::abs(field.data()[i]));
  for (std::size_t i = 0; i < field.size(); ++i) field.data()[i] /= vmax;
  return field;
}

OpticsConfig default_cfg() { return OpticsConfig{}; }

}  // namespace

TEST_CASE("angular spectrum: dz=0 is the identity") {
  auto f = bandlimited_bump(64, 0.147, 1.0, 11);
  auto out = angular_spectrum_propagate(f, 0.0, default_cfg());
  CHECK(rel_l2_diff(out, f) < 1e-12);
}

TEST_CASE("angular spectrum: normal plane wave gains phase k_m*dz") {
  const auto cfg = default_cfg();
  auto f = make_field(64, 0.147, [](double, double) { return 1.0; });
  const double dz = 7.3;
  auto out = angular_spectrum_propagate(f, dz, cfg);
  const std::complex<double> expect =
      std::exp(std::complex<double>(0.0, cfg.k_medium() * dz));
  for (std::size_t i = 0; i < out.size(); ++i)
    CHECK(std::abs(out.data()[i] - expect) < 1e-10);
}

TEST_CASE("angular spectrum: oblique plane wave gains phase kz*dz") {
  const auto cfg = default_cfg();
  const int n = 64;
  const double pitch = 0.147;
  // Exact grid frequency so the wave is a single DFT bin.
  const double fx = 6.0 / (n * pitch);
  auto f = make_field(n, pitch, [&](double x, double) {
    return std::exp(std::complex<double>(0.0, 2.0 * kPi * fx * x));
  });
  const double dz = -4.1;
  const double kx = 2.0 * kPi * fx;
  const double kz = std::sqrt(cfg.k_medium() * cfg.k_medium() - kx * kx);
  auto out = angular_spectrum_propagate(f, dz, cfg);
  const std::complex<double> expect = std::exp(std::complex<double>(0.0, kz * dz));
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      CHECK(std::abs(out.at(r, c) / f.at(r, c) - expect) < 1e-9);
}

TEST_CASE("angular spectrum: +50um then -50um round trip") {
  auto f = make_field(128, 0.147, [](double x, double y) {
    // Gaussian spot, spectrum far inside the propagating band.
    return std::exp(-(x * x + y * y) / (2.0 * 1.0));
  });
  const auto cfg = default_cfg();
  auto back = angular_spectrum_propagate(
      angular_spectrum_propagate(f, 50.0, cfg), -50.0, cfg);
  CHECK(rel_l2_diff(back, f) < 1e-8);
}

TEST_CASE("angular spectrum conserves energy on the propagating band") {
  const auto cfg = default_cfg();
  const int n = 64;
  // Random spectrum strictly inside k < k_m, so nothing is evanescent.
  ComplexField2D spec(n, n, 0.147, Domain::FourierSpace);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double klim = 0.9 * cfg.k_medium();
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double kx = spec.freq_col(c), ky = spec.freq_row(r);
      if (kx * kx + ky * ky < klim * klim)
        spec.at(r, c) = {u(rng), u(rng)};
    }
  auto field = spec.to_real_space();
  auto prop = angular_spectrum_propagate(field, 13.7, cfg);
  CHECK(std::abs(l2(prop) - l2(field)) / l2(field) < 1e-10);
}

TEST_CASE("unwrap: smooth input with range < pi returns input + constant") {
  const int n = 64;
  Eigen::MatrixXd in(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      in(r, c) = 1.2 * std::exp(-((r - 30.0) * (r - 30.0) +
                                  (c - 28.0) * (c - 28.0)) /
                                (2.0 * 81.0));
  Eigen::MatrixXd out = unwrap_phase(in);
  const Eigen::MatrixXd diff = out - in;
  CHECK(diff.maxCoeff() - diff.minCoeff() < 1e-9);
}

TEST_CASE("unwrap: 6pi ramp is recovered from its wrapped image") {
  const int n = 64;
  Eigen::MatrixXd truth(n, n), wrapped(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      truth(r, c) = 6.0 * kPi * c / (n - 1.0);
      wrapped(r, c) = wrap_pi(truth(r, c));
    }
  Eigen::MatrixXd out = unwrap_phase(wrapped);
  const double shift = (out - truth).mean();
  CHECK(((out.array() - truth.array()) - shift).abs().maxCoeff() < 0.02);
}

TEST_CASE("unwrap: all-zero input stays zero") {
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(32, 32);
  CHECK(unwrap_phase(z).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unwrap: output is congruent to input mod 2pi at every pixel") {
  const int n = 32;
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-kPi + 1e-6, kPi);
  Eigen::MatrixXd in(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) in(r, c) = u(rng);  // noisy, not smooth
  Eigen::MatrixXd out = unwrap_phase(in);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double k = (out(r, c) - in(r, c)) / (2.0 * kPi);
      CHECK(std::abs(k - std::round(k)) < 1e-9);
    }
}

TEST_CASE("unwrap rejects values outside (-pi, pi]") {
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(8, 8);
  bad(3, 5) = 4.0;
  CHECK_THROWS_AS(unwrap_phase(bad), DataError);
}

TEST_CASE("rytov: unit field maps to zero perturbation") {
  auto one = make_field(32, 0.147, [](double, double) { return 1.0; });
  auto psi = rytov_perturbation(one);
  for (std::size_t i = 0; i < psi.size(); ++i)
    CHECK(std::abs(psi.data()[i]) < 1e-12);
}

TEST_CASE("rytov: uniform exp(0.1+0.3i) maps to 0.1+0.3i exactly") {
  auto f = make_field(32, 0.147, [](double, double) {
    return std::exp(std::complex<double>(0.1, 0.3));
  });
  auto psi = rytov_perturbation(f);
  for (std::size_t i = 0; i < psi.size(); ++i)
    CHECK(std::abs(psi.data()[i] - std::complex<double>(0.1, 0.3)) < 1e-12);
}

TEST_CASE("rytov: zero-amplitude pixel is an error naming the pixel") {
  auto f = make_field(16, 0.147, [](double, double) { return 1.0; });
  f.at(5, 9) = 0.0;
  CHECK_THROWS_WITH_AS(rytov_perturbation(f), doctest::Contains("(5,9)"),
                       DataError);
}

TEST_CASE("rytov inverts exp() for smooth psi spanning many cycles") {
  const int n = 64;
  const double amp = 15.0 * kPi;  // range < 20 pi, slope < pi per pixel
  ComplexField2D truth(n, n, 0.147, Domain::RealSpace);
  ComplexField2D field(n, n, 0.147, Domain::RealSpace);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double g = std::exp(-((r - 33.0) * (r - 33.0) +
                                  (c - 30.0) * (c - 30.0)) /
                                (2.0 * 144.0));
      truth.at(r, c) = {0.3 * g, amp * g};
      field.at(r, c) = std::exp(truth.at(r, c));
    }
  auto psi = rytov_perturbation(field);
  // Allow one global 2 pi offset on the imaginary part.
  double mean_d = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i)
    mean_d += psi.data()[i].imag() - truth.data()[i].imag();
  mean_d /= static_cast<double>(psi.size());
  const double offset = 2.0 * kPi * std::round(mean_d / (2.0 * kPi));
  for (std::size_t i = 0; i < psi.size(); ++i) {
    CHECK(std::abs(psi.data()[i].real() - truth.data()[i].real()) < 1e-9);
    CHECK(std::abs(psi.data()[i].imag() - offset - truth.data()[i].imag()) <
          1e-6);
  }
}

TEST_CASE("hologram synthesis closed forms") {
  SidebandParams p{1.7, 1.1, 0.9};
  auto zero = make_field(32, 0.147, [](double, double) { return 0.0; });
  auto holo0 = synthesize_offaxis_hologram(zero, p);
  for (std::size_t i = 0; i < holo0.size(); ++i)
    CHECK(std::abs(holo0.data()[i] - std::complex<double>(1.0, 0.0)) < 1e-14);

  auto one = make_field(32, 0.147, [](double, double) { return 1.0; });
  auto holo1 = synthesize_offaxis_hologram(one, p);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) {
      const double x = (c - 16) * 0.147, y = (r - 16) * 0.147;
      const double expect =
          2.0 + 2.0 * std::cos(2.0 * kPi * (p.carrier_fx_cyc_um * x +
                                            p.carrier_fy_cyc_um * y));
      CHECK(holo1.at(r, c).real() == doctest::Approx(expect).epsilon(1e-12));
      CHECK(holo1.at(r, c).imag() == 0.0);
    }
}

TEST_CASE("demodulation of a pure integer-bin carrier gives a flat unit field") {
  const int n = 64;
  const double pitch = 0.147;
  // Carrier on exact DFT bins: single-bin deltas, no spectral leakage.
  SidebandParams p{16.0 / (n * pitch), 10.0 / (n * pitch), 0.9};
  auto one = make_field(n, pitch, [](double, double) { return 1.0; });
  auto holo = synthesize_offaxis_hologram(one, p);
  auto rec = demodulate_offaxis(holo, p, default_cfg());
  double mean_phase = 0.0, var = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    CHECK(std::abs(std::abs(rec.data()[i]) - 1.0) < 1e-9);
    mean_phase += std::arg(rec.data()[i]);
  }
  mean_phase /= static_cast<double>(rec.size());
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const double d = std::arg(rec.data()[i]) - mean_phase;
    var += d * d;
  }
  CHECK(std::sqrt(var / static_cast<double>(rec.size())) < 1e-3);
}

TEST_CASE("demodulation removes a half-bin residual carrier by exact ramp") {
  const int n = 64;
  const double pitch = 0.147;
  SidebandParams p{16.5 / (n * pitch), 0.0, 0.85};
  auto one = make_field(n, pitch, [](double, double) { return 1.0; });
  auto holo = synthesize_offaxis_hologram(one, p);
  auto rec = demodulate_offaxis(holo, p, default_cfg());
  // The truncated Dirichlet kernels of a half-bin carrier leave an amplitude
  // ripple and near-zero boundary columns, but the amplitude-weighted
  // interior phase tilt isolates the residual-ramp correction: uncorrected
  // it would be pi across the frame (pi/n per pixel).
  std::complex<double> acc{};
  for (int r = 8; r < n - 8; ++r)
    for (int c = 8; c + 1 < n - 8; ++c)
      acc += rec.at(r, c + 1) * std::conj(rec.at(r, c));
  CHECK(std::abs(std::arg(acc)) < 0.25 * kPi / n);
}

TEST_CASE("demodulation recovers a 1 rad phase disk away from its edge") {
  const int n = 64;
  const double pitch = 0.147;
  const double radius_um = 12 * pitch;
  // Logistic edge (about 1.5 px) keeps the disk inside the sideband
  // bandwidth; the profile itself is the known truth.
  const double edge_um = 0.22;
  auto phase_of = [&](double x, double y) {
    return 1.0 / (1.0 + std::exp((std::hypot(x, y) - radius_um) / edge_um));
  };
  auto obj = make_field(n, pitch, [&](double x, double y) {
    return std::exp(std::complex<double>(0.0, phase_of(x, y)));
  });
  SidebandParams p{19.0 / (n * pitch), 0.0, 1.3};
  auto holo = synthesize_offaxis_hologram(obj, p);
  auto rec = demodulate_offaxis(holo, p, default_cfg());
  double max_err = 0.0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double x = (c - n / 2) * pitch, y = (r - n / 2) * pitch;
      const double d = std::hypot(x, y) - radius_um;
      if (std::abs(d) < 4 * pitch) continue;  // bandpass ringing band
      max_err = std::max(max_err, std::abs(wrap_pi(std::arg(rec.at(r, c)) -
                                                   phase_of(x, y))));
    }
  CHECK(max_err < 0.05);
}

TEST_CASE("demodulation round trip on a band-limited object, carrier 3x bandwidth") {
  const int n = 64;
  const double pitch = 0.147;
  const double bw = 0.7;  // cycles/um
  auto bump = bandlimited_bump(n, pitch, bw, 23);
  // Spatial window keeps the border at background level for normalization.
  const double w_um = n * pitch;
  ComplexField2D obj(n, n, pitch, Domain::RealSpace);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double x = (c - n / 2) * pitch, y = (r - n / 2) * pitch;
      const double win = std::exp(-(x * x + y * y) / (2.0 * std::pow(w_um / 6.5, 2)));
      obj.at(r, c) = 1.0 + 0.3 * win * bump.at(r, c);
    }
  SidebandParams p{20.0 / (n * pitch), 0.0, 0.8};
  REQUIRE(p.carrier_fx_cyc_um >= 3.0 * bw);
  auto holo = synthesize_offaxis_hologram(obj, p);
  auto rec = demodulate_offaxis(holo, p, default_cfg());
  CHECK(rel_l2_diff(rec, obj) < 0.02);
}

TEST_CASE("sideband validation rejects bad carriers") {
  auto holo = make_field(64, 0.147, [](double, double) { return 1.0; });
  const double nyq = 1.0 / (2.0 * 0.147);
  // Carrier at the Nyquist edge: circle leaves the square.
  CHECK_THROWS_AS(
      demodulate_offaxis(holo, SidebandParams{nyq, 0.0, 0.5}, default_cfg()),
      ConfigError);
  // Radius reaching DC.
  CHECK_THROWS_AS(
      demodulate_offaxis(holo, SidebandParams{0.8, 0.0, 0.9}, default_cfg()),
      ConfigError);
  // Degenerate radius.
  CHECK_THROWS_AS(
      demodulate_offaxis(holo, SidebandParams{1.5, 0.0, 0.0}, default_cfg()),
      ConfigError);
}

TEST_CASE("background normalization sets the border median to one") {
  auto f = make_field(64, 0.147, [](double x, double y) {
    const double r2 = x * x + y * y;
    return std::complex<double>(2.5 + (r2 < 1.0 ? 3.0 : 0.0), 0.0);
  });
  auto out = normalize_background(f);
  CHECK(std::abs(out.at(1, 1)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(out.at(32, 32)) == doctest::Approx(5.5 / 2.5).epsilon(1e-12));
}

TEST_CASE("gaussian blur: zero sigma is a no-op, positive sigma smooths") {
  auto f = bandlimited_bump(64, 0.147, 1.5, 31);
  auto same = gaussian_blur(f, 0.0);
  CHECK(rel_l2_diff(same, f) == 0.0);
  auto blurred = gaussian_blur(f, 2.0);
  // High-pass energy must drop.
  auto d0 = f.to_fourier(), d1 = blurred.to_fourier();
  double hi0 = 0.0, hi1 = 0.0;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) {
      const double kx = d0.freq_col(c), ky = d0.freq_row(r);
      if (kx * kx + ky * ky > 4.0) {
        hi0 += std::norm(d0.at(r, c));
        hi1 += std::norm(d1.at(r, c));
      }
    }
  CHECK(hi1 < 0.5 * hi0);
}

namespace {

ComplexField2D disk_frame(int n, double pitch, double cr, double cc,
                          double radius_px) {
  ComplexField2D f(n, n, pitch, Domain::RealSpace);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (std::hypot(r - cr, c - cc) < radius_px) f.at(r, c) = 1.0;
  return f;
}

}  // namespace

TEST_CASE("roi track recenters a disk moving 2 px per frame") {
  std::vector<ComplexField2D> frames;
  // Stay >16 px from the borders so the crop is never clamped off-center.
  for (int i = 0; i < 10; ++i)
    frames.push_back(disk_frame(64, 0.147, 24.0, 18.0 + 2.0 * i, 6.0));
  auto track = extract_roi_track(frames, 32);
  REQUIRE(track.rois.size() == 10);
  CHECK(track.flagged.empty());
  for (int i = 0; i < 10; ++i) {
    CHECK(track.source_frames[i] == i);
    // Centroid of the crop should sit at its center within a pixel.
    double area = 0.0, rs = 0.0, cs = 0.0;
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c)
        if (std::abs(track.rois[i].at(r, c)) > 0.5) {
          area += 1.0;
          rs += r;
          cs += c;
        }
    REQUIRE(area > 0.0);
    CHECK(std::abs(rs / area - 16.0) <= 1.0);
    CHECK(std::abs(cs / area - 16.0) <= 1.0);
  }
}

TEST_CASE("roi track flags blank frames and returns an empty track") {
  std::vector<ComplexField2D> frames(
      4, ComplexField2D(64, 64, 0.147, Domain::RealSpace));
  auto track = extract_roi_track(frames, 32);
  CHECK(track.rois.empty());
  CHECK(track.flagged == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("roi track flags an occlusion by its area jump") {
  std::vector<ComplexField2D> frames;
  for (int i = 0; i < 5; ++i) {
    auto f = disk_frame(64, 0.147, 30.0, 30.0, 6.0);
    if (i == 2) {
      // Second disk merging into the first: union area about 1.6x.
      auto g = disk_frame(64, 0.147, 30.0, 36.0, 6.0);
      for (std::size_t j = 0; j < f.size(); ++j)
        if (std::abs(g.data()[j]) > 0.0) f.data()[j] = 1.0;
    }
    frames.push_back(std::move(f));
  }
  auto track = extract_roi_track(frames, 32);
  CHECK(track.flagged == std::vector<int>{2});
  CHECK(track.source_frames == std::vector<int>{0, 1, 3, 4});
}

TEST_CASE("autofocus recovers a planted defocus") {
  const auto cfg = default_cfg();
  const int n = 64;
  auto focused = make_field(n, 0.147, [](double x, double y) {
    const double r2 = x * x + y * y;
    return std::exp(std::complex<double>(0.0, 1.2 * std::exp(-r2 / (2.0 * 0.45 * 0.45))));
  });
  auto defocused = angular_spectrum_propagate(focused, 8.0, cfg);
  const double dz = autofocus_dz(defocused, cfg, -20.0, 20.0, 41);
  CHECK(std::abs(dz - (-8.0)) <= 1.0);  // one scan step
  const double dz0 = autofocus_dz(focused, cfg, -20.0, 20.0, 41);
  CHECK(std::abs(dz0) <= 1.0);
}
