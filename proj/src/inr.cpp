#include "omnifht/inr.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iostream>
#include <random>
#include <utility>

#include "omnifht/errors.hpp"
#include "omnifht/threading.hpp"

namespace omnifht {

namespace {

using nlohmann::json;

constexpr double kPi = 3.14159265358979323846;
constexpr char kCheckpointMagic[] = "OMNIFHT-CKPT-1";

std::atomic<bool> g_clamp_warned{false};

// Rotated rim bins legitimately poke ~4% past the cube; warn only once and
// only for genuinely out-of-domain inputs.
double clamp_coord(double v) {
  if (v >= -0.5 && v <= 0.5) return v;
  if ((v < -0.56 || v > 0.56) && !g_clamp_warned.exchange(true))
    std::cerr << "inr: encoding input " << v
              << " outside [-0.5, 0.5], clamping\n";
  return std::clamp(v, -0.5, 0.5);
}

std::vector<double> encoding_frequencies(int n_freqs) {
  std::vector<double> alpha(static_cast<std::size_t>(n_freqs));
  double a = kPi;
  for (int m = 0; m < n_freqs; ++m, a *= 2.0) alpha[m] = a;
  return alpha;
}

void encode_into(const Eigen::Vector3d& k_norm,
                 const std::vector<double>& alpha, double* out) {
  const int n = static_cast<int>(alpha.size());
  for (int axis = 0; axis < 3; ++axis) {
    const double k = clamp_coord(k_norm[axis]);
    double* dst = out + static_cast<std::size_t>(axis) * 2 * n;
    for (int m = 0; m < n; ++m) {
      dst[2 * m] = std::sin(alpha[m] * k);
      dst[2 * m + 1] = std::cos(alpha[m] * k);
    }
  }
}

void check_trainable(const MlpParams& params) {
  if (params.weights.empty() || params.weights.size() != params.biases.size())
    throw ConfigError("mlp: empty or inconsistent layer list");
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    if (params.weights[l].rows() != params.biases[l].size())
      throw ConfigError("mlp: bias length does not match layer output");
    if (l > 0 && params.weights[l].cols() != params.weights[l - 1].rows())
      throw ConfigError("mlp: layer input does not match previous output");
  }
  if (!params.finite())
    throw NumericalError("mlp: non-finite parameter");
}

void add_params(MlpParams& dst, const MlpParams& src) {
  for (std::size_t l = 0; l < dst.weights.size(); ++l) {
    dst.weights[l] += src.weights[l];
    dst.biases[l] += src.biases[l];
  }
}

}  // namespace

Eigen::VectorXd encode(const Eigen::Vector3d& k_norm,
                       const PositionalEncoding& pe) {
  const auto alpha = encoding_frequencies(pe.n_freqs);
  Eigen::VectorXd out(pe.embed_dim());
  encode_into(k_norm, alpha, out.data());
  return out;
}

Eigen::MatrixXd encode_batch(const Eigen::Matrix3Xd& k_norm,
                             const PositionalEncoding& pe) {
  const auto alpha = encoding_frequencies(pe.n_freqs);
  Eigen::MatrixXd out(pe.embed_dim(), k_norm.cols());
  parallel_for(static_cast<std::size_t>(k_norm.cols()),
               [&](std::size_t begin, std::size_t end) {
                 for (std::size_t j = begin; j < end; ++j)
                   encode_into(k_norm.col(static_cast<Eigen::Index>(j)), alpha,
                               out.col(static_cast<Eigen::Index>(j)).data());
               });
  return out;
}

MlpParams MlpParams::he_uniform(const std::vector<int>& layer_sizes,
                                unsigned seed, double final_scale) {
  if (layer_sizes.size() < 2)
    throw ConfigError("mlp: need at least input and output sizes");
  std::mt19937 rng(seed);
  MlpParams p;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int in = layer_sizes[l], out = layer_sizes[l + 1];
    if (in <= 0 || out <= 0) throw ConfigError("mlp: layer sizes must be positive");
    const double limit = std::sqrt(6.0 / in);
    std::uniform_real_distribution<double> dist(-limit, limit);
    Eigen::MatrixXd w(out, in);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    if (l + 2 == layer_sizes.size()) w *= final_scale;
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  return p;
}

MlpParams MlpParams::standard(const PositionalEncoding& pe, unsigned seed) {
  return he_uniform({pe.embed_dim(), 256, 256, 256, 2}, seed);
}

MlpParams MlpParams::zeros_like(const MlpParams& other) {
  MlpParams p;
  for (std::size_t l = 0; l < other.weights.size(); ++l) {
    p.weights.push_back(
        Eigen::MatrixXd::Zero(other.weights[l].rows(), other.weights[l].cols()));
    p.biases.push_back(Eigen::VectorXd::Zero(other.biases[l].size()));
  }
  return p;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += static_cast<std::size_t>(weights[l].size()) +
         static_cast<std::size_t>(biases[l].size());
  return n;
}

bool MlpParams::finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l)
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  return true;
}

std::complex<double> mlp_forward(const MlpParams& params,
                                 const Eigen::VectorXd& encoded) {
  check_trainable(params);
  if (encoded.size() != params.input_dim())
    throw ConfigError("mlp: input length does not match the first layer");
  Eigen::VectorXd a = encoded;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    a = (params.weights[l] * a + params.biases[l]).eval();
    if (l + 1 < params.weights.size()) a = a.cwiseMax(0.0);
  }
  if (a.size() != 2)
    throw ConfigError("mlp: spectrum network must output two channels");
  return {a[0], a[1]};
}

Eigen::MatrixXd mlp_forward_batch(const MlpParams& params,
                                  const Eigen::MatrixXd& encoded) {
  check_trainable(params);
  if (encoded.rows() != params.input_dim())
    throw ConfigError("mlp: input rows do not match the first layer");
  Eigen::MatrixXd a = encoded;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    a = ((params.weights[l] * a).colwise() + params.biases[l]).eval();
    if (l + 1 < params.weights.size()) a = a.cwiseMax(0.0);
  }
  return a;
}

void TrainConfig::validate() const {
  if (epochs < 1 || learning_rate <= 0.0 || batch_frames < 1 ||
      pose_refresh_period_epochs < 1)
    throw ConfigError("training config fields must be positive");
}

double normalization_scale(const std::vector<TrainingFrame>& frames) {
  std::vector<double> mags;
  for (const TrainingFrame& f : frames)
    for (const std::complex<double>& v : f.observed_band)
      mags.push_back(std::abs(v));
  if (mags.empty()) return 1.0;
  const std::size_t rank =
      static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(mags.size())));
  const std::size_t idx = std::min(mags.size(), std::max<std::size_t>(rank, 1)) - 1;
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(idx),
                   mags.end());
  const double s = mags[idx];
  return s > 0.0 ? s : 1.0;
}

double mlp_loss_and_gradients(const MlpParams& params,
                              const Eigen::MatrixXd& encoded,
                              const std::vector<std::complex<double>>& scales,
                              const std::vector<std::complex<double>>& observed,
                              MlpParams* grads) {
  check_trainable(params);
  const std::size_t m = static_cast<std::size_t>(encoded.cols());
  if (scales.size() != m || observed.size() != m)
    throw ConfigError("mlp loss: column counts do not match");
  if (encoded.rows() != params.input_dim())
    throw ConfigError("mlp loss: input rows do not match the first layer");
  if (params.output_dim() != 2)
    throw ConfigError("mlp loss: spectrum network must output two channels");
  const std::size_t n_layers = params.weights.size();

  const std::size_t n_blocks = static_cast<std::size_t>(
      std::max(1, std::min<int>(worker_count(), static_cast<int>(m ? m : 1))));
  std::vector<double> block_loss(n_blocks, 0.0);
  std::vector<MlpParams> block_grads;
  if (grads)
    block_grads.assign(n_blocks, MlpParams::zeros_like(params));

  parallel_for(n_blocks, [&](std::size_t bb, std::size_t be) {
    for (std::size_t b = bb; b < be; ++b) {
      const std::size_t c0 = m * b / n_blocks;
      const std::size_t c1 = m * (b + 1) / n_blocks;
      if (c0 == c1) continue;
      const Eigen::Index cols = static_cast<Eigen::Index>(c1 - c0);

      std::vector<Eigen::MatrixXd> acts(n_layers + 1);
      acts[0] = encoded.middleCols(static_cast<Eigen::Index>(c0), cols);
      for (std::size_t l = 0; l < n_layers; ++l) {
        acts[l + 1] =
            ((params.weights[l] * acts[l]).colwise() + params.biases[l]).eval();
        if (l + 1 < n_layers) acts[l + 1] = acts[l + 1].cwiseMax(0.0);
      }

      Eigen::MatrixXd delta(2, cols);
      double loss = 0.0;
      for (Eigen::Index j = 0; j < cols; ++j) {
        const std::size_t g = c0 + static_cast<std::size_t>(j);
        const std::complex<double> pred =
            scales[g] *
            std::complex<double>(acts[n_layers](0, j), acts[n_layers](1, j));
        const std::complex<double> e = pred - observed[g];
        loss += std::norm(e);
        const std::complex<double> u = std::conj(scales[g]) * e;
        delta(0, j) = 2.0 * u.real();
        delta(1, j) = 2.0 * u.imag();
      }
      block_loss[b] = loss;
      if (!grads) continue;

      MlpParams& bg = block_grads[b];
      Eigen::MatrixXd d = delta;
      for (std::size_t l = n_layers; l-- > 0;) {
        bg.weights[l].noalias() += d * acts[l].transpose();
        bg.biases[l] += d.rowwise().sum();
        if (l > 0) {
          Eigen::MatrixXd back = params.weights[l].transpose() * d;
          d = (acts[l].array() > 0.0).select(back, 0.0);
        }
      }
    }
  });

  double loss = 0.0;
  for (std::size_t b = 0; b < n_blocks; ++b) loss += block_loss[b];
  if (grads) {
    *grads = std::move(block_grads[0]);
    for (std::size_t b = 1; b < n_blocks; ++b) add_params(*grads, block_grads[b]);
  }
  return loss;
}

double loss_and_gradients(const MlpParams& params,
                          const std::vector<const TrainingFrame*>& batch,
                          const BandGrid& band, const PositionalEncoding& pe,
                          MlpParams* grads) {
  if (grads) *grads = MlpParams::zeros_like(params);
  double loss = 0.0;
  MlpParams scratch;
  for (const TrainingFrame* frame : batch) {
    if (frame->observed_band.size() != band.size())
      throw DataError("training frame band size does not match the geometry");
    const Eigen::Matrix3Xd coords = band.object_coords(frame->pose.rotation);
    const Eigen::MatrixXd encoded = encode_batch(coords, pe);
    std::vector<std::complex<double>> scales =
        band.translation_ramp(frame->pose.translation_um);
    const auto& base = band.base_factors();
    // 2 k_m folds the physical i/(2 kz) down to the O(1) factor i km/kz, so
    // the network's dynamic range matches the normalized observations.
    const double unit = 2.0 * band.k_medium();
    for (std::size_t j = 0; j < scales.size(); ++j) scales[j] *= base[j] * unit;
    loss += mlp_loss_and_gradients(params, encoded, scales,
                                   frame->observed_band,
                                   grads ? &scratch : nullptr);
    if (grads) add_params(*grads, scratch);
  }
  const double inv_n =
      1.0 / static_cast<double>(std::max<std::size_t>(
            1, batch.size() * band.size()));
  if (grads)
    for (std::size_t l = 0; l < grads->weights.size(); ++l) {
      grads->weights[l] *= inv_n;
      grads->biases[l] *= inv_n;
    }
  return loss * inv_n;
}

void sgd_step(MlpParams& params, const MlpParams& grads, double lr) {
  if (grads.weights.size() != params.weights.size())
    throw ConfigError("sgd: layer counts do not match");
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    if (grads.weights[l].rows() != params.weights[l].rows() ||
        grads.weights[l].cols() != params.weights[l].cols() ||
        grads.biases[l].size() != params.biases[l].size())
      throw ConfigError("sgd: gradient shape does not match parameters");
    params.weights[l] -= lr * grads.weights[l];
    params.biases[l] -= lr * grads.biases[l];
  }
}

std::complex<double> InrSampler::sample(const Eigen::Vector3d& k_norm) const {
  return scale_ * mlp_forward(*params_, encode(k_norm, pe_));
}

void InrSampler::sample_many(const Eigen::Matrix3Xd& k_norm,
                             std::complex<double>* out) const {
  check_trainable(*params_);
  constexpr Eigen::Index kChunk = 4096;
  for (Eigen::Index c0 = 0; c0 < k_norm.cols(); c0 += kChunk) {
    const Eigen::Index cols = std::min(kChunk, k_norm.cols() - c0);
    const Eigen::MatrixXd y = mlp_forward_batch(
        *params_, encode_batch(k_norm.middleCols(c0, cols), pe_));
    for (Eigen::Index j = 0; j < cols; ++j)
      out[c0 + j] = scale_ * std::complex<double>(y(0, j), y(1, j));
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  check_trainable(ck.params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  json header;
  std::vector<int> sizes{ck.params.input_dim()};
  for (const Eigen::MatrixXd& w : ck.params.weights)
    sizes.push_back(static_cast<int>(w.rows()));
  header["layer_sizes"] = sizes;
  header["n_freqs"] = ck.pe.n_freqs;
  header["normalization"] = ck.normalization;
  header["epoch"] = ck.epoch;
  header["dtype"] = "float64";
  header["parameter_count"] = ck.params.parameter_count();
  out << kCheckpointMagic << '\n' << header.dump() << '\n';
  for (std::size_t l = 0; l < ck.params.weights.size(); ++l) {
    const Eigen::MatrixXd& w = ck.params.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        const double v = w(r, c);
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
    const Eigen::VectorXd& b = ck.params.biases[l];
    out.write(reinterpret_cast<const char*>(b.data()),
              static_cast<std::streamsize>(sizeof(double) * b.size()));
  }
  if (!out) throw DataError("short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::string magic, header_line;
  if (!std::getline(in, magic) || magic != kCheckpointMagic)
    throw DataError(path + " is not a checkpoint (bad magic)");
  if (!std::getline(in, header_line))
    throw DataError(path + ": missing checkpoint header");
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::exception& e) {
    throw DataError(path + ": bad checkpoint header: " + e.what());
  }
  Checkpoint ck;
  try {
    const std::vector<int> sizes = header.at("layer_sizes");
    if (sizes.size() < 2) throw DataError(path + ": bad layer list");
    if (header.at("dtype").get<std::string>() != "float64")
      throw DataError(path + ": unsupported parameter dtype");
    ck.pe.n_freqs = header.at("n_freqs").get<int>();
    ck.normalization = header.at("normalization").get<double>();
    ck.epoch = header.at("epoch").get<int>();
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      ck.params.weights.emplace_back(sizes[l + 1], sizes[l]);
      ck.params.biases.emplace_back(sizes[l + 1]);
    }
  } catch (const json::exception& e) {
    throw DataError(path + ": bad checkpoint header: " + e.what());
  }
  for (std::size_t l = 0; l < ck.params.weights.size(); ++l) {
    Eigen::MatrixXd& w = ck.params.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        double v;
        if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
          throw DataError(path + ": truncated parameter blob");
        w(r, c) = v;
      }
    Eigen::VectorXd& b = ck.params.biases[l];
    if (!in.read(reinterpret_cast<char*>(b.data()),
                 static_cast<std::streamsize>(sizeof(double) * b.size())))
      throw DataError(path + ": truncated parameter blob");
  }
  char extra;
  if (in.read(&extra, 1))
    throw DataError(path + ": trailing bytes after parameter blob");
  return ck;
}

}  // namespace omnifht
