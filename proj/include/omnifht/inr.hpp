#pragma once

#include <Eigen/Dense>

#include <complex>
#include <string>
#include <vector>

#include "omnifht/forward_model.hpp"
#include "omnifht/geometry.hpp"

namespace omnifht {

// Sinusoidal lift of one coordinate: [sin(a_m k), cos(a_m k)] for
// a_m = 2^(m-1) pi, m = 1..n_freqs; a 3-vector embeds to 6*n_freqs values.
struct PositionalEncoding {
  int n_freqs = 16;
  int embed_dim() const { return 6 * n_freqs; }
};

// Inputs are meant to live in [-0.5, 0.5]^3; components outside are clamped
// (rotated rim bins poke a couple of percent past) with a one-time warning
// when the excess is more than the rim overshoot.
Eigen::VectorXd encode(const Eigen::Vector3d& k_norm,
                       const PositionalEncoding& pe);
Eigen::MatrixXd encode_batch(const Eigen::Matrix3Xd& k_norm,
                             const PositionalEncoding& pe);

// Fully connected stack, ReLU on hidden layers, linear 2-channel output
// read as (Re f, Im f).
struct MlpParams {
  std::vector<Eigen::MatrixXd> weights;  // out x in
  std::vector<Eigen::VectorXd> biases;

  // He-uniform fan-in init, biases zero; the final layer is scaled down so
  // an untrained network predicts a near-empty spectrum.
  static MlpParams he_uniform(const std::vector<int>& layer_sizes,
                              unsigned seed, double final_scale = 0.01);
  // The production shape: embed_dim -> 256 -> 256 -> 256 -> 2.
  static MlpParams standard(const PositionalEncoding& pe, unsigned seed);
  static MlpParams zeros_like(const MlpParams& other);

  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int output_dim() const { return static_cast<int>(weights.back().rows()); }
  std::size_t parameter_count() const;
  bool finite() const;
};

std::complex<double> mlp_forward(const MlpParams& params,
                                 const Eigen::VectorXd& encoded);
// Column-batched forward; returns output_dim x M.
Eigen::MatrixXd mlp_forward_batch(const MlpParams& params,
                                  const Eigen::MatrixXd& encoded);

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 0.01;
  int batch_frames = 4;
  int pose_refresh_period_epochs = 5;
  unsigned rng_seed = 1;
  void validate() const;  // throws ConfigError unless all positive
};

// One projection in band form: observed psi-hat values over the BandGrid
// bins (already divided by the dataset normalization), plus the pose.
struct TrainingFrame {
  std::vector<std::complex<double>> observed_band;
  Pose pose;
};

// 95th-percentile magnitude over all frames' band values; observations are
// divided by it before training and network samples are multiplied by it on
// extraction. Returns 1 when everything is zero.
double normalization_scale(const std::vector<TrainingFrame>& frames);

// sum_j |scales[j] * net(encoded.col(j)) - observed[j]|^2 with exact
// analytic backpropagation into *grads (zeroed first when non-null).
// Columns are processed in deterministic worker blocks, partial gradients
// reduced in block order, so results are reproducible for a fixed worker
// count.
double mlp_loss_and_gradients(const MlpParams& params,
                              const Eigen::MatrixXd& encoded,
                              const std::vector<std::complex<double>>& scales,
                              const std::vector<std::complex<double>>& observed,
                              MlpParams* grads);

// Training objective over whole frames: per frame, encode the rotated band
// coordinates, scale by the per-bin measurement factor and translation
// ramp, and accumulate the residual against the observed band. Loss and
// gradients are the mean over all residuals in the batch; a raw sum would
// make the default learning rate depend on the band size. The network is
// trained in normalized units, f-hat / (2 k_m normalization): the per-bin
// factor becomes i km/kz (magnitude near 1), so observations, predictions,
// and parameters share an O(1) range and the default learning rate behaves
// the same across geometries. Extraction multiplies samples back by
// 2 k_m * normalization (see InrSampler's scale).
double loss_and_gradients(const MlpParams& params,
                          const std::vector<const TrainingFrame*>& batch,
                          const BandGrid& band, const PositionalEncoding& pe,
                          MlpParams* grads);

// p <- p - lr * g. Throws ConfigError on shape mismatch.
void sgd_step(MlpParams& params, const MlpParams& grads, double lr);

// Network as a spectrum sampler (batched through the GEMM path); `scale`
// restores physical units after normalized training.
class InrSampler : public SpectrumSampler {
 public:
  InrSampler(const MlpParams& params, const PositionalEncoding& pe,
             double scale)
      : params_(&params), pe_(pe), scale_(scale) {}
  std::complex<double> sample(const Eigen::Vector3d& k_norm) const override;
  void sample_many(const Eigen::Matrix3Xd& k_norm,
                   std::complex<double>* out) const override;

 private:
  const MlpParams* params_;
  PositionalEncoding pe_;
  double scale_;
};

// Versioned binary checkpoint: magic line, JSON header (shapes, encoding,
// normalization, epoch, dtype), then the raw float64 parameter blob in
// layer order (row-major weights, then bias).
struct Checkpoint {
  MlpParams params;
  PositionalEncoding pe;
  double normalization = 1.0;
  int epoch = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);  // throws DataError

}  // namespace omnifht
