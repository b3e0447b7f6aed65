#pragma once

#include <functional>
#include <string>
#include <vector>

#include "omnifht/field.hpp"
#include "omnifht/forward_model.hpp"
#include "omnifht/geometry.hpp"
#include "omnifht/inr.hpp"
#include "omnifht/pose_search.hpp"
#include "omnifht/volume.hpp"

namespace omnifht {

// Everything needed to continue a run: network, per-frame poses, and the
// loss curve so far. Per-epoch RNG streams are derived from rng_seed and the
// epoch number, so no generator state needs to be carried.
struct ReconState {
  int epoch = 0;  // completed epochs
  MlpParams params;
  PositionalEncoding pe;
  double normalization = 1.0;
  std::vector<ScoredPose> poses;
  std::vector<double> loss_history;  // one entry per completed epoch
  unsigned rng_seed = 1;
};

struct ReconHooks {
  std::function<void(int epoch, double loss)> on_epoch;
  std::function<void(int epoch, const std::vector<ScoredPose>&)> on_refresh;
  int checkpoint_every = 0;       // epochs between saves; 0 disables
  std::string checkpoint_prefix;  // writes <prefix>.ckpt and <prefix>.state.json
  std::string pose_log_path;      // JSON-lines pose dump, appended per refresh
};

struct ReconReport {
  std::vector<double> loss_history;
  std::vector<ScoredPose> poses;  // final poses with end-of-run scores
  long clamped_voxels = 0;
  double wall_seconds = 0.0;
};

struct ReconResult {
  Volume3D volume;  // refractive index on the ROI-sized cube
  ReconReport report;
  ReconState state;
};

// Frozen trilinear snapshot of the network spectrum for pose refreshes:
// the ROI-sized frequency grid, zero outside the normalized ball of radius
// 0.53 (the measurement band ends at 0.52).
GriddedSampler snapshot_sampler(const MlpParams& params,
                                const PositionalEncoding& pe, double scale,
                                const OpticsConfig& cfg);

// Alternating optimization: per epoch, SGD over seeded-shuffled batches of
// tcfg.batch_frames frames; at the start of epochs 6, 11, ... (after every
// pose_refresh_period_epochs full epochs) poses are re-searched against a
// snapshot of the current network. Poses start at identity unless
// fixed_poses pins them for the whole run (no searches then). resume_from
// continues a saved state; with the same seed the continuation is
// bit-identical to an uninterrupted run. Throws ConfigError on bad input
// and NumericalError (with epoch/batch) if the loss turns non-finite.
ReconResult run_reconstruction(const std::vector<ComplexField2D>& stack,
                               const OpticsConfig& cfg,
                               const TrainConfig& tcfg,
                               const SearchConfig& scfg,
                               const std::vector<Pose>* fixed_poses = nullptr,
                               const ReconHooks* hooks = nullptr,
                               const ReconState* resume_from = nullptr);

// Two files: <prefix>.ckpt (network checkpoint) and <prefix>.state.json
// (poses, loss history, seed, grid geometry).
void save_run_state(const std::string& prefix, const ReconState& state,
                    const OpticsConfig& cfg);

// Throws DataError on unreadable/corrupt files and ConfigError when the
// saved grid geometry does not match cfg (both sizes named).
ReconState load_run_state(const std::string& prefix, const OpticsConfig& cfg);

}  // namespace omnifht
