#pragma once

#include <complex>
#include <vector>

#include "omnifht/field.hpp"
#include "omnifht/forward_model.hpp"
#include "omnifht/geometry.hpp"

namespace omnifht {

// Coarse-to-fine joint search over SO(3) x R^2. The coarse stage scores the
// full rotation grid against an in-plane translation grid; each refinement
// iteration halves both steps and rescores local neighborhoods around the
// k best candidates.
struct SearchConfig {
  double coarse_rot_step_deg = 30.0;
  double trans_half_range = 0.5;  // translation window, fraction of ROI width
  double trans_step = 0.1;        // coarse translation step, same units
  int top_k = 8;
  int n_refine_iters = 5;
  // When set, the previous pose passed to the search joins the coarse
  // candidate set, so a refresh can never score below the incumbent.
  bool warm_start = false;

  void validate() const;  // throws ConfigError
};

struct ScoredPose {
  Pose pose;
  double score = 0.0;  // normalized similarity in [-1, 1]
};

// Strict total order used everywhere candidates are ranked: higher score
// first; ties prefer the lexicographically greater canonical quaternion
// (identity (1,0,0,0) is the global maximum, so symmetric objects resolve
// to "unrotated"), then the lexicographically smaller translation.
bool scored_pose_less(const ScoredPose& a, const ScoredPose& b);

// Re<pred, obs> / (|pred| |obs|), the phase-sensitive alignment score.
// Returns 0 when either norm is zero; clamped to [-1, 1].
double similarity(const ComplexField2D& psi_pred,
                  const ComplexField2D& psi_obs);
double similarity(const std::vector<std::complex<double>>& pred,
                  const std::vector<std::complex<double>>& obs);

// Reference scorer: one full prediction (sample, measurement factor,
// translation ramp) followed by similarity. The search itself factors the
// ramp out and scores whole translation grids per rotation; the two paths
// agree to rounding.
double score_pose(const std::vector<std::complex<double>>& observed_band,
                  const SpectrumSampler& sampler, const BandGrid& band,
                  const Pose& pose);

// Ramp-factored scores for an explicit candidate list, sharing one sampler
// evaluation across consecutive candidates with bitwise-equal rotations.
std::vector<double> score_candidates(
    const std::vector<std::complex<double>>& observed_band,
    const SpectrumSampler& sampler, const BandGrid& band,
    const std::vector<Pose>& candidates);

// Best score after each stage (coarse, then one entry per refinement).
struct SearchTrace {
  std::vector<double> stage_best_score;
};

// Full coarse-to-fine search for one frame given as band values. The result
// is deterministic: candidates are ranked by scored_pose_less and every
// stage's survivor set includes the incumbent.
ScoredPose search_pose_band(
    const std::vector<std::complex<double>>& observed_band,
    const SpectrumSampler& sampler, const BandGrid& band,
    const SearchConfig& scfg, const Pose* warm_pose = nullptr,
    SearchTrace* trace = nullptr);

// Convenience overload on a fourier-space frame.
ScoredPose search_pose(const ComplexField2D& psi_obs_hat,
                       const SpectrumSampler& sampler, const OpticsConfig& cfg,
                       const SearchConfig& scfg);

// Independent per-frame searches against one immutable sampler snapshot;
// frames are distributed over workers, output order matches input order.
// warm_poses (same length) are used only when scfg.warm_start is set.
std::vector<ScoredPose> search_all(const std::vector<ComplexField2D>& frames,
                                   const SpectrumSampler& sampler,
                                   const OpticsConfig& cfg,
                                   const SearchConfig& scfg,
                                   const std::vector<Pose>* warm_poses = nullptr);

std::vector<ScoredPose> search_all_band(
    const std::vector<std::vector<std::complex<double>>>& observed_bands,
    const SpectrumSampler& sampler, const BandGrid& band,
    const SearchConfig& scfg,
    const std::vector<Pose>* warm_poses = nullptr);

}  // namespace omnifht
