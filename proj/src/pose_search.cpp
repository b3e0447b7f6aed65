#include "omnifht/pose_search.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>

#include "omnifht/errors.hpp"
#include "omnifht/threading.hpp"

namespace omnifht {

namespace {

using Cplx = std::complex<double>;

double clamp_score(double s) { return std::clamp(s, -1.0, 1.0); }

// Inner product machinery shared by both scoring paths.
double norm_of(const std::vector<Cplx>& v) {
  double s = 0.0;
  for (const Cplx& x : v) s += std::norm(x);
  return std::sqrt(s);
}

// Sign-canonical comparison: q and -q are the same rotation and must group
// together (a deserialized pose may carry the flipped sign).
bool same_rotation_bits(const Rotation& a, const Rotation& b) {
  const Eigen::Vector4d qa = a.canonical_wxyz(), qb = b.canonical_wxyz();
  return qa.x() == qb.x() && qa.y() == qb.y() && qa.z() == qb.z() &&
         qa.w() == qb.w();
}

bool same_pose_bits(const Pose& a, const Pose& b) {
  return same_rotation_bits(a.rotation, b.rotation) &&
         a.translation_um.x() == b.translation_um.x() &&
         a.translation_um.y() == b.translation_um.y();
}

// One-axis translation ramps exp(i k t) keyed by the exact t value; the
// refinement grids reuse at most three distinct offsets per axis.
class AxisRampCache {
 public:
  AxisRampCache(const BandGrid& band, bool x_axis)
      : band_(&band), x_axis_(x_axis) {}

  const Eigen::VectorXcd& ramp(double t_um) {
    for (const auto& e : entries_)
      if (e.first == t_um) return e.second;
    const auto& bins = band_->bins();
    Eigen::VectorXcd r(static_cast<Eigen::Index>(bins.size()));
    for (std::size_t j = 0; j < bins.size(); ++j) {
      const double k = x_axis_ ? bins[j].kx : bins[j].ky;
      r[static_cast<Eigen::Index>(j)] = std::polar(1.0, k * t_um);
    }
    entries_.emplace_back(t_um, std::move(r));
    return entries_.back().second;
  }

 private:
  const BandGrid* band_;
  bool x_axis_;
  std::vector<std::pair<double, Eigen::VectorXcd>> entries_;
};

// c_j = pred0_j * conj(obs_j) for the t=0 prediction of one rotation;
// score(t) = Re sum_j c_j rx_j ry_j / (|pred0| |obs|). The ramp has unit
// modulus, so |pred| is translation-independent.
struct RotationScore {
  Eigen::VectorXcd c;
  double pred_norm = 0.0;

  void build(const std::vector<Cplx>& observed,
             const SpectrumSampler& sampler, const BandGrid& band,
             const Rotation& r, std::vector<Cplx>& fhat_scratch) {
    const Eigen::Matrix3Xd coords = band.object_coords(r);
    fhat_scratch.resize(band.size());
    sampler.sample_many(coords, fhat_scratch.data());
    const auto& base = band.base_factors();
    c.resize(static_cast<Eigen::Index>(band.size()));
    double n2 = 0.0;
    for (std::size_t j = 0; j < band.size(); ++j) {
      const Cplx pred = fhat_scratch[j] * base[j];
      n2 += std::norm(pred);
      c[static_cast<Eigen::Index>(j)] = pred * std::conj(observed[j]);
    }
    pred_norm = std::sqrt(n2);
  }

  double score_at(const Eigen::VectorXcd& rx, const Eigen::VectorXcd& ry,
                  double obs_norm) const {
    const double denom = pred_norm * obs_norm;
    if (denom == 0.0) return 0.0;
    const Cplx dot = (c.array() * rx.array() * ry.array()).sum();
    return clamp_score(dot.real() / denom);
  }
};

// Sorted candidate buffer of at most k entries under scored_pose_less,
// with exact-duplicate poses dropped (refinement grids of nearby survivors
// overlap on shared corners).
class TopK {
 public:
  explicit TopK(int k) : k_(static_cast<std::size_t>(k)) {}

  void offer(const ScoredPose& cand) {
    for (std::size_t i = 0; i < best_.size(); ++i)
      if (same_pose_bits(best_[i].pose, cand.pose)) {
        // Rescoring the same pose can move the value by rounding; keep one
        // entry, the better-ordered of the two.
        if (!scored_pose_less(cand, best_[i])) return;
        best_.erase(best_.begin() + static_cast<std::ptrdiff_t>(i));
        break;
      }
    if (best_.size() == k_ && !scored_pose_less(cand, best_.back())) return;
    auto it = std::lower_bound(best_.begin(), best_.end(), cand,
                               scored_pose_less);
    best_.insert(it, cand);
    if (best_.size() > k_) best_.pop_back();
  }

  const std::vector<ScoredPose>& entries() const { return best_; }
  double best_score() const { return best_.empty() ? 0.0 : best_[0].score; }

 private:
  std::size_t k_;
  std::vector<ScoredPose> best_;
};

}  // namespace

void SearchConfig::validate() const {
  if (!(coarse_rot_step_deg > 0.0))
    throw ConfigError("search config: coarse rotation step must be positive");
  if (!(trans_step > 0.0))
    throw ConfigError("search config: translation step must be positive");
  if (!(trans_half_range >= 0.0))
    throw ConfigError("search config: translation range must be >= 0");
  if (top_k < 1) throw ConfigError("search config: top_k must be >= 1");
  if (n_refine_iters < 1)
    throw ConfigError("search config: n_refine_iters must be >= 1");
}

bool scored_pose_less(const ScoredPose& a, const ScoredPose& b) {
  if (a.score != b.score) return a.score > b.score;
  const Eigen::Vector4d qa = a.pose.rotation.canonical_wxyz();
  const Eigen::Vector4d qb = b.pose.rotation.canonical_wxyz();
  for (int i = 0; i < 4; ++i)
    if (qa[i] != qb[i]) return qa[i] > qb[i];
  if (a.pose.translation_um.x() != b.pose.translation_um.x())
    return a.pose.translation_um.x() < b.pose.translation_um.x();
  return a.pose.translation_um.y() < b.pose.translation_um.y();
}

double similarity(const std::vector<Cplx>& pred, const std::vector<Cplx>& obs) {
  if (pred.size() != obs.size())
    throw ConfigError("similarity: size mismatch, " +
                      std::to_string(pred.size()) + " vs " +
                      std::to_string(obs.size()));
  Cplx dot(0.0, 0.0);
  double np2 = 0.0, no2 = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    dot += pred[j] * std::conj(obs[j]);
    np2 += std::norm(pred[j]);
    no2 += std::norm(obs[j]);
  }
  if (np2 == 0.0 || no2 == 0.0) return 0.0;
  return clamp_score(dot.real() / std::sqrt(np2 * no2));
}

double similarity(const ComplexField2D& psi_pred, const ComplexField2D& psi_obs) {
  if (psi_pred.height() != psi_obs.height() ||
      psi_pred.width() != psi_obs.width())
    throw ConfigError("similarity: field shape mismatch");
  Cplx dot(0.0, 0.0);
  double np2 = 0.0, no2 = 0.0;
  for (std::size_t i = 0; i < psi_pred.size(); ++i) {
    dot += psi_pred.data()[i] * std::conj(psi_obs.data()[i]);
    np2 += std::norm(psi_pred.data()[i]);
    no2 += std::norm(psi_obs.data()[i]);
  }
  if (np2 == 0.0 || no2 == 0.0) return 0.0;
  return clamp_score(dot.real() / std::sqrt(np2 * no2));
}

double score_pose(const std::vector<Cplx>& observed_band,
                  const SpectrumSampler& sampler, const BandGrid& band,
                  const Pose& pose) {
  if (observed_band.size() != band.size())
    throw ConfigError("score_pose: observation does not match the band");
  return similarity(predict_band(sampler, pose, band), observed_band);
}

std::vector<double> score_candidates(const std::vector<Cplx>& observed_band,
                                     const SpectrumSampler& sampler,
                                     const BandGrid& band,
                                     const std::vector<Pose>& candidates) {
  if (observed_band.size() != band.size())
    throw ConfigError("score_candidates: observation does not match the band");
  const double obs_norm = norm_of(observed_band);
  std::vector<double> out(candidates.size(), 0.0);
  AxisRampCache rx(band, true), ry(band, false);
  RotationScore rs;
  std::vector<Cplx> scratch;
  bool have = false;
  Rotation last;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Pose& p = candidates[i];
    if (!have || !same_rotation_bits(p.rotation, last)) {
      rs.build(observed_band, sampler, band, p.rotation, scratch);
      last = p.rotation;
      have = true;
    }
    out[i] = rs.score_at(rx.ramp(p.translation_um.x()),
                         ry.ramp(p.translation_um.y()), obs_norm);
  }
  return out;
}

ScoredPose search_pose_band(const std::vector<Cplx>& observed_band,
                            const SpectrumSampler& sampler,
                            const BandGrid& band, const SearchConfig& scfg,
                            const Pose* warm_pose, SearchTrace* trace) {
  scfg.validate();
  if (observed_band.size() != band.size())
    throw ConfigError("search_pose: observation does not match the band");
  const double obs_norm = norm_of(observed_band);
  const double roi_width_um = band.roi_px() * band.pixel_pitch_um();

  // Coarse translation grid, symmetric about zero.
  const int half_steps =
      static_cast<int>(std::floor(scfg.trans_half_range / scfg.trans_step +
                                  0.5));
  const int nt = 2 * half_steps + 1;
  std::vector<double> t_values(nt);
  for (int a = 0; a < nt; ++a)
    t_values[a] = (a - half_steps) * scfg.trans_step * roi_width_um;

  const auto& bins = band.bins();
  const Eigen::Index B = static_cast<Eigen::Index>(band.size());
  Eigen::MatrixXcd Rx(B, nt), Ry(B, nt);
  for (int a = 0; a < nt; ++a)
    for (Eigen::Index j = 0; j < B; ++j) {
      Rx(j, a) = std::polar(1.0, bins[j].kx * t_values[a]);
      Ry(j, a) = std::polar(1.0, bins[j].ky * t_values[a]);
    }

  TopK top(scfg.top_k);
  const std::vector<Rotation> grid = so3_coarse_grid(scfg.coarse_rot_step_deg);
  RotationScore rs;
  std::vector<Cplx> scratch;
  Eigen::MatrixXcd T(B, nt);
  for (const Rotation& r : grid) {
    rs.build(observed_band, sampler, band, r, scratch);
    const double denom = rs.pred_norm * obs_norm;
    if (denom == 0.0) {
      Pose p;
      p.rotation = r;
      p.translation_um = Eigen::Vector2d(t_values[half_steps],
                                         t_values[half_steps]);
      top.offer({p, 0.0});
      continue;
    }
    T = Ry.array().colwise() * rs.c.array();
    const Eigen::MatrixXd S = (Rx.transpose() * T).real() / denom;
    // One hypothesis per rotation: its best translation. Ranking raw
    // (rotation, translation) pairs instead lets a single strong rotation
    // flood the survivor set with translation variants and starve the
    // basin that actually contains the optimum.
    bool first = true;
    ScoredPose best_of_rotation;
    for (int a = 0; a < nt; ++a)
      for (int b = 0; b < nt; ++b) {
        Pose p;
        p.rotation = r;
        p.translation_um = Eigen::Vector2d(t_values[a], t_values[b]);
        const ScoredPose cand{p, clamp_score(S(a, b))};
        if (first || scored_pose_less(cand, best_of_rotation)) {
          best_of_rotation = cand;
          first = false;
        }
      }
    top.offer(best_of_rotation);
  }

  if (scfg.warm_start && warm_pose != nullptr)
    top.offer({*warm_pose,
               score_pose(observed_band, sampler, band, *warm_pose)});

  if (trace) trace->stage_best_score.push_back(top.best_score());

  for (int iter = 1; iter <= scfg.n_refine_iters; ++iter) {
    const double rot_step = scfg.coarse_rot_step_deg / std::pow(2.0, iter);
    const double trans_step_um =
        scfg.trans_step / std::pow(2.0, iter) * roi_width_um;
    const std::vector<ScoredPose> survivors = top.entries();
    TopK next(scfg.top_k);
    for (const ScoredPose& s : survivors) next.offer(s);
    for (const ScoredPose& s : survivors) {
      const std::vector<Pose> local =
          local_refine_grid(s.pose, rot_step, trans_step_um);
      AxisRampCache rcx(band, true), rcy(band, false);
      bool have = false;
      Rotation last;
      ScoredPose best_of_rotation;
      for (const Pose& p : local) {
        if (!have || !same_rotation_bits(p.rotation, last)) {
          if (have) next.offer(best_of_rotation);
          rs.build(observed_band, sampler, band, p.rotation, scratch);
          last = p.rotation;
          have = false;
        }
        const ScoredPose cand{
            p, rs.score_at(rcx.ramp(p.translation_um.x()),
                           rcy.ramp(p.translation_um.y()), obs_norm)};
        if (!have || scored_pose_less(cand, best_of_rotation))
          best_of_rotation = cand;
        have = true;
      }
      if (have) next.offer(best_of_rotation);
    }
    top = next;
    if (trace) trace->stage_best_score.push_back(top.best_score());
  }

  return top.entries().front();
}

ScoredPose search_pose(const ComplexField2D& psi_obs_hat,
                       const SpectrumSampler& sampler, const OpticsConfig& cfg,
                       const SearchConfig& scfg) {
  const BandGrid band(cfg, psi_obs_hat.width());
  return search_pose_band(band_values(psi_obs_hat, band), sampler, band, scfg);
}

std::vector<ScoredPose> search_all_band(
    const std::vector<std::vector<Cplx>>& observed_bands,
    const SpectrumSampler& sampler, const BandGrid& band,
    const SearchConfig& scfg, const std::vector<Pose>* warm_poses) {
  if (warm_poses && warm_poses->size() != observed_bands.size())
    throw ConfigError("search_all: warm pose list does not match frame count");
  std::vector<ScoredPose> out(observed_bands.size());
  parallel_for(observed_bands.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Pose* warm =
          (scfg.warm_start && warm_poses) ? &(*warm_poses)[i] : nullptr;
      out[i] = search_pose_band(observed_bands[i], sampler, band, scfg, warm);
    }
  });
  return out;
}

std::vector<ScoredPose> search_all(const std::vector<ComplexField2D>& frames,
                                   const SpectrumSampler& sampler,
                                   const OpticsConfig& cfg,
                                   const SearchConfig& scfg,
                                   const std::vector<Pose>* warm_poses) {
  if (frames.empty()) return {};
  const BandGrid band(cfg, frames[0].width());
  std::vector<std::vector<Cplx>> bands(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i)
    bands[i] = band_values(frames[i], band);
  return search_all_band(bands, sampler, band, scfg, warm_poses);
}

}  // namespace omnifht
