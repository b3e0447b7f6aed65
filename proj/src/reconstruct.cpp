#include "omnifht/reconstruct.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "omnifht/errors.hpp"
#include "omnifht/threading.hpp"

namespace omnifht {

using nlohmann::json;

namespace {

constexpr double kSnapshotBall = 0.53;
constexpr char kStateVersion[] = "OMNIFHT-STATE-1";

// Deterministic stream per epoch; decoupled from how many draws earlier
// epochs consumed, which is what makes mid-run resume exact.
std::mt19937 epoch_rng(unsigned seed, int epoch) {
  return std::mt19937(seed ^ (static_cast<unsigned>(epoch) * 0x9E3779B9u));
}

std::vector<int> shuffled_frame_order(int n, std::mt19937& rng) {
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng() % static_cast<unsigned>(i + 1));
    std::swap(order[i], order[j]);
  }
  return order;
}

void append_pose_log(const std::string& path, int epoch,
                     const std::vector<ScoredPose>& poses) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("pose log: cannot open " + path);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const auto q = poses[i].pose.rotation.canonical_wxyz();
    json line{{"epoch", epoch},
              {"frame", i},
              {"quat", {q[0], q[1], q[2], q[3]}},
              {"t_um",
               {poses[i].pose.translation_um.x(),
                poses[i].pose.translation_um.y()}},
              {"score", poses[i].score}};
    out << line.dump() << "\n";
  }
}

}  // namespace

GriddedSampler snapshot_sampler(const MlpParams& params,
                                const PositionalEncoding& pe, double scale,
                                const OpticsConfig& cfg) {
  const int n = cfg.roi_size_px;
  const double dk = 2.0 * std::numbers::pi / (n * cfg.pixel_pitch_um);
  const double inv_2ks = 1.0 / (2.0 * cfg.k_support());
  const InrSampler net(params, pe, scale);

  std::vector<std::complex<double>> grid(static_cast<std::size_t>(n) * n * n);
  parallel_for(n, [&](int z_begin, int z_end) {
    for (int z = z_begin; z < z_end; ++z) {
      // Collect in-ball coordinates of this plane, evaluate batched.
      Eigen::Matrix3Xd coords(3, static_cast<std::size_t>(n) * n);
      std::vector<std::size_t> where;
      int count = 0;
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          const Eigen::Vector3d k_norm((x - n / 2) * dk * inv_2ks,
                                       (y - n / 2) * dk * inv_2ks,
                                       (z - n / 2) * dk * inv_2ks);
          if (k_norm.norm() > kSnapshotBall) continue;
          coords.col(count++) = k_norm;
          where.push_back((static_cast<std::size_t>(z) * n + y) * n + x);
        }
      if (count == 0) continue;
      std::vector<std::complex<double>> vals(count);
      net.sample_many(coords.leftCols(count), vals.data());
      for (int i = 0; i < count; ++i) grid[where[i]] = vals[i];
    }
  });
  return GriddedSampler(std::move(grid), n, cfg.pixel_pitch_um,
                        cfg.k_support());
}

ReconResult run_reconstruction(const std::vector<ComplexField2D>& stack,
                               const OpticsConfig& cfg,
                               const TrainConfig& tcfg,
                               const SearchConfig& scfg,
                               const std::vector<Pose>* fixed_poses,
                               const ReconHooks* hooks,
                               const ReconState* resume_from) {
  const auto t_start = std::chrono::steady_clock::now();
  cfg.validate();
  tcfg.validate();
  scfg.validate();
  if (stack.empty()) throw ConfigError("run_reconstruction: empty stack");
  const int n_frames = static_cast<int>(stack.size());
  for (const auto& f : stack)
    if (f.height() != cfg.roi_size_px || f.width() != cfg.roi_size_px)
      throw ConfigError("run_reconstruction: frame is " +
                        std::to_string(f.height()) + "x" +
                        std::to_string(f.width()) + ", config ROI is " +
                        std::to_string(cfg.roi_size_px));
  if (fixed_poses && static_cast<int>(fixed_poses->size()) != n_frames)
    throw ConfigError("run_reconstruction: " +
                      std::to_string(fixed_poses->size()) +
                      " fixed poses for " + std::to_string(n_frames) +
                      " frames");
  if (resume_from &&
      static_cast<int>(resume_from->poses.size()) != n_frames)
    throw ConfigError("run_reconstruction: resume state has " +
                      std::to_string(resume_from->poses.size()) +
                      " poses for " + std::to_string(n_frames) + " frames");

  const BandGrid band(cfg, cfg.roi_size_px);

  // Band observations, normalized once for the whole run.
  std::vector<TrainingFrame> frames(n_frames);
  for (int i = 0; i < n_frames; ++i) {
    const ComplexField2D hat = stack[i].domain() == Domain::FourierSpace
                                   ? stack[i]
                                   : stack[i].to_fourier();
    frames[i].observed_band = band_values(hat, band);
  }

  ReconState st;
  if (resume_from) {
    st = *resume_from;
  } else {
    st.pe = PositionalEncoding{};
    st.rng_seed = tcfg.rng_seed;
    st.normalization = normalization_scale(frames);
    st.params = MlpParams::standard(st.pe, tcfg.rng_seed);
    st.poses.assign(n_frames, ScoredPose{});
    if (fixed_poses)
      for (int i = 0; i < n_frames; ++i) st.poses[i].pose = (*fixed_poses)[i];
  }
  const double inv_norm = 1.0 / st.normalization;
  for (auto& f : frames)
    for (auto& v : f.observed_band) v *= inv_norm;
  for (int i = 0; i < n_frames; ++i) frames[i].pose = st.poses[i].pose;

  // Physical-units scale of the trained network (see training units note in
  // the network module).
  const auto net_scale = [&] {
    return 2.0 * cfg.k_medium() * st.normalization;
  };
  std::vector<std::vector<std::complex<double>>> obs_bands(n_frames);
  for (int i = 0; i < n_frames; ++i) obs_bands[i] = frames[i].observed_band;

  for (int epoch = st.epoch + 1; epoch <= tcfg.epochs; ++epoch) {
    if (!fixed_poses && epoch > 1 &&
        (epoch - 1) % tcfg.pose_refresh_period_epochs == 0) {
      const GriddedSampler snap =
          snapshot_sampler(st.params, st.pe, net_scale(), cfg);
      std::vector<Pose> warm(n_frames);
      for (int i = 0; i < n_frames; ++i) warm[i] = st.poses[i].pose;
      st.poses = search_all_band(obs_bands, snap, band, scfg,
                                 scfg.warm_start ? &warm : nullptr);
      for (int i = 0; i < n_frames; ++i) frames[i].pose = st.poses[i].pose;
      if (hooks && !hooks->pose_log_path.empty())
        append_pose_log(hooks->pose_log_path, epoch, st.poses);
      if (hooks && hooks->on_refresh) hooks->on_refresh(epoch, st.poses);
    }

    auto rng = epoch_rng(st.rng_seed, epoch);
    const std::vector<int> order = shuffled_frame_order(n_frames, rng);

    double epoch_loss = 0.0;
    MlpParams grads = MlpParams::zeros_like(st.params);
    int batch_index = 0;
    for (int b = 0; b < n_frames; b += tcfg.batch_frames, ++batch_index) {
      std::vector<const TrainingFrame*> batch;
      for (int i = b; i < std::min(b + tcfg.batch_frames, n_frames); ++i)
        batch.push_back(&frames[order[i]]);
      const double loss =
          loss_and_gradients(st.params, batch, band, st.pe, &grads);
      if (!std::isfinite(loss))
        throw NumericalError(
            "run_reconstruction: non-finite loss at epoch " +
            std::to_string(epoch) + ", batch " + std::to_string(batch_index));
      sgd_step(st.params, grads, tcfg.learning_rate);
      epoch_loss += loss * static_cast<double>(batch.size());
    }
    epoch_loss /= n_frames;
    st.loss_history.push_back(epoch_loss);
    st.epoch = epoch;

    if (hooks && hooks->on_epoch) hooks->on_epoch(epoch, epoch_loss);
    if (hooks && hooks->checkpoint_every > 0 &&
        !hooks->checkpoint_prefix.empty() &&
        epoch % hooks->checkpoint_every == 0)
      save_run_state(hooks->checkpoint_prefix, st, cfg);
  }

  // Final per-frame scores against the network itself (not a snapshot).
  const InrSampler net(st.params, st.pe, net_scale());
  parallel_for(n_frames, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      const auto pred = predict_band(net, st.poses[i].pose, band);
      st.poses[i].score = similarity(pred, obs_bands[i]);
    }
  });

  ReconResult result;
  result.report.loss_history = st.loss_history;
  result.report.poses = st.poses;
  const Volume3D f = extract_volume(net, cfg.roi_size_px, cfg);
  result.volume = ri_from_potential(f, cfg, &result.report.clamped_voxels);
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  result.state = std::move(st);
  return result;
}

void save_run_state(const std::string& prefix, const ReconState& state,
                    const OpticsConfig& cfg) {
  Checkpoint ck;
  ck.params = state.params;
  ck.pe = state.pe;
  ck.normalization = state.normalization;
  ck.epoch = state.epoch;
  save_checkpoint(prefix + ".ckpt", ck);

  json j{{"version", kStateVersion},
         {"epoch", state.epoch},
         {"rng_seed", state.rng_seed},
         {"roi_px", cfg.roi_size_px},
         {"pixel_pitch_um", cfg.pixel_pitch_um},
         {"loss_history", state.loss_history}};
  json poses = json::array();
  for (const auto& sp : state.poses) {
    const auto q = sp.pose.rotation.canonical_wxyz();
    poses.push_back(json{{"quat", {q[0], q[1], q[2], q[3]}},
                         {"t_um",
                          {sp.pose.translation_um.x(),
                           sp.pose.translation_um.y()}},
                         {"score", sp.score}});
  }
  j["poses"] = std::move(poses);

  const std::string path = prefix + ".state.json";
  std::ofstream out(path);
  if (!out) throw DataError("save_run_state: cannot open " + path);
  out << j.dump(2) << "\n";
  if (!out) throw DataError("save_run_state: write failed for " + path);
}

ReconState load_run_state(const std::string& prefix,
                          const OpticsConfig& cfg) {
  const std::string path = prefix + ".state.json";
  std::ifstream in(path);
  if (!in) throw DataError("load_run_state: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("load_run_state: " + path + ": " + e.what());
  }
  if (!j.contains("version") || j["version"] != kStateVersion)
    throw DataError("load_run_state: " + path +
                    " is not a run state file (bad version tag)");
  const int roi = j.at("roi_px").get<int>();
  if (roi != cfg.roi_size_px)
    throw ConfigError("load_run_state: saved grid is " + std::to_string(roi) +
                      "^3 but config requests " +
                      std::to_string(cfg.roi_size_px) + "^3");
  const double pitch = j.at("pixel_pitch_um").get<double>();
  if (std::abs(pitch - cfg.pixel_pitch_um) > 1e-12)
    throw ConfigError("load_run_state: saved pixel pitch " +
                      std::to_string(pitch) + " um differs from config " +
                      std::to_string(cfg.pixel_pitch_um) + " um");

  ReconState st;
  st.epoch = j.at("epoch").get<int>();
  st.rng_seed = j.at("rng_seed").get<unsigned>();
  st.loss_history = j.at("loss_history").get<std::vector<double>>();
  for (const auto& p : j.at("poses")) {
    ScoredPose sp;
    const auto q = p.at("quat");
    sp.pose.rotation =
        Rotation::from_unit_wxyz(q.at(0).get<double>(), q.at(1).get<double>(),
                                 q.at(2).get<double>(), q.at(3).get<double>());
    sp.pose.translation_um =
        Eigen::Vector2d(p.at("t_um").at(0).get<double>(),
                        p.at("t_um").at(1).get<double>());
    sp.score = p.at("score").get<double>();
    st.poses.push_back(sp);
  }

  const Checkpoint ck = load_checkpoint(prefix + ".ckpt");
  if (ck.epoch != st.epoch)
    throw DataError("load_run_state: checkpoint epoch " +
                    std::to_string(ck.epoch) + " does not match state epoch " +
                    std::to_string(st.epoch));
  st.params = ck.params;
  st.pe = ck.pe;
  st.normalization = ck.normalization;
  return st;
}

}  // namespace omnifht
