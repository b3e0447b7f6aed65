// Command-line front end: simulate / reconstruct / baseline / evaluate /
// preprocess, each a thin wrapper over the library. Every command writes the
// exact resolved configuration it ran with into its output directory, and
// exit codes map error categories: 0 ok, 2 config, 3 data, 4 numerical.

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "omnifht/baseline.hpp"
#include "omnifht/errors.hpp"
#include "omnifht/evaluation.hpp"
#include "omnifht/field_pipeline.hpp"
#include "omnifht/geometry.hpp"
#include "omnifht/io.hpp"
#include "omnifht/phantom.hpp"
#include "omnifht/reconstruct.hpp"
#include "omnifht/report.hpp"
#include "omnifht/run_config.hpp"
#include "omnifht/threading.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace omnifht;

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path + " is not valid JSON: " + e.what());
  }
  return j;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << "\n";
}

// Resolution order: built-in defaults < dataset's resolved config (if the
// directory carries one) < user-supplied --config overrides.
RunConfig resolve_config(const std::string& dataset_dir,
                         const std::string& user_config) {
  json merged = json::object();
  if (!dataset_dir.empty()) {
    const fs::path p = fs::path(dataset_dir) / "config.json";
    if (fs::exists(p)) merged = read_json_file(p.string());
  }
  if (!user_config.empty()) {
    merged.merge_patch(read_json_file(user_config));
  }
  return config_from_json(merged);
}

// Uniform subset (--sparse-views) or first-K prefix (--angle-span) of an
// N-frame stack; identity when neither option is active.
std::vector<int> select_frames(int n_total, int sparse_views,
                               double angle_span_deg,
                               const TrajectorySpec& traj) {
  if (sparse_views != 0 && angle_span_deg != 0.0) {
    throw ConfigError("--sparse-views and --angle-span are mutually "
                      "exclusive");
  }
  std::vector<int> ids;
  if (sparse_views != 0) {
    if (sparse_views < 1 || sparse_views > n_total) {
      throw ConfigError("--sparse-views must be between 1 and " +
                        std::to_string(n_total) + ", got " +
                        std::to_string(sparse_views));
    }
    ids.reserve(sparse_views);
    for (int i = 0; i < sparse_views; ++i) {
      ids.push_back(static_cast<int>(
          static_cast<long long>(i) * n_total / sparse_views));
    }
  } else if (angle_span_deg != 0.0) {
    if (traj.kind != TrajectoryKind::kSingleAxis || traj.roll_step_deg <= 0) {
      throw ConfigError("--angle-span needs a single-axis dataset with a "
                        "positive roll step in its config");
    }
    int k = static_cast<int>(
        std::floor(angle_span_deg / traj.roll_step_deg + 1e-9));
    if (k < 1 || k > n_total) {
      throw ConfigError("--angle-span " + std::to_string(angle_span_deg) +
                        " selects " + std::to_string(k) +
                        " frames, outside [1, " + std::to_string(n_total) +
                        "]");
    }
    ids.resize(k);
    for (int i = 0; i < k; ++i) ids[i] = i;
  } else {
    ids.resize(n_total);
    for (int i = 0; i < n_total; ++i) ids[i] = i;
  }
  return ids;
}

std::vector<int> apply_half_selection(const std::vector<int>& ids,
                                      const std::string& half) {
  if (half.empty()) return ids;
  int parity;
  if (half == "even") {
    parity = 0;
  } else if (half == "odd") {
    parity = 1;
  } else {
    throw ConfigError("--half-frames must be 'even' or 'odd', got '" + half +
                      "'");
  }
  std::vector<int> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (static_cast<int>(i % 2) == parity) out.push_back(ids[i]);
  }
  return out;
}

// Accepts either a volume sidecar path or a directory holding one of the
// conventional volume files.
std::pair<Volume3D, std::string> find_volume(const std::string& where) {
  if (fs::is_regular_file(where)) return io::load_volume(where);
  for (const char* name : {"volume_ri.json", "ground_truth_ri.json"}) {
    const fs::path p = fs::path(where) / name;
    if (fs::exists(p)) return io::load_volume(p.string());
  }
  throw DataError("no volume found at " + where +
                  " (expected a sidecar path, or volume_ri.json / "
                  "ground_truth_ri.json inside the directory)");
}

bool find_poses(const std::string& where, std::vector<Pose>& out) {
  std::string path;
  if (fs::is_regular_file(where)) {
    path = where;
  } else {
    const fs::path p = fs::path(where) / "poses.json";
    if (!fs::exists(p)) return false;
    path = p.string();
  }
  out = io::load_poses(path);
  return true;
}

double background_for(const std::string& channel, const std::string& dir) {
  if (channel != "ri") return 0.0;
  const fs::path p = fs::path(dir) / "config.json";
  if (fs::is_directory(dir) && fs::exists(p)) {
    return load_run_config(p.string()).optics.n_medium;
  }
  return OpticsConfig{}.n_medium;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string out, config, preset, poses_file;
  bool holograms = false;
};

void apply_preset(RunConfig& rc, const std::string& preset) {
  if (preset.empty()) return;
  if (preset == "fig2-single-axis") {
    rc.trajectory = TrajectorySpec{};
    rc.trajectory.kind = TrajectoryKind::kSingleAxis;
    rc.trajectory.n_frames = 180;
    rc.trajectory.roll_step_deg = 2.0;
  } else if (preset == "fig2-multi-axis") {
    rc.trajectory = TrajectorySpec{};
    rc.trajectory.kind = TrajectoryKind::kMultiAxisSinusoidal;
    rc.trajectory.n_frames = 180;
    rc.trajectory.roll_step_deg = 2.0;
    rc.trajectory.pitch_amp_deg = 30.0;
    rc.trajectory.yaw_amp_deg = 30.0;
    rc.trajectory.pitch_phase_rad = 0.0;
    rc.trajectory.yaw_phase_rad = std::numbers::pi / 2.0;
  } else {
    throw ConfigError("unknown preset '" + preset +
                      "' (expected fig2-single-axis or fig2-multi-axis)");
  }
}

void cmd_simulate(const SimulateArgs& a) {
  // Preset first, then --config so explicit settings win over the preset.
  RunConfig preset_base;
  apply_preset(preset_base, a.preset);
  json merged = config_to_json(preset_base);
  if (!a.config.empty()) merged.merge_patch(read_json_file(a.config));
  RunConfig rc = config_from_json(merged);
  set_worker_count(rc.threads);

  std::vector<Pose> poses;
  if (rc.trajectory.kind == TrajectoryKind::kFile || !a.poses_file.empty()) {
    if (a.poses_file.empty()) {
      throw ConfigError("trajectory kind 'file' needs --poses FILE");
    }
    poses = io::load_poses(a.poses_file);
  } else {
    poses = trajectory_poses(rc.trajectory);
  }
  rc.trajectory.n_frames = static_cast<int>(poses.size());

  const Phantom phantom = Phantom::vacuolated_cell(rc.optics.n_medium);
  const Dataset ds =
      generate_dataset(phantom, poses, rc.optics, rc.optics.roi_size_px);

  fs::create_directories(a.out);
  io::save_stack((fs::path(a.out) / "psi_stack.json").string(), ds.psi,
                 rc.optics, "psi");
  io::save_poses((fs::path(a.out) / "poses.json").string(), ds.poses);
  io::save_volume((fs::path(a.out) / "ground_truth_ri.json").string(),
                  ds.ground_truth_ri, "ri");

  if (a.holograms) {
    // Carrier along the grid diagonal at 60% of per-axis Nyquist: the +1
    // order stays below Nyquist on each axis while clearing the zero-order
    // zone around DC.
    const double f_nyq = 0.5 / rc.optics.pixel_pitch_um;
    SidebandParams carrier;
    carrier.carrier_fx_cyc_um = 0.6 * f_nyq;
    carrier.carrier_fy_cyc_um = 0.6 * f_nyq;
    carrier.radius_cyc_um =
        std::min(rc.optics.numerical_aperture / rc.optics.wavelength_um,
                 0.5 * std::hypot(carrier.carrier_fx_cyc_um,
                                  carrier.carrier_fy_cyc_um));
    std::vector<ComplexField2D> holos;
    holos.reserve(ds.psi.size());
    for (const ComplexField2D& psi : ds.psi) {
      ComplexField2D object = psi;  // O = exp(psi)
      for (std::size_t i = 0; i < object.size(); ++i) {
        object.data()[i] = std::exp(psi.data()[i]);
      }
      holos.push_back(synthesize_offaxis_hologram(object, carrier));
    }
    io::save_stack((fs::path(a.out) / "holograms.json").string(), holos,
                   rc.optics, "hologram");
  }

  save_run_config((fs::path(a.out) / "config.json").string(), rc);
  std::printf("simulate: wrote %zu frames (%d px, %.4g um pitch) to %s\n",
              ds.psi.size(), rc.optics.roi_size_px, rc.optics.pixel_pitch_um,
              a.out.c_str());
}

// ------------------------------------------------------------- reconstruct

struct ReconstructArgs {
  std::string data, out, config, half_frames, resume;
  int epochs = 0;         // 0 = keep config value
  long long seed = -1;    // <0 = keep config value
  bool known_poses = false;
  int sparse_views = 0;
  double angle_span_deg = 0.0;
  int threads = 0;
  int checkpoint_every = 0;
  bool sparse_views_given = false;
};

void cmd_reconstruct(const ReconstructArgs& a) {
  auto [frames, meta] =
      io::load_stack((fs::path(a.data) / "psi_stack.json").string());
  if (meta.kind != "psi") {
    throw DataError("reconstruct: expected a psi stack, got kind '" +
                    meta.kind + "'");
  }
  if (a.sparse_views_given && a.sparse_views == 0) {
    throw ConfigError("--sparse-views 0 selects no frames");
  }

  RunConfig rc = resolve_config(a.data, a.config);
  const bool had_dataset_config =
      fs::exists(fs::path(a.data) / "config.json");
  if (!had_dataset_config) {
    // Preprocessed experimental stacks carry geometry only in the sidecar.
    if (meta.pixel_pitch_um > 0) rc.optics.pixel_pitch_um = meta.pixel_pitch_um;
    if (meta.wavelength_um > 0) rc.optics.wavelength_um = meta.wavelength_um;
    if (meta.n_medium > 0) rc.optics.n_medium = meta.n_medium;
    if (meta.na > 0) rc.optics.numerical_aperture = meta.na;
  }
  rc.optics.roi_size_px = meta.width;
  if (a.epochs > 0) rc.train.epochs = a.epochs;
  if (a.seed >= 0) rc.train.rng_seed = static_cast<unsigned>(a.seed);
  if (a.threads > 0) rc.threads = a.threads;
  set_worker_count(rc.threads);

  std::vector<int> ids = apply_half_selection(
      select_frames(meta.frames, a.sparse_views, a.angle_span_deg,
                    rc.trajectory),
      a.half_frames);

  std::vector<ComplexField2D> subset;
  subset.reserve(ids.size());
  for (int id : ids) subset.push_back(frames[id]);

  std::vector<Pose> fixed;
  if (a.known_poses) {
    std::vector<Pose> all;
    if (!find_poses(a.data, all)) {
      throw DataError("--known-poses needs poses.json in " + a.data);
    }
    for (int id : ids) {
      if (id >= static_cast<int>(all.size())) {
        throw DataError("poses.json has " + std::to_string(all.size()) +
                        " poses but frame " + std::to_string(id) +
                        " was selected");
      }
      fixed.push_back(all[id]);
    }
  }

  fs::create_directories(a.out);
  ReconHooks hooks;
  hooks.pose_log_path =
      (fs::path(a.out) / "pose_refresh_log.jsonl").string();
  if (a.checkpoint_every > 0) {
    hooks.checkpoint_every = a.checkpoint_every;
    hooks.checkpoint_prefix = (fs::path(a.out) / "ckpt").string();
  }
  hooks.on_epoch = [&](int epoch, double loss) {
    if (epoch == 1 || epoch % 10 == 0 || epoch == rc.train.epochs) {
      std::fprintf(stderr, "epoch %d/%d  loss %.6g\n", epoch,
                   rc.train.epochs, loss);
    }
  };

  ReconState resume_state;
  const ReconState* resume_ptr = nullptr;
  if (!a.resume.empty()) {
    resume_state = load_run_state(a.resume, rc.optics);
    resume_ptr = &resume_state;
  }

  const ReconResult res = run_reconstruction(
      subset, rc.optics, rc.train, rc.search,
      a.known_poses ? &fixed : nullptr, &hooks, resume_ptr);

  io::save_volume((fs::path(a.out) / "volume_ri.json").string(), res.volume,
                  "ri");
  std::vector<Pose> est;
  for (const ScoredPose& sp : res.report.poses) est.push_back(sp.pose);
  io::save_poses((fs::path(a.out) / "poses.json").string(), est);
  save_run_state((fs::path(a.out) / "final").string(), res.state, rc.optics);
  save_run_config((fs::path(a.out) / "config.json").string(), rc);

  json rep;
  rep["n_frames_used"] = ids.size();
  rep["frames_used"] = ids;
  rep["known_poses"] = a.known_poses;
  rep["final_loss"] =
      res.report.loss_history.empty() ? 0.0 : res.report.loss_history.back();
  rep["loss_history"] = res.report.loss_history;
  rep["clamped_voxels"] = res.report.clamped_voxels;
  rep["wall_seconds"] = res.report.wall_seconds;
  {
    json scores = json::array();
    for (const ScoredPose& sp : res.report.poses) scores.push_back(sp.score);
    rep["pose_scores"] = scores;
  }
  write_json_file((fs::path(a.out) / "report.json").string(), rep);

  if (!res.report.loss_history.empty()) {
    std::vector<double> ep(res.report.loss_history.size());
    for (std::size_t i = 0; i < ep.size(); ++i) ep[i] = double(i + 1);
    write_csv((fs::path(a.out) / "loss.csv").string(), {"epoch", "loss"},
              {ep, res.report.loss_history});
    write_curves_svg((fs::path(a.out) / "loss.svg").string(), "Training loss",
                     "epoch", "loss",
                     {{"loss", ep, res.report.loss_history}});
  }
  std::printf("reconstruct: %zu frames, %d epochs, final loss %.6g -> %s\n",
              ids.size(), rc.train.epochs, rep["final_loss"].get<double>(),
              a.out.c_str());
}

// ---------------------------------------------------------------- baseline

struct BaselineArgs {
  std::string data, out, config;
  double total_deg = 360.0;
  bool known_poses = false;
};

void cmd_baseline(const BaselineArgs& a) {
  auto [frames, meta] =
      io::load_stack((fs::path(a.data) / "psi_stack.json").string());
  if (meta.kind != "psi") {
    throw DataError("baseline: expected a psi stack, got kind '" + meta.kind +
                    "'");
  }
  RunConfig rc = resolve_config(a.data, a.config);
  rc.optics.roi_size_px = meta.width;
  set_worker_count(rc.threads);

  std::vector<Pose> poses;
  if (a.known_poses) {
    if (!find_poses(a.data, poses)) {
      throw DataError("--known-poses needs poses.json in " + a.data);
    }
    poses.resize(frames.size());
  } else {
    poses = uniform_single_axis_poses(static_cast<int>(frames.size()),
                                      a.total_deg);
  }

  const Volume3D vol =
      grid_invert(frames, poses, rc.optics.roi_size_px, rc.optics);

  fs::create_directories(a.out);
  io::save_volume((fs::path(a.out) / "volume_ri.json").string(), vol, "ri");
  save_run_config((fs::path(a.out) / "config.json").string(), rc);
  json rep;
  rep["n_frames"] = frames.size();
  rep["assumed_total_deg"] = a.total_deg;
  rep["known_poses"] = a.known_poses;
  write_json_file((fs::path(a.out) / "report.json").string(), rep);
  std::printf("baseline: gridded %zu frames -> %s\n", frames.size(),
              a.out.c_str());
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string recon, truth, out, mode = "all";
  double slice_z_um = 0.0;
};

json eval_fsc(const Volume3D& va, const Volume3D& vb, double threshold,
              const std::string& out, const std::string& stem) {
  const std::vector<FscShell> curve = fsc(va, vb);
  const Resolution res = resolution_at(curve, threshold);
  std::vector<double> f, c;
  for (const FscShell& s : curve) {
    f.push_back(s.freq_per_um);
    c.push_back(s.correlation);
  }
  write_csv((fs::path(out) / (stem + ".csv")).string(),
            {"freq_per_um", "correlation"}, {f, c});
  write_curves_svg((fs::path(out) / (stem + ".svg")).string(),
                   "Fourier shell correlation", "spatial frequency (1/um)",
                   "correlation", {{"FSC", f, c}});
  json j;
  j["threshold"] = threshold;
  j["resolution_um"] = res.value_um;
  j["crossed"] = res.crossed;
  j["n_shells"] = curve.size();
  return j;
}

void cmd_evaluate(const EvaluateArgs& a) {
  fs::create_directories(a.out);
  json report;
  report["mode"] = a.mode;

  const bool wants_volumes =
      a.mode == "all" || a.mode == "fsc-ref" || a.mode == "fsc-half" ||
      a.mode == "slices";
  Volume3D va, vb;
  std::string channel_a;
  if (wants_volumes) {
    auto [v1, ch1] = find_volume(a.recon);
    auto [v2, ch2] = find_volume(a.truth);
    va = std::move(v1);
    vb = std::move(v2);
    channel_a = ch1;
    if (ch1 != ch2) {
      throw DataError("evaluate: volume channels differ ('" + ch1 + "' vs '" +
                      ch2 + "')");
    }
  }

  if (a.mode == "all" || a.mode == "fsc-ref") {
    report["fsc_ref"] = eval_fsc(va, vb, 0.5, a.out, "fsc");
  }
  if (a.mode == "fsc-half") {
    const double bg = background_for(channel_a, a.recon);
    const Rotation gauge = align_volumes(va, vb, bg);
    const Volume3D vb_aligned = resample_rotated(vb, gauge, {bg, 0.0});
    report["fsc_half"] = eval_fsc(va, vb_aligned, 1.0 / 7.0, a.out,
                                  "fsc_half");
    report["fsc_half"]["gauge_deg"] =
        geodesic_distance(gauge, Rotation::identity()) * kRadToDeg;
  }
  if (a.mode == "all" || a.mode == "slices") {
    const SliceMetrics m = slice_metrics(va, vb, a.slice_z_um);
    std::vector<double> idx(m.profile_recon.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = double(i);
    write_csv((fs::path(a.out) / "slices.csv").string(),
              {"col", "recon", "truth"},
              {idx, m.profile_recon, m.profile_truth});
    write_curves_svg((fs::path(a.out) / "slices.svg").string(),
                     "Central-row profile", "column", "value",
                     {{"recon", idx, m.profile_recon},
                      {"truth", idx, m.profile_truth}});
    report["slices"] = {{"z_um", a.slice_z_um},
                        {"mae", m.mae},
                        {"pearson", m.cross_corr}};
  }
  if (a.mode == "all" || a.mode == "poses") {
    std::vector<Pose> est, ref;
    const bool have_est = find_poses(a.recon, est);
    const bool have_ref = find_poses(a.truth, ref);
    if (a.mode == "poses" && (!have_est || !have_ref)) {
      throw DataError("evaluate: mode 'poses' needs poses.json under both "
                      "--recon and --truth");
    }
    if (have_est && have_ref) {
      if (est.size() != ref.size()) {
        // The reconstruction may have used a frame subset; its report
        // records which.
        const fs::path rp = fs::path(a.recon) / "report.json";
        if (fs::is_directory(a.recon) && fs::exists(rp)) {
          const json rj = read_json_file(rp.string());
          if (rj.contains("frames_used")) {
            std::vector<Pose> sub;
            for (int id : rj.at("frames_used").get<std::vector<int>>()) {
              if (id < 0 || id >= static_cast<int>(ref.size())) {
                throw DataError("evaluate: frames_used index out of range");
              }
              sub.push_back(ref[id]);
            }
            ref = std::move(sub);
          }
        }
      }
      const PoseReport pr = pose_report(est, ref);
      std::vector<double> frame_idx, pe, pr_, ye, yr, re_, rr, resid;
      for (std::size_t i = 0; i < pr.zxy_estimated.size(); ++i) {
        frame_idx.push_back(double(i));
        pe.push_back(pr.zxy_estimated[i].pitch_rad * kRadToDeg);
        pr_.push_back(pr.zxy_reference[i].pitch_rad * kRadToDeg);
        ye.push_back(pr.zxy_estimated[i].yaw_rad * kRadToDeg);
        yr.push_back(pr.zxy_reference[i].yaw_rad * kRadToDeg);
        re_.push_back(pr.zxy_estimated[i].roll_rad * kRadToDeg);
        rr.push_back(pr.zxy_reference[i].roll_rad * kRadToDeg);
        resid.push_back(pr.alignment.residuals_rad[i] * kRadToDeg);
      }
      write_csv((fs::path(a.out) / "poses_eval.csv").string(),
                {"frame", "pitch_est_deg", "pitch_ref_deg", "yaw_est_deg",
                 "yaw_ref_deg", "roll_est_deg", "roll_ref_deg",
                 "residual_deg"},
                {frame_idx, pe, pr_, ye, yr, re_, rr, resid});
      write_curves_svg((fs::path(a.out) / "poses_eval.svg").string(),
                       "Pose angle tracks", "frame", "angle (deg)",
                       {{"pitch est", frame_idx, pe},
                        {"pitch ref", frame_idx, pr_},
                        {"yaw est", frame_idx, ye},
                        {"yaw ref", frame_idx, yr}});
      report["poses"] = {
          {"mean_error_deg", pr.mean_error_rad * kRadToDeg},
          {"median_error_deg", pr.median_error_rad * kRadToDeg},
          {"gauge_deg", geodesic_distance(pr.alignment.global,
                                          Rotation::identity()) *
                            kRadToDeg},
          {"used_reflection", pr.alignment.used_reflection}};
    }
  }
  if (!report.contains("fsc_ref") && !report.contains("fsc_half") &&
      !report.contains("slices") && !report.contains("poses")) {
    throw ConfigError("evaluate: unknown mode '" + a.mode +
                      "' (expected all, fsc-ref, fsc-half, slices, poses)");
  }
  write_json_file((fs::path(a.out) / "report.json").string(), report);
  std::printf("evaluate: mode %s -> %s\n", a.mode.c_str(), a.out.c_str());
}

// -------------------------------------------------------------- preprocess

struct PreprocessArgs {
  std::string data, out, config;
  PreprocessConfig pcfg;
};

void cmd_preprocess(const PreprocessArgs& a) {
  std::string stack_path = a.data;
  if (fs::is_directory(a.data)) {
    stack_path = (fs::path(a.data) / "holograms.json").string();
  }
  auto [holos, meta] = io::load_stack(stack_path);
  if (meta.kind != "hologram") {
    throw DataError("preprocess: expected kind 'hologram', got '" + meta.kind +
                    "'");
  }
  RunConfig rc = resolve_config(
      fs::is_directory(a.data) ? a.data : std::string(), a.config);
  if (meta.pixel_pitch_um > 0) rc.optics.pixel_pitch_um = meta.pixel_pitch_um;
  if (meta.wavelength_um > 0) rc.optics.wavelength_um = meta.wavelength_um;
  if (meta.n_medium > 0) rc.optics.n_medium = meta.n_medium;
  if (meta.na > 0) rc.optics.numerical_aperture = meta.na;
  set_worker_count(rc.threads);

  const PreprocessResult res = preprocess_holograms(holos, a.pcfg, rc.optics);

  fs::create_directories(a.out);
  OpticsConfig out_cfg = rc.optics;
  out_cfg.roi_size_px =
      res.psi.empty() ? rc.optics.roi_size_px : res.psi.front().width();
  io::save_stack((fs::path(a.out) / "psi_stack.json").string(), res.psi,
                 out_cfg, "psi");
  rc.optics = out_cfg;
  save_run_config((fs::path(a.out) / "config.json").string(), rc);

  json rep;
  rep["carrier"] = {{"fx_cyc_um", res.carrier.carrier_fx_cyc_um},
                    {"fy_cyc_um", res.carrier.carrier_fy_cyc_um},
                    {"radius_cyc_um", res.carrier.radius_cyc_um}};
  rep["dz_used_um"] = res.dz_used_um;
  rep["n_frames_out"] = res.psi.size();
  if (a.pcfg.roi_px > 0) {
    rep["roi_source_frames"] = res.track.source_frames;
    rep["roi_flagged"] = res.track.flagged;
    json centers = json::array();
    for (const auto& c : res.track.centers) {
      centers.push_back({c.x(), c.y()});
    }
    rep["roi_centers"] = centers;
  }
  write_json_file((fs::path(a.out) / "report.json").string(), rep);
  std::printf("preprocess: %zu holograms -> %zu psi frames -> %s\n",
              holos.size(), res.psi.size(), a.out.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"omnifht: pose-free holographic flow tomography"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* s = app.add_subcommand(
      "simulate", "Generate a synthetic projection dataset");
  s->add_option("--out", sim.out, "output dataset directory")->required();
  s->add_option("--config", sim.config, "run config JSON");
  s->add_option("--preset", sim.preset,
                "fig2-single-axis | fig2-multi-axis");
  s->add_option("--poses", sim.poses_file, "explicit pose list JSON");
  s->add_flag("--holograms", sim.holograms,
              "additionally synthesize off-axis holograms");

  ReconstructArgs rec;
  CLI::App* r = app.add_subcommand(
      "reconstruct", "Joint pose + refractive-index reconstruction");
  r->add_option("--data", rec.data, "dataset directory")->required();
  r->add_option("--out", rec.out, "output directory")->required();
  r->add_option("--config", rec.config, "run config JSON");
  r->add_option("--epochs", rec.epochs, "override training epochs");
  r->add_option("--seed", rec.seed, "override RNG seed");
  r->add_flag("--known-poses", rec.known_poses,
              "use the dataset's ground-truth poses (no pose search)");
  r->add_option("--sparse-views", rec.sparse_views,
                "reconstruct from N uniformly selected frames")
      ->trigger_on_parse()
      ->each([&rec](const std::string&) { rec.sparse_views_given = true; });
  r->add_option("--angle-span", rec.angle_span_deg,
                "reconstruct from the first frames spanning DEG degrees");
  r->add_option("--half-frames", rec.half_frames,
                "'even' or 'odd': keep alternating frames (half-set runs)");
  r->add_option("--threads", rec.threads, "worker thread cap");
  r->add_option("--checkpoint-every", rec.checkpoint_every,
                "save run state every N epochs");
  r->add_option("--resume", rec.resume,
                "resume from a saved run-state prefix");

  BaselineArgs base;
  CLI::App* b = app.add_subcommand(
      "baseline", "Conventional gridding reconstruction");
  b->add_option("--data", base.data, "dataset directory")->required();
  b->add_option("--out", base.out, "output directory")->required();
  b->add_option("--config", base.config, "run config JSON");
  b->add_option("--total-deg", base.total_deg,
                "assumed total rotation of the uniform single-axis poses");
  b->add_flag("--known-poses", base.known_poses,
              "use the dataset's ground-truth poses instead of assuming "
              "uniform rotation");

  EvaluateArgs ev;
  CLI::App* e = app.add_subcommand("evaluate", "Quality metrics and plots");
  e->add_option("--recon", ev.recon, "reconstruction directory or volume")
      ->required();
  e->add_option("--truth", ev.truth,
                "reference directory or volume (other half for fsc-half)")
      ->required();
  e->add_option("--out", ev.out, "output directory")->required();
  e->add_option("--mode", ev.mode, "all | fsc-ref | fsc-half | slices | poses");
  e->add_option("--slice-z", ev.slice_z_um, "slice height in um (slices mode)");

  PreprocessArgs pre;
  CLI::App* p = app.add_subcommand(
      "preprocess", "Hologram stack -> complex perturbation stack");
  p->add_option("--data", pre.data, "hologram stack sidecar or directory")
      ->required();
  p->add_option("--out", pre.out, "output directory")->required();
  p->add_option("--config", pre.config, "run config JSON");
  p->add_option("--dz", pre.pcfg.dz_um, "fixed refocus distance in um");
  p->add_flag("--autofocus", pre.pcfg.autofocus,
              "scan for best focus instead of fixed --dz");
  p->add_option("--autofocus-min", pre.pcfg.autofocus_min_um,
                "autofocus scan lower bound (um)");
  p->add_option("--autofocus-max", pre.pcfg.autofocus_max_um,
                "autofocus scan upper bound (um)");
  p->add_option("--autofocus-steps", pre.pcfg.autofocus_steps,
                "autofocus scan samples");
  p->add_option("--blur", pre.pcfg.blur_sigma_px,
                "Gaussian denoise sigma in pixels");
  p->add_option("--roi", pre.pcfg.roi_px,
                "track the specimen and crop to this ROI size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (s->parsed()) cmd_simulate(sim);
    if (r->parsed()) cmd_reconstruct(rec);
    if (b->parsed()) cmd_baseline(base);
    if (e->parsed()) cmd_evaluate(ev);
    if (p->parsed()) cmd_preprocess(pre);
  } catch (const ConfigError& err) {
    std::fprintf(stderr, "config error: %s\n", err.what());
    return 2;
  } catch (const DataError& err) {
    std::fprintf(stderr, "data error: %s\n", err.what());
    return 3;
  } catch (const NumericalError& err) {
    std::fprintf(stderr, "numerical error: %s\n", err.what());
    return 4;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 4;
  }
  return 0;
}
