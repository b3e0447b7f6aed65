#include "omnifht/run_config.hpp"

#include <fstream>
#include <initializer_list>
#include <string>

#include "omnifht/errors.hpp"

namespace omnifht {

namespace {

using nlohmann::json;

// Reads obj[key] into out when present; a type mismatch names the exact
// JSON-pointer location instead of surfacing nlohmann's numeric error code.
template <typename T>
void read_field(const json& obj, const char* key, const std::string& where,
                T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: wrong type at " + where + "/" + key);
  }
}

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) {
    throw ConfigError("config: expected an object at " +
                      (where.empty() ? std::string("/") : where));
  }
}

// Rejects any key outside the allowed list, naming it by JSON pointer so a
// typo like "wavelenght_um" fails loudly instead of keeping the default.
void reject_unknown_keys(const json& obj,
                         std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("config: unknown key at " + where + "/" + item.key());
    }
  }
}

TrajectoryKind kind_from_string(const std::string& s,
                                const std::string& where) {
  if (s == "single-axis") return TrajectoryKind::kSingleAxis;
  if (s == "multi-axis-sinusoidal") return TrajectoryKind::kMultiAxisSinusoidal;
  if (s == "file") return TrajectoryKind::kFile;
  throw ConfigError("config: unknown trajectory kind \"" + s + "\" at " +
                    where + " (expected single-axis, multi-axis-sinusoidal, "
                    "or file)");
}

std::string kind_to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::kSingleAxis: return "single-axis";
    case TrajectoryKind::kMultiAxisSinusoidal: return "multi-axis-sinusoidal";
    case TrajectoryKind::kFile: return "file";
  }
  throw ConfigError("config: unrepresentable trajectory kind");
}

void parse_optics(const json& j, const std::string& where, OpticsConfig& c) {
  require_object(j, where);
  reject_unknown_keys(j,
                      {"wavelength_um", "n_medium", "numerical_aperture",
                       "pixel_pitch_um", "roi_size_px", "defocus_z0_um"},
                      where);
  read_field(j, "wavelength_um", where, c.wavelength_um);
  read_field(j, "n_medium", where, c.n_medium);
  read_field(j, "numerical_aperture", where, c.numerical_aperture);
  read_field(j, "pixel_pitch_um", where, c.pixel_pitch_um);
  read_field(j, "roi_size_px", where, c.roi_size_px);
  read_field(j, "defocus_z0_um", where, c.defocus_z0_um);
}

void parse_train(const json& j, const std::string& where, TrainConfig& c) {
  require_object(j, where);
  reject_unknown_keys(j,
                      {"epochs", "learning_rate", "batch_frames",
                       "pose_refresh_period_epochs", "rng_seed"},
                      where);
  read_field(j, "epochs", where, c.epochs);
  read_field(j, "learning_rate", where, c.learning_rate);
  read_field(j, "batch_frames", where, c.batch_frames);
  read_field(j, "pose_refresh_period_epochs", where,
             c.pose_refresh_period_epochs);
  read_field(j, "rng_seed", where, c.rng_seed);
}

void parse_search(const json& j, const std::string& where, SearchConfig& c) {
  require_object(j, where);
  reject_unknown_keys(j,
                      {"coarse_rot_step_deg", "trans_half_range", "trans_step",
                       "top_k", "n_refine_iters", "warm_start"},
                      where);
  read_field(j, "coarse_rot_step_deg", where, c.coarse_rot_step_deg);
  read_field(j, "trans_half_range", where, c.trans_half_range);
  read_field(j, "trans_step", where, c.trans_step);
  read_field(j, "top_k", where, c.top_k);
  read_field(j, "n_refine_iters", where, c.n_refine_iters);
  read_field(j, "warm_start", where, c.warm_start);
}

void parse_trajectory(const json& j, const std::string& where,
                      TrajectorySpec& c) {
  require_object(j, where);
  reject_unknown_keys(j,
                      {"kind", "n_frames", "roll_step_deg", "pitch_amp_deg",
                       "yaw_amp_deg", "pitch_phase_rad", "yaw_phase_rad"},
                      where);
  if (j.contains("kind")) {
    std::string s;
    read_field(j, "kind", where, s);
    c.kind = kind_from_string(s, where + "/kind");
  }
  read_field(j, "n_frames", where, c.n_frames);
  read_field(j, "roll_step_deg", where, c.roll_step_deg);
  read_field(j, "pitch_amp_deg", where, c.pitch_amp_deg);
  read_field(j, "yaw_amp_deg", where, c.yaw_amp_deg);
  read_field(j, "pitch_phase_rad", where, c.pitch_phase_rad);
  read_field(j, "yaw_phase_rad", where, c.yaw_phase_rad);
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j) {
  require_object(j, "");
  reject_unknown_keys(j, {"optics", "train", "search", "trajectory", "threads"},
                      "");
  RunConfig c;
  if (j.contains("optics")) parse_optics(j.at("optics"), "/optics", c.optics);
  if (j.contains("train")) parse_train(j.at("train"), "/train", c.train);
  if (j.contains("search")) parse_search(j.at("search"), "/search", c.search);
  if (j.contains("trajectory")) {
    parse_trajectory(j.at("trajectory"), "/trajectory", c.trajectory);
  }
  read_field(j, "threads", "", c.threads);
  if (c.threads < 1) {
    throw ConfigError("config: /threads must be >= 1, got " +
                      std::to_string(c.threads));
  }
  c.optics.validate();
  c.train.validate();
  c.search.validate();
  return c;
}

nlohmann::json config_to_json(const RunConfig& c) {
  json j;
  j["optics"] = {{"wavelength_um", c.optics.wavelength_um},
                 {"n_medium", c.optics.n_medium},
                 {"numerical_aperture", c.optics.numerical_aperture},
                 {"pixel_pitch_um", c.optics.pixel_pitch_um},
                 {"roi_size_px", c.optics.roi_size_px},
                 {"defocus_z0_um", c.optics.defocus_z0_um}};
  j["train"] = {{"epochs", c.train.epochs},
                {"learning_rate", c.train.learning_rate},
                {"batch_frames", c.train.batch_frames},
                {"pose_refresh_period_epochs",
                 c.train.pose_refresh_period_epochs},
                {"rng_seed", c.train.rng_seed}};
  j["search"] = {{"coarse_rot_step_deg", c.search.coarse_rot_step_deg},
                 {"trans_half_range", c.search.trans_half_range},
                 {"trans_step", c.search.trans_step},
                 {"top_k", c.search.top_k},
                 {"n_refine_iters", c.search.n_refine_iters},
                 {"warm_start", c.search.warm_start}};
  j["trajectory"] = {{"kind", kind_to_string(c.trajectory.kind)},
                     {"n_frames", c.trajectory.n_frames},
                     {"roll_step_deg", c.trajectory.roll_step_deg},
                     {"pitch_amp_deg", c.trajectory.pitch_amp_deg},
                     {"yaw_amp_deg", c.trajectory.yaw_amp_deg},
                     {"pitch_phase_rad", c.trajectory.pitch_phase_rad},
                     {"yaw_phase_rad", c.trajectory.yaw_phase_rad}};
  j["threads"] = c.threads;
  return j;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("config: " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void save_run_config(const std::string& path, const RunConfig& c) {
  std::ofstream out(path);
  if (!out) throw DataError("config: cannot write " + path);
  out << config_to_json(c).dump(2) << "\n";
  if (!out) throw DataError("config: failed writing " + path);
}

}  // namespace omnifht
