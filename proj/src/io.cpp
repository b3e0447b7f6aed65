#include "omnifht/io.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "omnifht/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian");

namespace omnifht::io {
namespace {

using nlohmann::json;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

std::vector<float> read_floats(const std::string& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataError("cannot open " + path);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected * sizeof(float))
    throw DataError(path + ": size " + std::to_string(bytes) +
                    " bytes, sidecar implies " +
                    std::to_string(expected * sizeof(float)));
  std::vector<float> out(expected);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(out.data()), bytes);
  if (!in) throw DataError(path + ": short read");
  return out;
}

void write_floats(const std::string& path, const std::vector<float>& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
  if (!out) throw DataError(path + ": short write");
}

int next_pow2(int n) {
  int p = 2;
  while (p < n) p *= 2;
  return p;
}

double field_at(const json& j, const char* key) {
  if (!j.contains(key)) throw DataError("sidecar missing field " + std::string(key));
  return j.at(key).get<double>();
}

}  // namespace

std::string data_path_for(const std::string& sidecar_path) {
  std::filesystem::path p(sidecar_path);
  p.replace_extension(".f32");
  return p.string();
}

void save_stack(const std::string& sidecar_path,
                const std::vector<ComplexField2D>& frames,
                const OpticsConfig& cfg, const std::string& kind) {
  if (frames.empty()) throw DataError("save_stack: empty stack");
  if (kind != "psi" && kind != "object" && kind != "hologram")
    throw DataError("save_stack: unknown kind " + kind);
  const int h = frames[0].height(), w = frames[0].width();
  for (const auto& f : frames)
    if (f.height() != h || f.width() != w)
      throw DataError("save_stack: inconsistent frame sizes");

  const bool complex_channels = kind != "hologram";
  std::vector<float> buf;
  buf.reserve(frames.size() * static_cast<std::size_t>(h) * w *
              (complex_channels ? 2 : 1));
  for (const auto& f : frames)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        buf.push_back(static_cast<float>(f.at(r, c).real()));
        if (complex_channels)
          buf.push_back(static_cast<float>(f.at(r, c).imag()));
      }
  write_floats(data_path_for(sidecar_path), buf);

  json j;
  j["frames"] = static_cast<int>(frames.size());
  j["height"] = h;
  j["width"] = w;
  j["pixel_pitch_um"] = frames[0].pixel_pitch_um();
  j["wavelength_um"] = cfg.wavelength_um;
  j["n_medium"] = cfg.n_medium;
  j["na"] = cfg.numerical_aperture;
  j["kind"] = kind;
  write_text(sidecar_path, j.dump(2) + "\n");
}

std::pair<std::vector<ComplexField2D>, StackMeta> load_stack(
    const std::string& sidecar_path) {
  const json j = read_json(sidecar_path);
  StackMeta meta;
  meta.frames = static_cast<int>(field_at(j, "frames"));
  meta.height = static_cast<int>(field_at(j, "height"));
  meta.width = static_cast<int>(field_at(j, "width"));
  meta.pixel_pitch_um = field_at(j, "pixel_pitch_um");
  meta.wavelength_um = field_at(j, "wavelength_um");
  meta.n_medium = field_at(j, "n_medium");
  meta.na = field_at(j, "na");
  if (!j.contains("kind")) throw DataError("sidecar missing field kind");
  meta.kind = j.at("kind").get<std::string>();
  if (meta.kind != "psi" && meta.kind != "object" && meta.kind != "hologram")
    throw DataError(sidecar_path + ": unknown kind " + meta.kind);
  if (meta.frames < 1 || meta.height < 1 || meta.width < 1)
    throw DataError(sidecar_path + ": invalid dimensions");

  const bool complex_channels = meta.kind != "hologram";
  const std::size_t per_px = complex_channels ? 2 : 1;
  const std::vector<float> raw =
      read_floats(data_path_for(sidecar_path),
                  static_cast<std::size_t>(meta.frames) * meta.height *
                      meta.width * per_px);

  const int ph = next_pow2(meta.height), pw = next_pow2(meta.width);
  std::vector<ComplexField2D> frames;
  frames.reserve(meta.frames);
  std::size_t idx = 0;
  for (int f = 0; f < meta.frames; ++f) {
    ComplexField2D field(ph, pw, meta.pixel_pitch_um, Domain::RealSpace);
    double fill = 0.0;
    if (meta.kind == "object") fill = 1.0;
    if (meta.kind == "hologram") {
      double sum = 0.0;
      const std::size_t base = idx;
      for (int i = 0; i < meta.height * meta.width; ++i) sum += raw[base + i];
      fill = sum / (meta.height * meta.width);
    }
    for (int r = 0; r < ph; ++r)
      for (int c = 0; c < pw; ++c) field.at(r, c) = fill;
    const int r0 = (ph - meta.height) / 2, c0 = (pw - meta.width) / 2;
    for (int r = 0; r < meta.height; ++r)
      for (int c = 0; c < meta.width; ++c) {
        const double re = raw[idx++];
        const double im = complex_channels ? raw[idx++] : 0.0;
        field.at(r0 + r, c0 + c) = {re, im};
      }
    frames.push_back(std::move(field));
  }
  return {std::move(frames), std::move(meta)};
}

void save_volume(const std::string& sidecar_path, const Volume3D& vol,
                 const std::string& channel) {
  if (channel != "ri" && channel != "potential_re" && channel != "potential_im")
    throw DataError("save_volume: unknown channel " + channel);
  const bool imag = channel == "potential_im";
  std::vector<float> buf;
  buf.reserve(vol.size());
  for (std::size_t i = 0; i < vol.size(); ++i)
    buf.push_back(static_cast<float>(imag ? vol.data()[i].imag()
                                          : vol.data()[i].real()));
  write_floats(data_path_for(sidecar_path), buf);

  nlohmann::json j;
  j["n"] = vol.n();
  j["voxel_pitch_um"] = vol.voxel_pitch_um();
  j["channel"] = channel;
  write_text(sidecar_path, j.dump(2) + "\n");
}

std::pair<Volume3D, std::string> load_volume(const std::string& sidecar_path) {
  const nlohmann::json j = read_json(sidecar_path);
  const int n = static_cast<int>(field_at(j, "n"));
  const double pitch = field_at(j, "voxel_pitch_um");
  if (!j.contains("channel")) throw DataError("sidecar missing field channel");
  const std::string channel = j.at("channel").get<std::string>();
  Volume3D vol(n, pitch);
  const std::vector<float> raw =
      read_floats(data_path_for(sidecar_path), vol.size());
  for (std::size_t i = 0; i < vol.size(); ++i) vol.data()[i] = raw[i];
  return {std::move(vol), channel};
}

void save_poses(const std::string& path, const std::vector<Pose>& poses) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const auto& q = poses[i].rotation.quat();
    nlohmann::json e;
    e["frame"] = static_cast<int>(i);
    e["quat"] = {q.w(), q.x(), q.y(), q.z()};
    e["t_um"] = {poses[i].translation_um.x(), poses[i].translation_um.y()};
    arr.push_back(std::move(e));
  }
  write_text(path, arr.dump(2) + "\n");
}

std::vector<Pose> load_poses(const std::string& path) {
  const nlohmann::json arr = read_json(path);
  if (!arr.is_array()) throw DataError(path + ": expected a JSON array");
  std::vector<Pose> poses(arr.size());
  for (const auto& e : arr) {
    const int frame = e.at("frame").get<int>();
    if (frame < 0 || frame >= static_cast<int>(poses.size()))
      throw DataError(path + ": frame index out of range");
    const auto& q = e.at("quat");
    const auto& t = e.at("t_um");
    if (q.size() != 4 || t.size() != 2)
      throw DataError(path + ": quat must have 4 entries and t_um 2");
    poses[frame].rotation = Rotation(q[0].get<double>(), q[1].get<double>(),
                                     q[2].get<double>(), q[3].get<double>());
    poses[frame].translation_um = {t[0].get<double>(), t[1].get<double>()};
  }
  return poses;
}

std::string pose_dump_line(int epoch, int frame, const Pose& pose,
                           double score) {
  nlohmann::json e;
  e["epoch"] = epoch;
  e["frame"] = frame;
  const auto& q = pose.rotation.quat();
  e["quat"] = {q.w(), q.x(), q.y(), q.z()};
  e["t_um"] = {pose.translation_um.x(), pose.translation_um.y()};
  e["score"] = score;
  return e.dump();
}

}  // namespace omnifht::io
