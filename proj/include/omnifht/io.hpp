#pragma once

#include <string>
#include <utility>
#include <vector>

#include "omnifht/field.hpp"
#include "omnifht/geometry.hpp"
#include "omnifht/volume.hpp"

namespace omnifht::io {

// Sidecar metadata for a projection stack. The binary payload lives next to
// the sidecar with extension .f32: little-endian float32, C-order
// [frame][row][col], interleaved (re,im) except kind "hologram" which is a
// single real channel.
struct StackMeta {
  int frames = 0, height = 0, width = 0;
  double pixel_pitch_um = 0.0, wavelength_um = 0.0, n_medium = 0.0, na = 0.0;
  std::string kind;  // "psi" | "object" | "hologram"
};

std::string data_path_for(const std::string& sidecar_path);

void save_stack(const std::string& sidecar_path,
                const std::vector<ComplexField2D>& frames,
                const OpticsConfig& cfg, const std::string& kind);

// Loads a stack; non-power-of-two frames are padded up on ingest (holograms
// with their mean value, object fields with 1, psi with 0).
std::pair<std::vector<ComplexField2D>, StackMeta> load_stack(
    const std::string& sidecar_path);

// Volume export: real float32 [z][y][x] of the named channel plus sidecar
// {"n":N,"voxel_pitch_um":v,"channel":"ri"|"potential_re"|"potential_im"}.
void save_volume(const std::string& sidecar_path, const Volume3D& vol,
                 const std::string& channel);
std::pair<Volume3D, std::string> load_volume(const std::string& sidecar_path);

void save_poses(const std::string& path, const std::vector<Pose>& poses);
std::vector<Pose> load_poses(const std::string& path);

// One pose-dump line: {"epoch":e,"frame":i,"quat":[w,x,y,z],"t_um":[x,y],"score":s}
std::string pose_dump_line(int epoch, int frame, const Pose& pose, double score);

}  // namespace omnifht::io
