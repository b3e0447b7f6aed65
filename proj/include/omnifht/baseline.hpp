#pragma once

#include <vector>

#include "omnifht/field.hpp"
#include "omnifht/forward_model.hpp"
#include "omnifht/geometry.hpp"
#include "omnifht/volume.hpp"

namespace omnifht {

// The conventional comparison pipeline: assume the acquisition was a uniform
// single-axis rotation, scatter every frame's Ewald-sphere samples into a
// frequency grid, invert, and convert to refractive index. No pose search,
// no regularization.

// Frame i gets roll = i * total_deg / n_frames about the transverse y axis
// (the flow-rotation axis), zero translation.
std::vector<Pose> uniform_single_axis_poses(int n_frames, double total_deg);

// Weight-normalized trilinear gridding of the measured spectra. Returns the
// complex scattering potential on an n_grid^3 volume; bins no frame touches
// stay zero. Accepts real-space or fourier-space frames.
Volume3D grid_invert_potential(const std::vector<ComplexField2D>& psi_stack,
                               const std::vector<Pose>& poses, int n_grid,
                               const OpticsConfig& cfg);

// grid_invert_potential followed by the potential-to-RI conversion on the
// real part; the baseline's end product.
Volume3D grid_invert(const std::vector<ComplexField2D>& psi_stack,
                     const std::vector<Pose>& poses, int n_grid,
                     const OpticsConfig& cfg);

}  // namespace omnifht
