#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icelut/image.hpp"
#include "icelut/model.hpp"

namespace icelut::synth {

// Smooth random content: a seeded grid_size^2 byte lattice bilinearly
// upsampled to size x size. grid_size 8 gives soft blob structure.
imaging::ImageU8 smooth_noise(std::uint64_t seed, int size, int grid_size = 8);

// Fixed analytic color maps, selected by name:
//   gamma:<g>      per-channel power curve on normalized values
//   channel-mix    mild fixed 3x3 channel mixing matrix (rows sum to 1)
//   channel-swap   (r,g,b) -> (g,b,r)
//   warm-tone      fixed warm color cast (red up, blue down)
//   adaptive-gamma power curve whose exponent depends on the image's
//                  mean luma (content-dependent, not a fixed pixel map)
// Composites chain left to right with '+': "gamma:0.8+channel-mix".
imaging::ImageU8 apply_transform(const std::string& name,
                                 const imaging::ImageU8& input);

bool is_known_transform(const std::string& name);

// count input/target pairs of size x size smooth-noise images; the seed
// fixes every pixel of the dataset.
std::vector<model::ImagePair> make_dataset(std::uint64_t seed, int count,
                                           int size,
                                           const std::string& transform);

}  // namespace icelut::synth
