#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "icelut/image.hpp"
#include "icelut/model.hpp"

// Internals shared between the forward pass, the backward pass and the
// table baker. Not part of the public surface.
namespace icelut::model::detail {

// Pixel-major multi-channel buffer: values[p*channels + c].
struct Plane {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> values;

  std::size_t pixels() const {
    return static_cast<std::size_t>(width) * height;
  }
  const double* at(std::size_t p) const { return values.data() + p * channels; }
  double* at(std::size_t p) { return values.data() + p * channels; }
};

Plane plane_from_nibbles(std::span<const std::uint8_t> nibbles, int w, int h);
Plane plane_from_bytes(const imaging::ImageU8& img);

// Post-activation outputs of every layer, pixel-major; the last entry is
// the branch output (no ReLU).
struct BranchStash {
  std::vector<Plane> acts;
};

// Runs the branch over a whole plane. Counts pixels() network evaluations.
Plane branch_forward_plane(const PointwiseBranch& branch, const Plane& input,
                           BranchStash* stash);

// Backward pass for a branch whose pooled output feeds the head: the
// upstream gradient is identical for every pixel (d loss / d pooled,
// already divided by the pixel count). Accumulates into grads.
void branch_backward_plane(const PointwiseBranch& branch, const Plane& input,
                           const BranchStash& stash,
                           std::span<const double> upstream_per_pixel,
                           BranchGradients& grads);

// Cell decomposition of a byte triple against an M-lattice.
struct Cell {
  int i0, j0, k0;
  int i1, j1, k1;
  double fr, fg, fb;
};

inline Cell cell_of(int bins, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const double last = bins - 1;
  Cell cell;
  auto split = [&](std::uint8_t v, int& lo, int& hi, double& f) {
    const double s = v * last / 255.0;
    int i = static_cast<int>(s);
    if (i > bins - 2) i = bins - 2;
    lo = i;
    hi = i + 1;
    f = s - i;
  };
  split(r, cell.i0, cell.i1, cell.fr);
  split(g, cell.j0, cell.j1, cell.fg);
  split(b, cell.k0, cell.k1, cell.fb);
  return cell;
}

// The eight trilinear weights of a cell, corner order
// (000,001,010,011,100,101,110,111) over (r,g,b) axes.
inline void corner_weights(const Cell& c, double w[8]) {
  const double r0 = 1.0 - c.fr, g0 = 1.0 - c.fg, b0 = 1.0 - c.fb;
  const double r0g0 = r0 * g0, r0g1 = r0 * c.fg;
  const double r1g0 = c.fr * g0, r1g1 = c.fr * c.fg;
  w[0] = r0g0 * b0;
  w[1] = r0g0 * c.fb;
  w[2] = r0g1 * b0;
  w[3] = r0g1 * c.fb;
  w[4] = r1g0 * b0;
  w[5] = r1g0 * c.fb;
  w[6] = r1g1 * b0;
  w[7] = r1g1 * c.fb;
}

// Flat value offsets (into a bins^3 x 3 array) of the cell's corners, in
// the same order as corner_weights.
inline void corner_offsets(const Cell& c, int bins, std::size_t out[8]) {
  const std::size_t M = static_cast<std::size_t>(bins);
  auto at = [&](int i, int j, int k) {
    return ((static_cast<std::size_t>(i) * M + j) * M + k) * 3;
  };
  out[0] = at(c.i0, c.j0, c.k0);
  out[1] = at(c.i0, c.j0, c.k1);
  out[2] = at(c.i0, c.j1, c.k0);
  out[3] = at(c.i0, c.j1, c.k1);
  out[4] = at(c.i1, c.j0, c.k0);
  out[5] = at(c.i1, c.j0, c.k1);
  out[6] = at(c.i1, c.j1, c.k0);
  out[7] = at(c.i1, c.j1, c.k1);
}

}  // namespace icelut::model::detail
