#pragma once

#include <string>
#include <vector>

#include "icelut/image.hpp"

namespace icelut::imaging {

// Reads a PNG (8-bit RGB or RGBA, alpha dropped with a warning) or a
// binary PPM (P6, maxval 255). 16-bit sources are rejected as
// UnsupportedFormat. Warnings, if any, are appended to *warnings.
ImageU8 load_image(const std::string& path,
                   std::vector<std::string>* warnings = nullptr);

// Format chosen by extension: .png or .ppm. Round-trips byte-identically
// through either format.
void save_image(const ImageU8& img, const std::string& path);

}  // namespace icelut::imaging
