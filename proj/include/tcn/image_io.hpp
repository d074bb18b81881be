#pragma once

#include <string>
#include <vector>

#include "tcn/vaec.hpp"

namespace tcn {

// PNG export for dataset inspection. Values are clamped to [0, 1] and
// quantized to 8 bits.
void write_png(const std::string& path, const vaec::Image& img);
void write_png_gray(const std::string& path, const std::vector<float>& pixels, int height,
                    int width);

// Side-by-side strip of equally sized images.
vaec::Image hstack(const std::vector<vaec::Image>& images, int separator_px = 2);

}  // namespace tcn
