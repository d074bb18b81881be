#include "tcn/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cstring>

namespace tcn {

namespace {

unsigned char quantize(float v) {
  float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<unsigned char>(c * 255.0f + 0.5f);
}

void write_png_buffer(const std::string& path, const std::vector<unsigned char>& rgb_or_gray,
                      int height, int width, bool rgb) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = rgb ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  int ok = png_image_write_to_file(&img, path.c_str(), 0, rgb_or_gray.data(), 0, nullptr);
  check(ok != 0, "write_png: failed to write '" + path + "': " + img.message);
}

}  // namespace

void write_png(const std::string& path, const vaec::Image& img) {
  check(img.channels == 3 || img.channels == 1,
        "write_png: expected 1 or 3 channels, got " + std::to_string(img.channels));
  if (img.channels == 1) {
    write_png_gray(path, img.data, img.height, img.width);
    return;
  }
  std::vector<unsigned char> rgb(static_cast<size_t>(img.height) * img.width * 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        rgb[(static_cast<size_t>(y) * img.width + x) * 3 + static_cast<size_t>(c)] =
            quantize(img.at(c, y, x));
  write_png_buffer(path, rgb, img.height, img.width, true);
}

void write_png_gray(const std::string& path, const std::vector<float>& pixels, int height,
                    int width) {
  check(static_cast<int64_t>(pixels.size()) == static_cast<int64_t>(height) * width,
        "write_png_gray: pixel count does not match dimensions");
  std::vector<unsigned char> gray(pixels.size());
  for (size_t i = 0; i < pixels.size(); ++i) gray[i] = quantize(pixels[i]);
  write_png_buffer(path, gray, height, width, false);
}

vaec::Image hstack(const std::vector<vaec::Image>& images, int separator_px) {
  check(!images.empty(), "hstack: no images");
  int h = images[0].height, w = images[0].width, c = images[0].channels;
  for (const auto& img : images)
    check(img.height == h && img.width == w && img.channels == c,
          "hstack: images must share dimensions");
  int total_w = static_cast<int>(images.size()) * w +
                (static_cast<int>(images.size()) - 1) * separator_px;
  vaec::Image out;
  out.channels = c;
  out.height = h;
  out.width = total_w;
  out.data.assign(static_cast<size_t>(c) * h * total_w, 1.0f);
  for (size_t i = 0; i < images.size(); ++i) {
    int x0 = static_cast<int>(i) * (w + separator_px);
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          out.data[(static_cast<size_t>(ch) * h + y) * total_w + x0 + x] = images[i].at(ch, y, x);
  }
  return out;
}

}  // namespace tcn
