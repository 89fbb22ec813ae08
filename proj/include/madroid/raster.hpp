#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace madroid {

// Interleaved 8-bit raster; channels is 1 (gray), 2 (gray+alpha),
// 3 (RGB) or 4 (RGBA).
struct Raster {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    static Raster make(int w, int h, int c, std::uint8_t fill = 0);
    std::uint8_t at(int x, int y, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t& at(int x, int y, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    bool empty() const { return width == 0 || height == 0; }
    bool operator==(const Raster&) const = default;
};

// True when the buffer carries a recognizable raster magic number
// (PNG, JPEG, GIF, BMP, WebP, PNM). Recognition is wider than decoding.
bool sniff_image(std::span<const std::uint8_t> bytes);

// Decodes PNG (8-bit gray/RGB/RGBA/gray+alpha, non-interlaced) and binary
// PNM (P5/P6). Throws InputError for anything else.
Raster decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const Raster& image);
std::vector<std::uint8_t> encode_pnm(const Raster& image);

Raster to_gray(const Raster& image);
Raster resize_bilinear(const Raster& image, int new_width, int new_height);

// Draws `overlay` onto `base` at (x, y) with source-over alpha blending.
// Overlay pixels outside the base are clipped.
void alpha_composite(Raster& base, const Raster& overlay, int x, int y);

}  // namespace madroid
