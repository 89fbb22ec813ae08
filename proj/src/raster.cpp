#include "madroid/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <zlib.h>

#include "madroid/errors.hpp"

namespace madroid {

Raster Raster::make(int w, int h, int c, std::uint8_t fill) {
    Raster r;
    r.width = w;
    r.height = h;
    r.channels = c;
    r.pixels.assign(static_cast<std::size_t>(w) * h * c, fill);
    return r;
}

namespace {

constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

std::uint32_t read_u32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

void write_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> zlib_inflate(std::span<const std::uint8_t> in, std::size_t expected) {
    std::vector<std::uint8_t> out(expected);
    uLongf out_len = out.size();
    int rc = uncompress(out.data(), &out_len, in.data(), in.size());
    if (rc != Z_OK || out_len != expected) throw InputError("PNG: corrupt compressed stream");
    return out;
}

std::vector<std::uint8_t> zlib_deflate(std::span<const std::uint8_t> in) {
    uLongf bound = compressBound(in.size());
    std::vector<std::uint8_t> out(bound);
    int rc = compress2(out.data(), &bound, in.data(), in.size(), Z_BEST_SPEED);
    if (rc != Z_OK) throw Error("PNG: compression failed");
    out.resize(bound);
    return out;
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

Raster decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngMagic, 8) != 0)
        throw InputError("not a PNG");

    int width = 0, height = 0, channels = 0;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    bool saw_ihdr = false;
    while (pos + 8 <= bytes.size()) {
        std::uint32_t length = read_u32(&bytes[pos]);
        if (pos + 12 + length > bytes.size()) throw InputError("PNG: truncated chunk");
        std::string type(reinterpret_cast<const char*>(&bytes[pos + 4]), 4);
        const std::uint8_t* data = &bytes[pos + 8];
        if (type == "IHDR") {
            if (length != 13) throw InputError("PNG: bad IHDR");
            width = static_cast<int>(read_u32(data));
            height = static_cast<int>(read_u32(data + 4));
            int bit_depth = data[8];
            int color_type = data[9];
            int interlace = data[12];
            if (bit_depth != 8) throw InputError("PNG: only 8-bit depth supported");
            if (interlace != 0) throw InputError("PNG: interlaced images not supported");
            switch (color_type) {
                case 0: channels = 1; break;
                case 2: channels = 3; break;
                case 4: channels = 2; break;
                case 6: channels = 4; break;
                default: throw InputError("PNG: palette images not supported");
            }
            if (width <= 0 || height <= 0) throw InputError("PNG: bad dimensions");
            saw_ihdr = true;
        } else if (type == "IDAT") {
            idat.insert(idat.end(), data, data + length);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + length;
    }
    if (!saw_ihdr || idat.empty()) throw InputError("PNG: missing IHDR or IDAT");

    const std::size_t stride = static_cast<std::size_t>(width) * channels;
    std::vector<std::uint8_t> raw =
        zlib_inflate(idat, (stride + 1) * static_cast<std::size_t>(height));

    Raster image = Raster::make(width, height, channels);
    std::vector<std::uint8_t> prev(stride, 0);
    for (int y = 0; y < height; ++y) {
        const std::uint8_t* src = &raw[static_cast<std::size_t>(y) * (stride + 1)];
        std::uint8_t filter = src[0];
        std::uint8_t* dst = &image.pixels[static_cast<std::size_t>(y) * stride];
        for (std::size_t i = 0; i < stride; ++i) {
            int x = src[1 + i];
            int a = i >= static_cast<std::size_t>(channels) ? dst[i - channels] : 0;
            int b = prev[i];
            int c = i >= static_cast<std::size_t>(channels) ? prev[i - channels] : 0;
            int value;
            switch (filter) {
                case 0: value = x; break;
                case 1: value = x + a; break;
                case 2: value = x + b; break;
                case 3: value = x + (a + b) / 2; break;
                case 4: value = x + paeth(a, b, c); break;
                default: throw InputError("PNG: unknown filter type");
            }
            dst[i] = static_cast<std::uint8_t>(value & 0xFF);
        }
        std::memcpy(prev.data(), dst, stride);
    }
    return image;
}

std::uint32_t crc32_of(std::string_view type, std::span<const std::uint8_t> data) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(type.data()), type.size());
    crc = crc32(crc, data.data(), data.size());
    return static_cast<std::uint32_t>(crc);
}

void append_chunk(std::vector<std::uint8_t>& out, std::string_view type,
                  std::span<const std::uint8_t> data) {
    write_u32(out, static_cast<std::uint32_t>(data.size()));
    out.insert(out.end(), type.begin(), type.end());
    out.insert(out.end(), data.begin(), data.end());
    write_u32(out, crc32_of(type, data));
}

Raster decode_pnm(std::span<const std::uint8_t> bytes) {
    // Binary P5/P6 with single whitespace separators.
    std::size_t pos = 2;
    int channels = bytes[1] == '5' ? 1 : 3;
    auto skip_space = [&] {
        while (pos < bytes.size() &&
               (bytes[pos] == ' ' || bytes[pos] == '\n' || bytes[pos] == '\t' ||
                bytes[pos] == '\r')) {
            ++pos;
            if (pos < bytes.size() && bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            }
        }
    };
    auto read_int = [&] {
        skip_space();
        long value = 0;
        bool any = false;
        while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
            value = value * 10 + (bytes[pos] - '0');
            ++pos;
            any = true;
        }
        if (!any) throw InputError("PNM: malformed header");
        return value;
    };
    long width = read_int(), height = read_int(), maxval = read_int();
    if (width <= 0 || height <= 0 || maxval != 255) throw InputError("PNM: unsupported header");
    ++pos;  // single whitespace after maxval
    std::size_t need = static_cast<std::size_t>(width) * height * channels;
    if (bytes.size() < pos + need) throw InputError("PNM: truncated payload");
    Raster image = Raster::make(static_cast<int>(width), static_cast<int>(height), channels);
    std::memcpy(image.pixels.data(), &bytes[pos], need);
    return image;
}

}  // namespace

bool sniff_image(std::span<const std::uint8_t> bytes) {
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngMagic, 8) == 0) return true;
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return true;
    if (bytes.size() >= 6 && std::memcmp(bytes.data(), "GIF87a", 6) == 0) return true;
    if (bytes.size() >= 6 && std::memcmp(bytes.data(), "GIF89a", 6) == 0) return true;
    if (bytes.size() >= 2 && bytes[0] == 'B' && bytes[1] == 'M') return true;
    if (bytes.size() >= 12 && std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
        std::memcmp(bytes.data() + 8, "WEBP", 4) == 0)
        return true;
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) return true;
    return false;
}

Raster decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngMagic, 8) == 0)
        return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6'))
        return decode_pnm(bytes);
    throw InputError("unsupported raster format (PNG and binary PNM are decodable)");
}

std::vector<std::uint8_t> encode_png(const Raster& image) {
    if (image.empty()) throw InputError("cannot encode empty raster");
    int color_type;
    switch (image.channels) {
        case 1: color_type = 0; break;
        case 2: color_type = 4; break;
        case 3: color_type = 2; break;
        case 4: color_type = 6; break;
        default: throw InputError("unsupported channel count");
    }
    std::vector<std::uint8_t> out(kPngMagic, kPngMagic + 8);

    std::vector<std::uint8_t> ihdr;
    write_u32(ihdr, static_cast<std::uint32_t>(image.width));
    write_u32(ihdr, static_cast<std::uint32_t>(image.height));
    ihdr.push_back(8);
    ihdr.push_back(static_cast<std::uint8_t>(color_type));
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    append_chunk(out, "IHDR", ihdr);

    const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * image.height);
    for (int y = 0; y < image.height; ++y) {
        raw.push_back(0);  // filter: none
        const std::uint8_t* row = &image.pixels[static_cast<std::size_t>(y) * stride];
        raw.insert(raw.end(), row, row + stride);
    }
    append_chunk(out, "IDAT", zlib_deflate(raw));
    append_chunk(out, "IEND", {});
    return out;
}

std::vector<std::uint8_t> encode_pnm(const Raster& image) {
    Raster src = image;
    if (image.channels == 2 || image.channels == 4) {
        // drop alpha
        int c = image.channels == 2 ? 1 : 3;
        src = Raster::make(image.width, image.height, c);
        for (int y = 0; y < image.height; ++y)
            for (int x = 0; x < image.width; ++x)
                for (int k = 0; k < c; ++k) src.at(x, y, k) = image.at(x, y, k);
    }
    std::string header = (src.channels == 1 ? std::string("P5 ") : std::string("P6 ")) +
                         std::to_string(src.width) + " " + std::to_string(src.height) + " 255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), src.pixels.begin(), src.pixels.end());
    return out;
}

Raster to_gray(const Raster& image) {
    if (image.channels == 1) return image;
    Raster gray = Raster::make(image.width, image.height, 1);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            if (image.channels == 2) {
                gray.at(x, y, 0) = image.at(x, y, 0);
            } else {
                // integer Rec.601 luma
                int r = image.at(x, y, 0), g = image.at(x, y, 1), b = image.at(x, y, 2);
                gray.at(x, y, 0) = static_cast<std::uint8_t>((r * 77 + g * 150 + b * 29) >> 8);
            }
        }
    }
    return gray;
}

Raster resize_bilinear(const Raster& image, int new_width, int new_height) {
    if (new_width <= 0 || new_height <= 0) throw InputError("resize target must be positive");
    if (new_width == image.width && new_height == image.height) return image;
    Raster out = Raster::make(new_width, new_height, image.channels);
    const double sx = static_cast<double>(image.width) / new_width;
    const double sy = static_cast<double>(image.height) / new_height;
    for (int y = 0; y < new_height; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y1 = std::min(y0 + 1, image.height - 1);
        y0 = std::clamp(y0, 0, image.height - 1);
        for (int x = 0; x < new_width; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int x1 = std::min(x0 + 1, image.width - 1);
            x0 = std::clamp(x0, 0, image.width - 1);
            for (int c = 0; c < image.channels; ++c) {
                double v = (1 - wy) * ((1 - wx) * image.at(x0, y0, c) + wx * image.at(x1, y0, c)) +
                           wy * ((1 - wx) * image.at(x0, y1, c) + wx * image.at(x1, y1, c));
                out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
            }
        }
    }
    return out;
}

void alpha_composite(Raster& base, const Raster& overlay, int ox, int oy) {
    const bool overlay_has_alpha = overlay.channels == 2 || overlay.channels == 4;
    const int overlay_color_channels = overlay.channels >= 3 ? 3 : 1;
    const int base_color_channels = base.channels >= 3 ? 3 : 1;
    for (int y = 0; y < overlay.height; ++y) {
        int by = oy + y;
        if (by < 0 || by >= base.height) continue;
        for (int x = 0; x < overlay.width; ++x) {
            int bx = ox + x;
            if (bx < 0 || bx >= base.width) continue;
            int alpha = overlay_has_alpha ? overlay.at(x, y, overlay.channels - 1) : 255;
            if (alpha == 0) continue;
            for (int c = 0; c < base_color_channels; ++c) {
                int oc = overlay_color_channels == 1 ? 0 : std::min(c, overlay_color_channels - 1);
                int src = overlay.at(x, y, oc);
                int dst = base.at(bx, by, c);
                base.at(bx, by, c) =
                    static_cast<std::uint8_t>((src * alpha + dst * (255 - alpha) + 127) / 255);
            }
        }
    }
}

}  // namespace madroid
