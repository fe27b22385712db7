#include "iik/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace iik::io {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IoError("cannot open " + path);
    return f;
}

template <typename T>
void write_raw(std::FILE* f, const T* data, size_t count, const std::string& path) {
    if (std::fwrite(data, sizeof(T), count, f) != count) throw IoError("short write on " + path);
}

template <typename T>
void read_raw(std::FILE* f, T* data, size_t count, const std::string& path) {
    if (std::fread(data, sizeof(T), count, f) != count) throw IoError("short read on " + path);
}

struct RawHeader {
    char magic[4];
    uint32_t channels, height, width;
};

void write_header(std::FILE* f, const char* magic, const std::vector<int>& shape,
                  const std::string& path) {
    if (shape.size() != 3) throw ConfigError("raw tensor files hold CHW tensors");
    RawHeader h{};
    std::memcpy(h.magic, magic, 4);
    h.channels = static_cast<uint32_t>(shape[0]);
    h.height = static_cast<uint32_t>(shape[1]);
    h.width = static_cast<uint32_t>(shape[2]);
    write_raw(f, &h, 1, path);
}

std::vector<int> read_header(std::FILE* f, const char* magic, const std::string& path) {
    RawHeader h{};
    read_raw(f, &h, 1, path);
    if (std::memcmp(h.magic, magic, 4) != 0) throw IoError(path + ": bad magic, expected " + magic);
    return {static_cast<int>(h.channels), static_cast<int>(h.height), static_cast<int>(h.width)};
}

void png_error_fn(png_structp png, png_const_charp msg) {
    throw IoError(std::string("libpng: ") + msg);
    (void)png;
}

void png_warn_fn(png_structp, png_const_charp) {}

}  // namespace

Tensor read_png(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    png_byte sig[8];
    read_raw(f.get(), sig, 8, path);
    if (png_sig_cmp(sig, 0, 8) != 0) throw IoError(path + ": not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    try {
        png_init_io(png, f.get());
        png_set_sig_bytes(png, 8);
        png_read_info(png, info);

        png_set_expand(png);          // palette/low-bit gray -> full depth
        png_set_strip_alpha(png);
        png_set_gray_to_rgb(png);
        png_read_update_info(png, info);

        const int h = static_cast<int>(png_get_image_height(png, info));
        const int w = static_cast<int>(png_get_image_width(png, info));
        const int depth = png_get_bit_depth(png, info);
        const int channels = png_get_channels(png, info);
        if (channels != 3 || (depth != 8 && depth != 16))
            throw IoError(path + ": unsupported PNG layout after expansion");

        const size_t stride = static_cast<size_t>(w) * 3 * (depth / 8);
        std::vector<png_byte> rows(static_cast<size_t>(h) * stride);
        std::vector<png_bytep> row_ptrs(h);
        for (int y = 0; y < h; ++y) row_ptrs[y] = rows.data() + y * stride;
        png_read_image(png, row_ptrs.data());
        png_read_end(png, nullptr);
        png_destroy_read_struct(&png, &info, nullptr);

        Tensor out({3, h, w});
        const size_t plane = static_cast<size_t>(h) * w;
        if (depth == 8) {
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    for (int c = 0; c < 3; ++c)
                        out.data[c * plane + static_cast<size_t>(y) * w + x] =
                            rows[y * stride + (static_cast<size_t>(x) * 3 + c)] / 255.0;
        } else {
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    for (int c = 0; c < 3; ++c) {
                        const size_t off = y * stride + (static_cast<size_t>(x) * 3 + c) * 2;
                        const uint16_t v = static_cast<uint16_t>((rows[off] << 8) | rows[off + 1]);
                        out.data[c * plane + static_cast<size_t>(y) * w + x] = v / 65535.0;
                    }
        }
        return out;
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
}

void write_png(const std::string& path, const Tensor& img, int bit_depth) {
    if (img.rank() != 3 || (img.shape[0] != 3 && img.shape[0] != 1))
        throw ConfigError("write_png expects (3,H,W) or (1,H,W)");
    if (bit_depth != 8 && bit_depth != 16) throw ConfigError("write_png: bit depth must be 8 or 16");
    const int c = img.shape[0], h = img.shape[1], w = img.shape[2];
    const size_t plane = static_cast<size_t>(h) * w;

    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    try {
        png_init_io(png, f.get());
        png_set_IHDR(png, info, w, h, bit_depth,
                     c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);

        const double scale = bit_depth == 8 ? 255.0 : 65535.0;
        const size_t stride = static_cast<size_t>(w) * c * (bit_depth / 8);
        std::vector<png_byte> row(stride);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x)
                for (int ch = 0; ch < c; ++ch) {
                    const double v = std::clamp(img.data[ch * plane + static_cast<size_t>(y) * w + x], 0.0, 1.0);
                    const auto q = static_cast<uint32_t>(std::lround(v * scale));
                    if (bit_depth == 8) {
                        row[static_cast<size_t>(x) * c + ch] = static_cast<png_byte>(q);
                    } else {
                        row[(static_cast<size_t>(x) * c + ch) * 2] = static_cast<png_byte>(q >> 8);
                        row[(static_cast<size_t>(x) * c + ch) * 2 + 1] = static_cast<png_byte>(q & 0xff);
                    }
                }
            png_write_row(png, row.data());
        }
        png_write_end(png, info);
        png_destroy_write_struct(&png, &info);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
}

void write_iikf(const std::string& path, const Tensor32& t) {
    FilePtr f = open_file(path, "wb");
    write_header(f.get(), "IIKF", t.shape, path);
    write_raw(f.get(), t.ptr(), t.size(), path);
}

void write_iikf(const std::string& path, const Tensor& t) { write_iikf(path, t.cast<float>()); }

Tensor32 read_iikf32(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    Tensor32 t(read_header(f.get(), "IIKF", path));
    read_raw(f.get(), t.ptr(), t.size(), path);
    return t;
}

Tensor read_iikf(const std::string& path) { return read_iikf32(path).cast<double>(); }

void write_iikd(const std::string& path, const Tensor& t) {
    FilePtr f = open_file(path, "wb");
    write_header(f.get(), "IIKD", t.shape, path);
    write_raw(f.get(), t.ptr(), t.size(), path);
}

Tensor read_iikd(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    Tensor t(read_header(f.get(), "IIKD", path));
    read_raw(f.get(), t.ptr(), t.size(), path);
    return t;
}

Tensor read_field(const std::string& path) {
    std::array<unsigned char, 4> magic{};
    {
        FilePtr f = open_file(path, "rb");
        read_raw(f.get(), magic.data(), magic.size(), path);
    }
    if (std::memcmp(magic.data(), "IIKF", 4) == 0) return read_iikf(path);
    if (std::memcmp(magic.data(), "IIKD", 4) == 0) return read_iikd(path);
    if (magic[0] == 0x89 && magic[1] == 'P') return read_png(path);
    throw IoError(path + ": unrecognized field format");
}

}  // namespace iik::io
