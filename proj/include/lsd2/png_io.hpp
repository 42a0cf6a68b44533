#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lsd2/error.hpp"
#include "lsd2/image.hpp"

namespace lsd2 {

namespace detail {

// All file writes go through a temp file + rename so a killed run never
// leaves a truncated file behind a manifest reference.
inline void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline void png_write_to_string(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(data), length);
}

inline void png_flush_noop(png_structp) {}

} // namespace detail

// Decode an 8/16-bit PNG (gray, palette, RGB or RGBA) to linear byte/255
// floats. No gamma handling here; the synthesis pipeline owns that.
inline Image read_png(const std::filesystem::path& path) {
    FILE* fp = std::fopen(path.string().c_str(), "rb");
    if (!fp) throw IoError("cannot open " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("failed to decode " + path.string());
    }

    png_init_io(png, fp);
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));

    std::vector<png_byte> row(static_cast<size_t>(width) * 3);
    Image img(width, height);
    for (int y = 0; y < height; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < 3; ++c) {
                img.at(x, y, c) = static_cast<float>(row[static_cast<size_t>(x) * 3 + c]) / 255.0f;
            }
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

// Encode to 8-bit RGB PNG, values clamped to [0,1] and rounded to byte/255.
// Written atomically.
inline void write_png(const std::filesystem::path& path, const Image& img) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failed");
    }
    std::string bytes;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed to encode " + path.string());
    }
    png_set_write_fn(png, &bytes, detail::png_write_to_string, detail::png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
                 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_byte> row(static_cast<size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const float v = std::min(std::max(img.at(x, y, c), 0.0f), 1.0f);
                row[static_cast<size_t>(x) * 3 + c] =
                    static_cast<png_byte>(std::lround(v * 255.0f));
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    detail::atomic_write(path, bytes);
}

constexpr char kRawF32Magic[8] = {'L', 'S', 'D', '2', 'R', 'A', 'W', 'F'};

// Lossless 32-bit planar float format for tests that must avoid PNG
// quantization: magic, u32 width/height/channels (little endian), then one
// row-major float32 plane per channel.
inline void write_rawf32(const std::filesystem::path& path, const Image& img) {
    std::string bytes;
    bytes.append(kRawF32Magic, sizeof(kRawF32Magic));
    auto put_u32 = [&bytes](uint32_t v) {
        char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
        bytes.append(b, 4);
    };
    put_u32(static_cast<uint32_t>(img.width));
    put_u32(static_cast<uint32_t>(img.height));
    put_u32(3);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                const float v = img.at(x, y, c);
                uint32_t u;
                std::memcpy(&u, &v, 4);
                put_u32(u);
            }
        }
    }
    detail::atomic_write(path, bytes);
}

inline Image read_rawf32(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kRawF32Magic, 8) != 0) {
        throw IoError(path.string() + ": not a raw-f32 file");
    }
    auto get_u32 = [&in, &path]() {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        if (!in) throw IoError(path.string() + ": truncated raw-f32 file");
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    };
    const uint32_t w = get_u32();
    const uint32_t h = get_u32();
    const uint32_t ch = get_u32();
    if (ch != 3) throw IoError(path.string() + ": expected 3 channels");
    Image img(static_cast<int>(w), static_cast<int>(h));
    for (uint32_t c = 0; c < 3; ++c) {
        for (uint32_t y = 0; y < h; ++y) {
            for (uint32_t x = 0; x < w; ++x) {
                const uint32_t u = get_u32();
                float v;
                std::memcpy(&v, &u, 4);
                img.at(static_cast<int>(x), static_cast<int>(y), static_cast<int>(c)) = v;
            }
        }
    }
    return img;
}

// Dispatch on extension; .f32 is the lossless escape hatch, everything else
// goes through PNG.
inline Image read_image(const std::filesystem::path& path) {
    if (path.extension() == ".f32") return read_rawf32(path);
    return read_png(path);
}

inline void write_image(const std::filesystem::path& path, const Image& img) {
    if (path.extension() == ".f32") {
        write_rawf32(path, img);
    } else {
        write_png(path, img);
    }
}

} // namespace lsd2
