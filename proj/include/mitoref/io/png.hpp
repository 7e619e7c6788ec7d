#pragma once

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <string>
#include <vector>

#include "mitoref/image.hpp"

namespace mitoref::io {

namespace detail {

struct PngRead {
    std::FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngRead() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

struct PngWrite {
    std::FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWrite() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

// The setjmp frames below hold no locals with destructors; buffers live in
// the caller and are only resized through pointers, which longjmp leaves
// intact.
inline bool read_png_core(PngRead& st, ImageRGB8* out, std::vector<png_bytep>* rows) {
    if (setjmp(png_jmpbuf(st.png))) return false;
    png_init_io(st.png, st.fp);
    png_read_info(st.png, st.info);

    png_uint_32 w = png_get_image_width(st.png, st.info);
    png_uint_32 h = png_get_image_height(st.png, st.info);
    int bit_depth = png_get_bit_depth(st.png, st.info);
    int color_type = png_get_color_type(st.png, st.info);

    if (bit_depth == 16) png_set_strip_16(st.png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(st.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
        png_set_expand_gray_1_2_4_to_8(st.png);
    if (png_get_valid(st.png, st.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(st.png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(st.png);
    png_set_strip_alpha(st.png);
    png_read_update_info(st.png, st.info);

    if (png_get_rowbytes(st.png, st.info) != static_cast<std::size_t>(w) * 3) return false;

    out->width = static_cast<int>(w);
    out->height = static_cast<int>(h);
    out->pixels.resize(static_cast<std::size_t>(w) * h * 3);
    rows->resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        (*rows)[y] = out->pixels.data() + static_cast<std::size_t>(y) * w * 3;

    png_read_image(st.png, rows->data());
    png_read_end(st.png, nullptr);
    return true;
}

inline bool write_png_core(PngWrite& st, const ImageRGB8* img, std::vector<png_bytep>* rows) {
    if (setjmp(png_jmpbuf(st.png))) return false;
    png_init_io(st.png, st.fp);
    png_set_IHDR(st.png, st.info, img->width, img->height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(st.png, st.info);
    rows->resize(img->height);
    for (int y = 0; y < img->height; ++y)
        (*rows)[y] = const_cast<png_bytep>(img->pixels.data()) +
                     static_cast<std::size_t>(y) * img->width * 3;
    png_write_image(st.png, rows->data());
    png_write_end(st.png, nullptr);
    return true;
}

}  // namespace detail

/// Read an 8-bit RGB PNG. Grayscale, palette, 16-bit, and alpha inputs are
/// converted to RGB8.
inline ImageRGB8 read_png(const std::string& path) {
    detail::PngRead st;
    st.fp = std::fopen(path.c_str(), "rb");
    if (!st.fp) throw IoError("cannot open " + path);
    st.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (st.png) st.info = png_create_info_struct(st.png);
    if (!st.png || !st.info) throw IoError("libpng allocation failed");

    ImageRGB8 out;
    std::vector<png_bytep> rows;
    if (!detail::read_png_core(st, &out, &rows))
        throw IoError("failed to decode PNG " + path);
    return out;
}

inline void write_png(const ImageRGB8& img, const std::string& path) {
    check_image(img);
    detail::PngWrite st;
    st.fp = std::fopen(path.c_str(), "wb");
    if (!st.fp) throw IoError("cannot open " + path + " for writing");
    st.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (st.png) st.info = png_create_info_struct(st.png);
    if (!st.png || !st.info) throw IoError("libpng allocation failed");

    std::vector<png_bytep> rows;
    if (!detail::write_png_core(st, &img, &rows))
        throw IoError("failed to encode PNG " + path);
}

}  // namespace mitoref::io
