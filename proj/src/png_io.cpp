#include <png.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "poisonforge/datakit.hpp"
#include "poisonforge/errors.hpp"

namespace poisonforge::datakit {

ImageTensor read_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("cannot open image: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("unreadable image: " + path);
    }

    png_init_io(png, fp);
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);

    // normalize to 8-bit gray or RGB
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("unsupported channel count in " + path);
    }

    std::vector<png_byte> buffer(static_cast<std::size_t>(height) * width * channels);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 y = 0; y < height; ++y)
        rows[y] = buffer.data() + static_cast<std::size_t>(y) * width * channels;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);

    ImageTensor img({channels, static_cast<int>(height), static_cast<int>(width)});
    for (png_uint_32 y = 0; y < height; ++y)
        for (png_uint_32 x = 0; x < width; ++x)
            for (int c = 0; c < channels; ++c)
                img.data()[(static_cast<std::size_t>(c) * height + y) * width + x] =
                    buffer[(static_cast<std::size_t>(y) * width + x) * channels + c] / 255.0f;
    return img;
}

void write_png(const std::string& path, const ImageTensor& image) {
    if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3))
        throw IoError("write_png expects a (C, H, W) image with 1 or 3 channels");
    const int channels = image.dim(0), height = image.dim(1), width = image.dim(2);

    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("cannot write image: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("png write failed: " + path);
    }

    png_init_io(png, fp);
    png_set_IHDR(png, info, width, height, 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_byte> row(static_cast<std::size_t>(width) * channels);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < channels; ++c) {
                const float v = image.data()[(static_cast<std::size_t>(c) * height + y) * width + x];
                const float clamped = std::min(std::max(v, 0.0f), 1.0f);
                row[static_cast<std::size_t>(x) * channels + c] =
                    static_cast<png_byte>(std::lround(clamped * 255.0f));
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

} // namespace poisonforge::datakit
