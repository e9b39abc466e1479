#include "routecast/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "routecast/error.hpp"
#include "routecast/io.hpp"

namespace routecast {

ImagePlane::ImagePlane(int height, int width, int channels, float fill)
    : h_(height), w_(width), c_(channels), data_(static_cast<size_t>(height) * width * channels, fill)
{
    if (height <= 0 || width <= 0 || channels <= 0)
        throw ValidationError("image dims must be positive");
}

void ImagePlane::fill_rect(int y0, int x0, int h, int w, const float *rgb)
{
    for (int y = std::max(0, y0); y < std::min(h_, y0 + h); ++y)
        for (int x = std::max(0, x0); x < std::min(w_, x0 + w); ++x)
            for (int c = 0; c < c_; ++c)
                at(y, x, c) = rgb[c];
}

uint8_t to_byte(float v)
{
    const float s = std::clamp(v, 0.0f, 1.0f) * 255.0f;
    return static_cast<uint8_t>(std::lround(s));
}

namespace {

int color_type_for(int channels)
{
    switch (channels) {
    case 1:
        return PNG_COLOR_TYPE_GRAY;
    case 3:
        return PNG_COLOR_TYPE_RGB;
    case 4:
        return PNG_COLOR_TYPE_RGBA;
    default:
        throw ValidationError("png: unsupported channel count " + std::to_string(channels));
    }
}

void append_bytes(png_structp png, png_bytep data, png_size_t len)
{
    auto *out = static_cast<std::string *>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char *>(data), len);
}

void no_flush(png_structp) {}

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw IoError(std::string("png: ") + msg); }

} // namespace

std::string encode_png(const ImagePlane &img)
{
    const int color_type = color_type_for(img.channels());
    std::string out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, nullptr);
    if (!png)
        throw IoError("png: cannot create write struct");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp *p;
        png_infop *i;
        ~Guard() { png_destroy_write_struct(p, i); }
    } guard{&png, &info};

    png_set_write_fn(png, &out, append_bytes, no_flush);
    png_set_IHDR(png, info, img.width(), img.height(), 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<size_t>(img.width()) * img.channels());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < img.channels(); ++c)
                row[static_cast<size_t>(x) * img.channels() + c] = to_byte(img.at(y, x, c));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    return out;
}

void write_png(const std::string &path, const ImagePlane &img)
{
    write_file(path, encode_png(img));
}

ImagePlane read_png(const std::string &path)
{
    std::unique_ptr<FILE, int (*)(FILE *)> fp(std::fopen(path.c_str(), "rb"), std::fclose);
    if (!fp)
        throw IoError("cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, nullptr);
    if (!png)
        throw IoError("png: cannot create read struct");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp *p;
        png_infop *i;
        ~Guard() { png_destroy_read_struct(p, i, nullptr); }
    } guard{&png, &info};

    png_init_io(png, fp.get());
    png_read_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int depth = png_get_bit_depth(png, info);
    const int ct = png_get_color_type(png, info);
    if (depth != 8)
        throw IoError("png: only 8-bit images are supported: " + path);
    int channels;
    if (ct == PNG_COLOR_TYPE_GRAY)
        channels = 1;
    else if (ct == PNG_COLOR_TYPE_RGB)
        channels = 3;
    else if (ct == PNG_COLOR_TYPE_RGBA)
        channels = 4;
    else
        throw IoError("png: unsupported color type in " + path);

    ImagePlane img(h, w, channels);
    std::vector<png_byte> row(static_cast<size_t>(w) * channels);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                img.at(y, x, c) = row[static_cast<size_t>(x) * channels + c] / 255.0f;
    }
    png_read_end(png, nullptr);
    return img;
}

} // namespace routecast
