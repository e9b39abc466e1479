#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace routecast {

// Float image, interleaved HWC, values in [0, 1].
class ImagePlane {
  public:
    ImagePlane() = default;
    ImagePlane(int height, int width, int channels, float fill = 0.0f);

    int height() const { return h_; }
    int width() const { return w_; }
    int channels() const { return c_; }
    size_t size() const { return data_.size(); }

    float &at(int y, int x, int c) { return data_[(static_cast<size_t>(y) * w_ + x) * c_ + c]; }
    float at(int y, int x, int c) const { return data_[(static_cast<size_t>(y) * w_ + x) * c_ + c]; }
    std::vector<float> &data() { return data_; }
    const std::vector<float> &data() const { return data_; }

    void fill_rect(int y0, int x0, int h, int w, const float *rgb);
    bool operator==(const ImagePlane &) const = default;

  private:
    int h_ = 0, w_ = 0, c_ = 0;
    std::vector<float> data_;
};

// 8-bit quantization used for PNG output: round(v * 255), clamped.
uint8_t to_byte(float v);

// Writes 1-channel images as grayscale and 3/4-channel as RGB/RGBA PNG.
// Throws IoError on failure.
void write_png(const std::string &path, const ImagePlane &img);
ImagePlane read_png(const std::string &path);

// In-memory encoding, identical bytes to what write_png puts on disk.
std::string encode_png(const ImagePlane &img);

} // namespace routecast
