#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fsdd {

// Half-open pixel box: x1 <= x < x2, y1 <= y < y2.
struct BoxI {
    int x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    int width() const { return x2 - x1; }
    int height() const { return y2 - y1; }
    int64_t area() const { return static_cast<int64_t>(width()) * height(); }
    bool operator==(const BoxI&) const = default;
};

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;  // row-major

    GrayImage() = default;
    GrayImage(int w, int h, uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

    uint8_t at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
    uint8_t& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    bool operator==(const GrayImage&) const = default;
};

// Binary PGM (P5), maxval 255.
void write_pgm(const std::string& path, const GrayImage& img);
GrayImage read_pgm(const std::string& path);

GrayImage hmirror_pixels(const GrayImage& img);
GrayImage vmirror_pixels(const GrayImage& img);
GrayImage rot180_pixels(const GrayImage& img);

}  // namespace fsdd
