#ifndef HSSNB_PPM_HPP
#define HSSNB_PPM_HPP

// Classification-map export as binary PPM (P6, maxval 255) with a fixed
// 17-entry palette: index 0 (unlabeled) is black, classes 1..16 get
// distinct colors. Class indices above 16 wrap around the non-black part.

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "hssnb/dataset.hpp"
#include "hssnb/errors.hpp"

namespace hssnb {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
};

inline constexpr std::array<Rgb, 17> kClassPalette = {{
    {0, 0, 0},        // 0: unlabeled
    {230, 25, 75},    // 1
    {60, 180, 75},    // 2
    {255, 225, 25},   // 3
    {0, 130, 200},    // 4
    {245, 130, 48},   // 5
    {145, 30, 180},   // 6
    {70, 240, 240},   // 7
    {240, 50, 230},   // 8
    {210, 245, 60},   // 9
    {250, 190, 212},  // 10
    {0, 128, 128},    // 11
    {220, 190, 255},  // 12
    {170, 110, 40},   // 13
    {255, 250, 200},  // 14
    {128, 0, 0},      // 15
    {170, 255, 195},  // 16
}};

inline Rgb class_color(std::size_t label) {
    if (label == 0) return kClassPalette[0];
    return kClassPalette[1 + (label - 1) % 16];
}

inline void write_ppm(const std::string& path, std::size_t width, std::size_t height,
                      const std::vector<Rgb>& pixels) {
    if (pixels.size() != width * height)
        throw ParamError("write_ppm: pixel buffer does not match dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write image: " + path);
    out << "P6\n" << width << " " << height << "\n255\n";
    for (const auto& p : pixels) {
        const char b[3] = {char(p.r), char(p.g), char(p.b)};
        out.write(b, 3);
    }
    if (!out) throw DataError("failed writing image: " + path);
}

// Renders a label grid (0 = unlabeled = black) to a PPM file.
inline void write_label_map(const std::string& path, const LabelMap& labels) {
    std::vector<Rgb> pixels(labels.width * labels.height);
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = class_color(labels.labels[i]);
    write_ppm(path, labels.width, labels.height, pixels);
}

}  // namespace hssnb

#endif  // HSSNB_PPM_HPP
