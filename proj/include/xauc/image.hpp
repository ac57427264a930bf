#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace xauc {

// Row-major real-valued image, values in [0,1]; channels interleaved.
struct ImageBuffer {
    int height = 0;
    int width = 0;
    int channels = 1;  // 1 or 3
    std::vector<double> data;

    double& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    static ImageBuffer filled(int height, int width, int channels, double value);
};

struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;  // values in {0,1}

    std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t popcount() const;
};

struct SoftMask {
    int height = 0;
    int width = 0;
    std::vector<double> data;  // values in [0,1]

    double& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    double at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

// Standard 68-point facial layout, pixel coordinates.
struct LandmarkSet {
    std::array<std::array<double, 2>, 68> points{};  // [k] = {x, y}
};

// --- PPM (P6) / PGM (P5) I/O, 8-bit, the only image formats supported ---

ImageBuffer load_ppm(const std::string& path);
void save_ppm(const std::string& path, const ImageBuffer& image);

// Grayscale loads with values mapped to [0,1]; binary masks use {0,255}.
SoftMask load_pgm(const std::string& path);
void save_pgm(const std::string& path, const SoftMask& mask);
void save_pgm(const std::string& path, const BinaryMask& mask);

BinaryMask threshold_mask(const SoftMask& soft, double threshold = 0.5);

// Landmarks as a JSON array of 68 [x, y] pairs. Points outside the given
// image bounds are clamped onto the frame; *clamped reports whether any were.
LandmarkSet load_landmarks(const std::string& path, int height, int width,
                           bool* clamped = nullptr);
LandmarkSet parse_landmarks(const std::string& json_text, int height, int width,
                            bool* clamped = nullptr);
std::string serialize_landmarks(const LandmarkSet& landmarks);

}  // namespace xauc
