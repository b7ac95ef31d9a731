#pragma once

#include "copresence/errors.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace copresence {

/// H×W×3 RGB image with channel values in [0, 1], stored interleaved row-major.
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> data;

    Image() = default;
    Image(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), data(h * w * 3, fill) {}

    [[nodiscard]] double& at(std::size_t y, std::size_t x, std::size_t ch) noexcept {
        return data[(y * width + x) * 3 + ch];
    }
    [[nodiscard]] double at(std::size_t y, std::size_t x, std::size_t ch) const noexcept {
        return data[(y * width + x) * 3 + ch];
    }

    [[nodiscard]] bool same_extent(const Image& o) const noexcept { return height == o.height && width == o.width; }

    void clip() {
        for (double& v : data) {
            v = std::clamp(v, 0.0, 1.0);
        }
    }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Bilinear resize (pixel-center aligned).
[[nodiscard]] Image resize_bilinear(const Image& src, std::size_t height, std::size_t width);

/// 8-bit RGB PNG bytes; channels are rounded to the nearest of 256 levels.
[[nodiscard]] std::vector<std::uint8_t> encode_png(const Image& img);

/// Decodes any gray, RGB, palette or alpha PNG into an RGB image (alpha composited onto black).
[[nodiscard]] Image decode_png(const std::vector<std::uint8_t>& bytes);

[[nodiscard]] std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

[[nodiscard]] Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace copresence
