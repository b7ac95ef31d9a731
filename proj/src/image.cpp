#include "copresence/image.hpp"

#include <png.h>

#include <cmath>
#include <fstream>
#include <string>

namespace copresence {

Image resize_bilinear(const Image& src, std::size_t height, std::size_t width) {
    if (src.height == height && src.width == width) {
        return src;
    }
    if (src.height == 0 || src.width == 0 || height == 0 || width == 0) {
        throw DomainError("resize: empty image");
    }
    Image out(height, width);
    const double sy = static_cast<double>(src.height) / static_cast<double>(height);
    const double sx = static_cast<double>(src.width) / static_cast<double>(width);
    for (std::size_t y = 0; y < height; ++y) {
        const double fy =
            std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
        const auto y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < width; ++x) {
            const double fx =
                std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
            const auto x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - static_cast<double>(x0);
            for (std::size_t ch = 0; ch < 3; ++ch) {
                const double top = src.at(y0, x0, ch) * (1.0 - wx) + src.at(y0, x1, ch) * wx;
                const double bottom = src.at(y1, x0, ch) * (1.0 - wx) + src.at(y1, x1, ch) * wx;
                out.at(y, x, ch) = top * (1.0 - wy) + bottom * wy;
            }
        }
    }
    return out;
}

std::vector<std::uint8_t> encode_png(const Image& img) {
    if (img.height == 0 || img.width == 0 || img.data.size() != img.height * img.width * 3) {
        throw IoError("PNG: cannot encode an empty or malformed image");
    }
    std::vector<std::uint8_t> pixels(img.data.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.data[i], 0.0, 1.0) * 255.0));
    }
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr) == 0) {
        const std::string message = image.message;
        png_image_free(&image);
        throw IoError("PNG: " + message);
    }
    std::vector<std::uint8_t> out(size);
    if (png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr) == 0) {
        const std::string message = image.message;
        png_image_free(&image);
        throw IoError("PNG: " + message);
    }
    out.resize(size);
    return out;
}

Image decode_png(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
        throw IoError("not a PNG stream");
    }
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()) == 0) {
        const std::string message = image.message;
        png_image_free(&image);
        throw IoError("PNG: " + message);
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
    if (png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr) == 0) {
        const std::string message = image.message;
        png_image_free(&image);
        throw IoError("PNG: " + message);
    }
    Image img(image.height, image.width);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        img.data[i] = static_cast<double>(pixels[i]) / 255.0;
    }
    return img;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write '" + path.string() + "'");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed for '" + path.string() + "'");
    }
}

Image read_png(const std::filesystem::path& path) { return decode_png(read_file_bytes(path)); }

void write_png(const std::filesystem::path& path, const Image& img) { write_file_bytes(path, encode_png(img)); }

}  // namespace copresence
