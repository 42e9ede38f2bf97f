#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace scd {

// 8-bit RGB, row-major, 3 bytes per pixel.
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> rgb;

    Image() = default;
    Image(std::size_t w, std::size_t h) : width(w), height(h), rgb(w * h * 3, 0) {}

    std::uint8_t* pixel(std::size_t x, std::size_t y) { return rgb.data() + (y * width + x) * 3; }
    const std::uint8_t* pixel(std::size_t x, std::size_t y) const {
        return rgb.data() + (y * width + x) * 3;
    }
    bool operator==(const Image&) const = default;
};

// Binary per-pixel mask, one byte per pixel holding 0 or 1.
struct Mask {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> bits;

    Mask() = default;
    Mask(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), bits(w * h, fill) {}

    std::uint8_t& at(std::size_t x, std::size_t y) { return bits[y * width + x]; }
    std::uint8_t at(std::size_t x, std::size_t y) const { return bits[y * width + x]; }
    std::size_t count() const;
    bool same_size(const Mask& other) const { return width == other.width && height == other.height; }
    bool operator==(const Mask&) const = default;
};

// Binary PPM (P6, maxval 255).
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const Image& image, const std::filesystem::path& path);

// Only the header; used for geometry checks without decoding pixels.
struct ImageSize {
    std::size_t width = 0;
    std::size_t height = 0;
};
ImageSize read_ppm_size(const std::filesystem::path& path);

// Binary PGM (P5). Stored as 0/255, any non-zero byte reads back as 1.
Mask read_pgm_mask(const std::filesystem::path& path);
void write_pgm_mask(const Mask& mask, const std::filesystem::path& path);

}  // namespace scd
