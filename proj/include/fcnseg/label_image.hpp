#pragma once

#include <cstdint>
#include <vector>

namespace fcnseg {

/// Class indices used by the wound labels.
enum ClassIndex : std::uint8_t {
    kBackground = 0,
    kSurroundingSkin = 1,
    kUlcer = 2,
};

inline constexpr int kNumWoundClasses = 3;
inline constexpr std::uint8_t kIgnoreLabel = 255;

/// Single-channel 8-bit class-index raster.
struct LabelImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    LabelImage() = default;
    LabelImage(int w, int h, std::uint8_t fill = kBackground)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const noexcept { return pixels.size(); }

    friend bool operator==(const LabelImage&, const LabelImage&) = default;
};

/// Interleaved 8-bit RGB raster.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    RgbImage() = default;
    RgbImage(int w, int h)
        : width(w), height(h), rgb(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, 0) {}

    std::uint8_t* px(int x, int y) { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
    const std::uint8_t* px(int x, int y) const { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

}  // namespace fcnseg
