#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fcnseg/label_image.hpp"

namespace fcnseg {

using Rgb = std::array<std::uint8_t, 3>;
using Palette = std::vector<Rgb>;

/// The 256-entry Pascal-VOC colour map: 0 → black, 1 → (128,0,0), 2 → (0,128,0), ...
const Palette& voc_palette();

/// 8-bit palette-mode PNG whose sample values are the class indices.
std::vector<std::uint8_t> encode_paletted_png(const LabelImage& label, const Palette& palette = voc_palette());

/// Decodes palette-mode PNGs of bit depth 1, 2, 4 or 8. Any other colour type is a FormatError.
LabelImage decode_paletted_png(std::span<const std::uint8_t> bytes, Palette* palette_out = nullptr);

/// 8-bit RGB PNG (colour type 2).
std::vector<std::uint8_t> encode_rgb_png(const RgbImage& image);

/// Decodes 8-bit gray, gray+alpha, RGB, RGBA and palette PNGs to RGB. Alpha is dropped.
RgbImage decode_rgb_png(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace fcnseg
