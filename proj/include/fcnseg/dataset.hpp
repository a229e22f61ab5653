#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fcnseg/label_image.hpp"
#include "fcnseg/sample.hpp"

namespace fcnseg {

/// Bilinear resampling with pixel-centre alignment.
RgbImage resize_bilinear(const RgbImage& image, int width, int height);

/// Nearest-neighbour resampling; keeps labels inside the class set.
LabelImage resize_nearest(const LabelImage& label, int width, int height);

/// 1×3×H×W tensor with channels scaled to (v/255 − 0.5) / 0.25.
Tensor image_to_tensor(const RgbImage& image);

Sample make_sample(std::string id, const RgbImage& image, LabelImage label, bool healthy = false);

/// One line of the JSON-lines dataset manifest.
struct ManifestEntry {
    std::string id;
    std::filesystem::path image;
    std::filesystem::path label;  // empty when the item has no label raster
    bool healthy = false;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Reads `{"id", "image", "label", "healthy"}` lines; relative paths resolve against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

/// Writes paths relative to the manifest's directory when they lie below it.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

/// Loads and, when `size` > 0, resizes to size×size. Label extents must match the photograph.
Sample load_sample(const ManifestEntry& entry, int size);

}  // namespace fcnseg
