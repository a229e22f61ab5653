#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fcnseg/annotation.hpp"
#include "fcnseg/label_image.hpp"

namespace fcnseg {

/// Foot-like photograph with an ulcer blob enclosed by a surrounding-skin ring.
struct SyntheticSample {
    std::string id;
    RgbImage image;
    LabelImage label;
    RegionAnnotation annotation;  // polygons the label was rasterized from
    bool healthy = false;
};

/// Sample `index` of the stream identified by `seed`; independent of how many others are drawn.
SyntheticSample generate_synthetic_sample(std::uint64_t seed, std::size_t index, int image_size, bool healthy = false);

std::vector<SyntheticSample> generate_synthetic_dataset(std::size_t count, int image_size, std::uint64_t seed,
                                                        bool healthy = false);

/// Items of the small surrogate tasks that stand in for large pretraining corpora.
struct SurrogateSample {
    std::string id;
    RgbImage image;
    LabelImage label;     // segmentation surrogate only
    int class_label = -1; // classification surrogate only
};

/// Background plus four textured object families.
inline constexpr int kSurrogateSegClasses = 5;
inline constexpr int kSurrogateClsClasses = 4;

/// Scenes with one to three textured blobs; label = family index + 1.
std::vector<SurrogateSample> generate_segmentation_surrogate(std::size_t count, int image_size, std::uint64_t seed);

/// One dominant textured blob per image; class = its family.
std::vector<SurrogateSample> generate_classification_surrogate(std::size_t count, int image_size, std::uint64_t seed);

}  // namespace fcnseg
