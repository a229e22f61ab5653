#pragma once

#include <string>
#include <vector>

#include "fcnseg/label_image.hpp"
#include "fcnseg/tensor.hpp"

namespace fcnseg {

/// One training or evaluation item. Segmentation items carry a label raster;
/// classification items carry an image-level class.
struct Sample {
    std::string id;
    Tensor image;  // 1×3×H×W
    LabelImage label;
    int class_label = -1;
    bool healthy = false;
};

using Dataset = std::vector<Sample>;

}  // namespace fcnseg
