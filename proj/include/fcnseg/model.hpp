#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fcnseg/label_image.hpp"
#include "fcnseg/tensor.hpp"

namespace fcnseg {

enum class Variant { kAlexNet, k32s, k16s, k8s };

std::string_view to_string(Variant v);
/// Accepts "fcn-alexnet", "fcn-32s", "fcn-16s", "fcn-8s" (case-insensitive, dash optional).
Variant parse_variant(std::string_view name);

/// How the two convolutionalized fully-connected layers are padded.
/// kSame keeps their spatial extent; kValid applies them without padding, as
/// the classification network did, which forces a much larger first-layer pad.
enum class FcPadding { kSame, kValid };

struct ModelOptions {
    FcPadding fc_padding = FcPadding::kSame;
    bool dropout = false;
    double dropout_rate = 0.5;
    bool freeze_upsample = false;
};

enum class NodeKind { kInput, kConv, kScore, kMaxPool, kUpsample, kCrop, kFuseSum, kDropout };

std::string_view to_string(NodeKind k);

/// One layer of the graph. Spatial coordinates of the node map onto input
/// image coordinates as image = scale * x + shift.
struct Node {
    std::string name;
    NodeKind kind = NodeKind::kInput;
    std::vector<int> inputs;
    int weight = -1;  // parameter index
    int bias = -1;    // parameter index
    int kernel = 1;
    int stride = 1;
    int pad = 0;
    bool relu = false;
    int crop_reference = -1;  // kCrop: node whose extents the output takes (-1: network input)
    int crop_offset = 0;
    double scale = 1.0;
    double shift = 0.0;
};

enum class ParamInit { kGaussian, kZero, kBilinear };

struct Parameter {
    std::string name;
    Tensor value;
    bool trainable = true;
    ParamInit init = ParamInit::kZero;
    double init_std = 0.0;
};

/// A built FCN graph. Node order is a valid evaluation order.
struct SegModel {
    Variant variant = Variant::k8s;
    int num_classes = kNumWoundClasses;
    double width_scale = 1.0;
    std::uint64_t seed = 0;
    ModelOptions options;
    std::vector<Node> nodes;
    std::vector<Parameter> params;

    int find_node(std::string_view name) const;
    int find_param(std::string_view name) const;
    std::size_t count(NodeKind kind) const;
    std::size_t parameter_count() const;
    /// Input-pixel extent covered by one cell of the score map that feeds the final upsampling.
    int prediction_stride() const;
    /// First-layer padding chosen by the builder.
    int first_pad() const;
    /// Re-draw the initial value of one parameter (same values as at build time).
    void reinitialize(std::size_t param_index);
    void zero_grads();
};

inline constexpr int kMinInputExtent = 32;

SegModel build_model(Variant variant, int num_classes, double width_scale, std::uint64_t seed,
                     const ModelOptions& options = {});

struct ForwardOptions {
    bool training = false;        // enables dropout when the model has it
    std::uint64_t dropout_seed = 0;
    std::vector<std::string> muted;  // nodes whose output is replaced by zeros
};

/// Activations and routing state retained for the backward pass.
struct ForwardCache {
    std::vector<Tensor> outputs;
    std::vector<std::vector<std::size_t>> argmax;
    std::vector<std::vector<std::uint8_t>> masks;
    std::vector<bool> muted;

    const Tensor& scores() const { return outputs.back(); }
};

/// Spatial extent of every node for an H×W input; throws ShapeError when any layer cannot run.
std::vector<std::pair<std::size_t, std::size_t>> propagate_extents(const SegModel& model, std::size_t height,
                                                                   std::size_t width);

ForwardCache forward_cached(const SegModel& model, const Tensor& image, const ForwardOptions& opts = {});
/// batch×num_classes×H×W score map for a batch×3×H×W image.
Tensor forward(const SegModel& model, const Tensor& image, const ForwardOptions& opts = {});

/// Accumulate parameter gradients of a scalar loss into the grad slots of model.params.
void backward(SegModel& model, const ForwardCache& cache, const Tensor& score_grad);

/// Per-pixel argmax over channels of a single-item score map; ties go to the lowest class.
LabelImage predict_labels(const Tensor& score_map);

}  // namespace fcnseg
