#pragma once

// Single-file weight container:
//
//   bytes 0..7    magic "FCNSEGCK"
//   bytes 8..15   header length L, unsigned 64-bit little-endian
//   bytes 16..    L bytes of UTF-8 JSON header
//   then          tensor payloads, float64 little-endian, row-major
//
// The header holds {"format_version", "metadata", "tensors"}; each tensor
// entry is {"shape": [n, c, h, w], "offset": byte offset from payload start}.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcnseg/model.hpp"

namespace fcnseg {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
    Variant variant = Variant::k8s;
    double width_scale = 1.0;
    int num_classes = kNumWoundClasses;
    std::uint64_t seed = 0;
    ModelOptions options;
    std::string tier;          // training-tier tag, e.g. "tier1-classification"
    nlohmann::json extra = nlohmann::json::object();
};

struct Checkpoint {
    CheckpointMeta meta;
    std::map<std::string, Tensor> tensors;
};

Checkpoint make_checkpoint(const SegModel& model, std::string tier, nlohmann::json extra = nlohmann::json::object());

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

enum class LoadMode { kStrict, kCompatible };

struct LoadReport {
    std::vector<std::string> copied;         // checkpoint tensors written into the model
    std::vector<std::string> skipped;        // checkpoint tensors not used (unknown key or shape mismatch)
    std::vector<std::string> reinitialized;  // model parameters reset because the checkpoint shape differed
    std::vector<std::string> missing;        // model parameters absent from the checkpoint (left as built)
};

/// Strict mode throws CheckpointError on any unknown, missing or mis-shaped key
/// and leaves the model untouched. Compatible mode copies what fits.
LoadReport load_pretrained(SegModel& model, const Checkpoint& ckpt, LoadMode mode);

/// Rebuild the model described by the checkpoint metadata and load it strictly.
SegModel model_from_checkpoint(const Checkpoint& ckpt);

nlohmann::json to_json(const ModelOptions& o);
ModelOptions model_options_from_json(const nlohmann::json& j);

}  // namespace fcnseg
