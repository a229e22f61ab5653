#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcnseg/model.hpp"
#include "fcnseg/train.hpp"

namespace fcnseg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitPartial = 2;

/// Declarative run file; command-line flags override individual fields.
struct RunConfig {
    Variant variant = Variant::k8s;
    double width_scale = 0.1;
    int input_size = 64;  // 0: native resolution
    ModelOptions model_options;
    TrainConfig train;
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const RunConfig& c);
/// Missing keys keep the values already in `base`.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Provenance record written next to every command's outputs.
class RunManifest {
public:
    RunManifest(std::string command, std::vector<std::string> argv);

    void set_config(nlohmann::json config) { config_ = std::move(config); }
    void add_seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
    void add_input(const std::filesystem::path& path);
    void add_output(const std::filesystem::path& path);
    void add_error(const std::string& item, const std::string& message);
    void note(const std::string& key, nlohmann::json value) { notes_[key] = std::move(value); }
    std::size_t error_count() const { return errors_.size(); }

    /// Hashes every listed output and writes the manifest; returns the JSON written.
    nlohmann::json write(const std::filesystem::path& path, const std::string& status);

private:
    std::string command_;
    std::vector<std::string> argv_;
    std::string started_;
    nlohmann::json config_ = nlohmann::json::object();
    nlohmann::json seeds_ = nlohmann::json::object();
    nlohmann::json notes_ = nlohmann::json::object();
    nlohmann::json inputs_ = nlohmann::json::array();
    std::vector<std::filesystem::path> outputs_;
    nlohmann::json errors_ = nlohmann::json::array();
};

struct ConvertOptions {
    std::filesystem::path annotations;
    std::filesystem::path images;
    std::filesystem::path out;
    std::vector<std::string> argv;
};

struct SplitOptions {
    std::filesystem::path manifest;
    std::filesystem::path out;  // fold plan JSON
    std::uint64_t seed = 0;
    std::vector<std::string> argv;
};

struct TrainOptions {
    std::filesystem::path manifest;
    std::filesystem::path plan;
    int fold = 0;
    std::filesystem::path out;
    RunConfig config;
    std::optional<std::filesystem::path> tier_plan;
    std::vector<std::string> argv;
};

struct EvalOptions {
    std::optional<std::filesystem::path> checkpoint;
    std::optional<std::filesystem::path> predictions;  // directory of <id>.png paletted labels
    std::filesystem::path manifest;
    std::optional<std::filesystem::path> plan;
    int fold = -1;  // -1: every non-healthy manifest item
    std::filesystem::path out;
    std::string method;  // defaults to the checkpoint variant or "predictions"
    int input_size = -1; // -1: from checkpoint metadata; 0: native
    std::optional<Variant> expect_variant;
    bool save_predictions = false;
    std::vector<std::string> argv;
};

struct ReportOptions {
    std::vector<std::filesystem::path> evals;
    std::filesystem::path out;
    std::size_t bins = 10;
    std::vector<std::string> argv;
};

struct SynthOptions {
    std::filesystem::path out;
    std::size_t count = 200;
    std::size_t healthy_count = 0;
    int size = 64;
    std::uint64_t seed = 0;
    std::vector<std::string> argv;
};

/// Each command writes its outputs plus run_manifest.json and returns an exit code.
int cmd_convert(const ConvertOptions& opts, std::ostream& log);
int cmd_split(const SplitOptions& opts, std::ostream& log);
int cmd_train(const TrainOptions& opts, std::ostream& log);
int cmd_eval(const EvalOptions& opts, std::ostream& log);
int cmd_report(const ReportOptions& opts, std::ostream& log);
int cmd_synth(const SynthOptions& opts, std::ostream& log);

/// Tier plan file → plan plus the datasets it references. "target" resolves to `target`;
/// "surrogate-seg" and "surrogate-cls" are generated at `input_size`.
struct ResolvedTierPlan {
    TierPlan plan;
    DatasetRegistry datasets;
};

ResolvedTierPlan resolve_tier_plan(const nlohmann::json& j, const RunConfig& config, StageData target);

}  // namespace fcnseg::cli
