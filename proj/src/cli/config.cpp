#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <fstream>

#include "fcnseg/checkpoint.hpp"
#include "fcnseg/cli.hpp"
#include "fcnseg/errors.hpp"
#include "fcnseg/png.hpp"
#include "fcnseg/synthetic.hpp"
#include "fcnseg/dataset.hpp"

namespace fcnseg::cli {
namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::json to_json(const TrainConfig& t) {
    return {{"epochs", t.epochs},       {"base_lr", t.base_lr},   {"step_fraction", t.step_fraction},
            {"gamma", t.gamma},         {"momentum", t.momentum}, {"batch_size", t.batch_size},
            {"seed", t.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig t) {
    t.epochs = j.value("epochs", t.epochs);
    t.base_lr = j.value("base_lr", t.base_lr);
    t.step_fraction = j.value("step_fraction", t.step_fraction);
    t.gamma = j.value("gamma", t.gamma);
    t.momentum = j.value("momentum", t.momentum);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.seed = j.value("seed", t.seed);
    return t;
}

Dataset to_dataset(const std::vector<SurrogateSample>& items, TaskKind task) {
    Dataset out;
    for (const auto& s : items) {
        Sample x;
        x.id = s.id;
        x.image = image_to_tensor(s.image);
        x.label = task == TaskKind::kSegmentation ? s.label : LabelImage(s.image.width, s.image.height);
        x.class_label = s.class_label;
        out.push_back(std::move(x));
    }
    return out;
}

}  // namespace

nlohmann::json to_json(const RunConfig& c) {
    return {{"variant", std::string(to_string(c.variant))},
            {"width_scale", c.width_scale},
            {"input_size", c.input_size},
            {"seed", c.seed},
            {"model_options", fcnseg::to_json(c.model_options)},
            {"train", to_json(c.train)}};
}

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c) {
    try {
        if (j.contains("variant")) c.variant = parse_variant(j["variant"].get<std::string>());
        c.width_scale = j.value("width_scale", c.width_scale);
        c.input_size = j.value("input_size", c.input_size);
        c.seed = j.value("seed", c.seed);
        if (j.contains("model_options")) c.model_options = model_options_from_json(j["model_options"]);
        if (j.contains("train")) c.train = train_config_from_json(j["train"], c.train);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    }
    if (c.input_size < 0) throw ConfigError("input_size must be >= 0");
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open run config " + path.string());
    try {
        return run_config_from_json(nlohmann::json::parse(f), base);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file_bytes(path)); }

RunManifest::RunManifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)), argv_(std::move(argv)), started_(utc_now()) {}

void RunManifest::add_input(const std::filesystem::path& path) {
    std::string hash;
    if (std::filesystem::is_regular_file(path)) hash = sha256_file(path);
    inputs_.push_back({{"path", path.generic_string()}, {"sha256", hash}});
}

void RunManifest::add_output(const std::filesystem::path& path) { outputs_.push_back(path); }

void RunManifest::add_error(const std::string& item, const std::string& message) {
    errors_.push_back({{"item", item}, {"message", message}});
}

nlohmann::json RunManifest::write(const std::filesystem::path& path, const std::string& status) {
    nlohmann::json outputs = nlohmann::json::array();
    for (const auto& p : outputs_) {
        const bool exists = std::filesystem::is_regular_file(p);
        outputs.push_back({{"path", p.generic_string()}, {"sha256", exists ? sha256_file(p) : ""}});
    }
    nlohmann::json j{{"command", command_}, {"argv", argv_},     {"config", config_},   {"seeds", seeds_},
                     {"inputs", inputs_},   {"outputs", outputs}, {"errors", errors_},   {"notes", notes_},
                     {"status", status},    {"started", started_}, {"finished", utc_now()}};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write " + path.string());
    f << j.dump(2) << '\n';
    return j;
}

ResolvedTierPlan resolve_tier_plan(const nlohmann::json& j, const RunConfig& config, StageData target) {
    ResolvedTierPlan r;
    try {
        if (j.contains("source") && !j["source"].is_null()) {
            r.plan.source = load_checkpoint(j["source"].get<std::string>());
        }
        const auto& stages = j.at("stages");
        if (!stages.is_array() || stages.empty()) throw ConfigError("tier plan needs a non-empty 'stages' array");
        const int size = config.input_size > 0 ? config.input_size : 64;
        std::uint32_t index = 0;
        for (const auto& s : stages) {
            TierStage stage;
            stage.name = s.at("name").get<std::string>();
            stage.role = parse_stage_role(s.value("role", std::string("target")));
            stage.dataset = s.at("dataset").get<std::string>();
            const auto mode = s.value("load_mode", std::string("compatible"));
            if (mode != "compatible" && mode != "strict") throw ConfigError("load_mode must be 'compatible' or 'strict'");
            stage.load_mode = mode == "strict" ? LoadMode::kStrict : LoadMode::kCompatible;
            stage.config = train_config_from_json(s.value("train", nlohmann::json::object()), config.train);
            stage.config.validate();

            if (!r.datasets.count(stage.dataset)) {
                const auto count = s.value("count", std::size_t{100});
                const std::uint64_t seed = config.seed * 1000003ULL + 17 * ++index;
                StageData data;
                if (stage.dataset == "target") {
                    data = target;
                } else if (stage.dataset == "surrogate-seg") {
                    data.task = TaskKind::kSegmentation;
                    data.num_classes = kSurrogateSegClasses;
                    auto all = to_dataset(generate_segmentation_surrogate(count, size, seed), data.task);
                    const std::size_t n_val = std::max<std::size_t>(1, count / 5);
                    data.validation.assign(std::make_move_iterator(all.end() - static_cast<std::ptrdiff_t>(n_val)),
                                           std::make_move_iterator(all.end()));
                    all.resize(all.size() - n_val);
                    data.train = std::move(all);
                } else if (stage.dataset == "surrogate-cls") {
                    data.task = TaskKind::kClassification;
                    data.num_classes = kSurrogateClsClasses;
                    auto all = to_dataset(generate_classification_surrogate(count, size, seed), data.task);
                    const std::size_t n_val = std::max<std::size_t>(1, count / 5);
                    data.validation.assign(std::make_move_iterator(all.end() - static_cast<std::ptrdiff_t>(n_val)),
                                           std::make_move_iterator(all.end()));
                    all.resize(all.size() - n_val);
                    data.train = std::move(all);
                } else {
                    // Unknown keys stay unresolved; run_tier_plan reports them as a stage error.
                    r.plan.stages.push_back(std::move(stage));
                    continue;
                }
                r.datasets.emplace(stage.dataset, std::move(data));
            }
            r.plan.stages.push_back(std::move(stage));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("tier plan: ") + e.what());
    }
    return r;
}

}  // namespace fcnseg::cli
