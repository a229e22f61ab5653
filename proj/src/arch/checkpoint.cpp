#include "fcnseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "fcnseg/errors.hpp"

namespace fcnseg {
namespace {

constexpr char kMagic[8] = {'F', 'C', 'N', 'S', 'E', 'G', 'C', 'K'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

nlohmann::json meta_to_json(const CheckpointMeta& m) {
    return {{"variant", std::string(to_string(m.variant))},
            {"width_scale", m.width_scale},
            {"num_classes", m.num_classes},
            {"seed", m.seed},
            {"options", to_json(m.options)},
            {"tier", m.tier},
            {"extra", m.extra}};
}

CheckpointMeta meta_from_json(const nlohmann::json& j) {
    CheckpointMeta m;
    m.variant = parse_variant(j.at("variant").get<std::string>());
    m.width_scale = j.at("width_scale").get<double>();
    m.num_classes = j.at("num_classes").get<int>();
    m.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("options")) m.options = model_options_from_json(j.at("options"));
    m.tier = j.value("tier", std::string{});
    if (j.contains("extra")) m.extra = j.at("extra");
    return m;
}

}  // namespace

nlohmann::json to_json(const ModelOptions& o) {
    return {{"fc_padding", o.fc_padding == FcPadding::kSame ? "same" : "valid"},
            {"dropout", o.dropout},
            {"dropout_rate", o.dropout_rate},
            {"freeze_upsample", o.freeze_upsample}};
}

ModelOptions model_options_from_json(const nlohmann::json& j) {
    ModelOptions o;
    const auto pad = j.value("fc_padding", std::string("same"));
    if (pad != "same" && pad != "valid") throw ConfigError("fc_padding must be 'same' or 'valid', got '" + pad + "'");
    o.fc_padding = pad == "same" ? FcPadding::kSame : FcPadding::kValid;
    o.dropout = j.value("dropout", false);
    o.dropout_rate = j.value("dropout_rate", 0.5);
    o.freeze_upsample = j.value("freeze_upsample", false);
    return o;
}

Checkpoint make_checkpoint(const SegModel& model, std::string tier, nlohmann::json extra) {
    Checkpoint c;
    c.meta.variant = model.variant;
    c.meta.width_scale = model.width_scale;
    c.meta.num_classes = model.num_classes;
    c.meta.seed = model.seed;
    c.meta.options = model.options;
    c.meta.tier = std::move(tier);
    c.meta.extra = std::move(extra);
    for (const auto& p : model.params) {
        Tensor t(p.value.shape(), std::vector<double>(p.value.data().begin(), p.value.data().end()));
        c.tensors.emplace(p.name, std::move(t));
    }
    return c;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    nlohmann::json header;
    header["format_version"] = kCheckpointVersion;
    header["metadata"] = meta_to_json(ckpt.meta);
    header["tensors"] = nlohmann::json::object();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : ckpt.tensors) {
        const Shape s = t.shape();
        header["tensors"][name] = {{"shape", {s.n, s.c, s.h, s.w}}, {"offset", offset}};
        offset += t.size() * sizeof(double);
    }
    const std::string text = header.dump();

    std::vector<std::uint8_t> out;
    out.reserve(16 + text.size() + offset);
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_u64(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& [name, t] : ckpt.tensors) {
        for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
        throw CheckpointError("not a checkpoint container (bad magic)");
    }
    const std::uint64_t header_len = get_u64(bytes.data() + 8);
    if (header_len > bytes.size() - 16) throw CheckpointError("truncated checkpoint header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    if (header.value("format_version", 0) != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint format version");
    }
    const std::uint8_t* payload = bytes.data() + 16 + header_len;
    const std::size_t payload_len = bytes.size() - 16 - header_len;

    Checkpoint c;
    try {
        c.meta = meta_from_json(header.at("metadata"));
        for (const auto& [name, entry] : header.at("tensors").items()) {
            const auto dims = entry.at("shape").get<std::vector<std::size_t>>();
            if (dims.size() != 4) throw CheckpointError("tensor '" + name + "' must have 4 extents");
            const Shape s{dims[0], dims[1], dims[2], dims[3]};
            const auto off = entry.at("offset").get<std::uint64_t>();
            if (off > payload_len || s.size() > (payload_len - off) / sizeof(double)) {
                throw CheckpointError("tensor '" + name + "' runs past the end of the payload");
            }
            std::vector<double> values(s.size());
            for (std::size_t i = 0; i < values.size(); ++i) {
                values[i] = std::bit_cast<double>(get_u64(payload + off + i * sizeof(double)));
            }
            c.tensors.emplace(name, Tensor(s, std::move(values)));
        }
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("bad checkpoint metadata: ") + e.what());
    }
    return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto bytes = serialize_checkpoint(ckpt);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot write checkpoint " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CheckpointError("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

LoadReport load_pretrained(SegModel& model, const Checkpoint& ckpt, LoadMode mode) {
    LoadReport report;
    std::vector<std::string> problems;
    std::vector<bool> used(model.params.size(), false);

    for (const auto& [name, t] : ckpt.tensors) {
        const int idx = model.find_param(name);
        if (idx < 0) {
            report.skipped.push_back(name);
            problems.push_back(name + " (not in model)");
            continue;
        }
        used[static_cast<std::size_t>(idx)] = true;
        if (model.params[static_cast<std::size_t>(idx)].value.shape() != t.shape()) {
            report.skipped.push_back(name);
            report.reinitialized.push_back(name);
            problems.push_back(name + " (checkpoint " + t.shape().to_string() + ", model " +
                               model.params[static_cast<std::size_t>(idx)].value.shape().to_string() + ")");
            continue;
        }
        report.copied.push_back(name);
    }
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        if (!used[i]) {
            report.missing.push_back(model.params[i].name);
            problems.push_back(model.params[i].name + " (missing from checkpoint)");
        }
    }
    if (mode == LoadMode::kStrict && !problems.empty()) {
        std::string msg = "strict load failed for " + std::to_string(problems.size()) + " key(s):";
        for (const auto& p : problems) msg += " " + p + ";";
        throw CheckpointError(msg);
    }
    for (const auto& name : report.copied) {
        auto& dst = model.params[static_cast<std::size_t>(model.find_param(name))].value;
        const auto& src = ckpt.tensors.at(name).data();
        std::copy(src.begin(), src.end(), dst.data().begin());
    }
    for (const auto& name : report.reinitialized) {
        model.reinitialize(static_cast<std::size_t>(model.find_param(name)));
    }
    return report;
}

SegModel model_from_checkpoint(const Checkpoint& ckpt) {
    SegModel m = build_model(ckpt.meta.variant, ckpt.meta.num_classes, ckpt.meta.width_scale, ckpt.meta.seed,
                             ckpt.meta.options);
    load_pretrained(m, ckpt, LoadMode::kStrict);
    return m;
}

}  // namespace fcnseg
