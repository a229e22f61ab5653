#include "fcnseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "fcnseg/errors.hpp"
#include "fcnseg/png.hpp"

namespace fcnseg {

RgbImage resize_bilinear(const RgbImage& src, int width, int height) {
    if (width < 1 || height < 1 || src.width < 1 || src.height < 1) throw ShapeError("resize: extents must be positive");
    if (src.width == width && src.height == height) return src;
    RgbImage out(width, height);
    const double sx = static_cast<double>(src.width) / width;
    const double sy = static_cast<double>(src.height) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = src.px(x0, y0)[c] * (1 - wx) + src.px(x1, y0)[c] * wx;
                const double bottom = src.px(x0, y1)[c] * (1 - wx) + src.px(x1, y1)[c] * wx;
                out.px(x, y)[c] = static_cast<std::uint8_t>(std::lround(top * (1 - wy) + bottom * wy));
            }
        }
    }
    return out;
}

LabelImage resize_nearest(const LabelImage& src, int width, int height) {
    if (width < 1 || height < 1 || src.width < 1 || src.height < 1) throw ShapeError("resize: extents must be positive");
    if (src.width == width && src.height == height) return src;
    LabelImage out(width, height);
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(src.height - 1, static_cast<int>((y + 0.5) * src.height / height));
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(src.width - 1, static_cast<int>((x + 0.5) * src.width / width));
            out.at(x, y) = src.at(sx, sy);
        }
    }
    return out;
}

Tensor image_to_tensor(const RgbImage& image) {
    const auto h = static_cast<std::size_t>(image.height);
    const auto w = static_cast<std::size_t>(image.width);
    Tensor t(Shape{1, 3, h, w});
    auto d = t.data();
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                d[(c * h + y) * w + x] = (image.rgb[(y * w + x) * 3 + c] / 255.0 - 0.5) / 0.25;
    return t;
}

Sample make_sample(std::string id, const RgbImage& image, LabelImage label, bool healthy) {
    if (label.width != image.width || label.height != image.height) {
        throw ShapeError("item '" + id + "': label " + std::to_string(label.width) + "x" + std::to_string(label.height) +
                         " does not match image " + std::to_string(image.width) + "x" + std::to_string(image.height));
    }
    for (auto v : label.pixels) {
        if (v >= kNumWoundClasses && v != kIgnoreLabel) {
            throw DataError("item '" + id + "': label value " + std::to_string(v) + " outside the class set");
        }
    }
    Sample s;
    s.id = std::move(id);
    s.image = image_to_tensor(image);
    s.label = std::move(label);
    s.healthy = healthy;
    return s;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open manifest " + path.string());
    const auto base = path.parent_path();
    std::vector<ManifestEntry> out;
    std::set<std::string> ids;
    std::string line;
    for (int lineno = 1; std::getline(f, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        try {
            const auto j = nlohmann::json::parse(line);
            ManifestEntry e;
            e.id = j.at("id").get<std::string>();
            e.image = j.at("image").get<std::string>();
            if (j.contains("label") && !j["label"].is_null()) e.label = j["label"].get<std::string>();
            e.healthy = j.value("healthy", false);
            if (e.image.is_relative()) e.image = base / e.image;
            if (!e.label.empty() && e.label.is_relative()) e.label = base / e.label;
            if (!ids.insert(e.id).second) throw DataError(where + ": duplicate id '" + e.id + "'");
            out.push_back(std::move(e));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + ": " + e.what());
        }
    }
    return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto base = std::filesystem::absolute(path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
    auto rel = [&](const std::filesystem::path& p) -> std::string {
        if (p.empty()) return {};
        const auto r = std::filesystem::absolute(p).lexically_relative(base);
        if (!r.empty() && *r.begin() != "..") return r.generic_string();
        return p.generic_string();
    };
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write manifest " + path.string());
    for (const auto& e : entries) {
        nlohmann::json j{{"id", e.id}, {"image", rel(e.image)}, {"healthy", e.healthy}};
        j["label"] = e.label.empty() ? nlohmann::json(nullptr) : nlohmann::json(rel(e.label));
        f << j.dump() << '\n';
    }
}

Sample load_sample(const ManifestEntry& entry, int size) {
    RgbImage image = decode_rgb_png(read_file_bytes(entry.image));
    LabelImage label = entry.label.empty() ? LabelImage(image.width, image.height)
                                           : decode_paletted_png(read_file_bytes(entry.label));
    if (label.width != image.width || label.height != image.height) {
        throw ShapeError("item '" + entry.id + "': label extents differ from the photograph");
    }
    if (size > 0) {
        image = resize_bilinear(image, size, size);
        label = resize_nearest(label, size, size);
    }
    return make_sample(entry.id, image, std::move(label), entry.healthy);
}

}  // namespace fcnseg
