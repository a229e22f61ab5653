#include "fcnseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "fcnseg/errors.hpp"

namespace fcnseg {

std::string_view to_string(Region r) {
    switch (r) {
        case Region::kUlcer: return "ulcer";
        case Region::kSurroundingSkin: return "surrounding_skin";
        case Region::kComplete: return "complete";
    }
    return "?";
}

Region parse_region(std::string_view s) {
    if (s == "ulcer") return Region::kUlcer;
    if (s == "surrounding_skin") return Region::kSurroundingSkin;
    if (s == "complete") return Region::kComplete;
    throw DataError("unknown region '" + std::string(s) + "'");
}

std::size_t RegionMask::count() const {
    return static_cast<std::size_t>(std::count(pixels.begin(), pixels.end(), std::uint8_t{1}));
}

RegionMask region_mask(const LabelImage& label, Region region) {
    RegionMask m{label.width, label.height, region, std::vector<std::uint8_t>(label.pixels.size(), 0)};
    for (std::size_t i = 0; i < label.pixels.size(); ++i) {
        const auto v = label.pixels[i];
        bool in = false;
        switch (region) {
            case Region::kUlcer: in = v == kUlcer; break;
            case Region::kSurroundingSkin: in = v == kSurroundingSkin; break;
            case Region::kComplete: in = v == kUlcer || v == kSurroundingSkin; break;
        }
        m.pixels[i] = in ? 1 : 0;
    }
    return m;
}

std::array<RegionMask, 3> region_masks(const LabelImage& label) {
    return {region_mask(label, Region::kUlcer), region_mask(label, Region::kSurroundingSkin),
            region_mask(label, Region::kComplete)};
}

ConfusionCounts confusion(const RegionMask& pred, const RegionMask& gt) {
    if (pred.width != gt.width || pred.height != gt.height || pred.pixels.size() != gt.pixels.size()) {
        throw ShapeError("confusion: prediction " + std::to_string(pred.width) + "x" + std::to_string(pred.height) +
                         " vs ground truth " + std::to_string(gt.width) + "x" + std::to_string(gt.height));
    }
    if (pred.region != gt.region) {
        throw ShapeError("confusion: region " + std::string(to_string(pred.region)) + " vs " +
                         std::string(to_string(gt.region)));
    }
    std::int64_t both = 0, p = 0, g = 0, either = 0;
    for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
        const bool a = pred.pixels[i] != 0, b = gt.pixels[i] != 0;
        both += a && b;
        p += a;
        g += b;
        either += a || b;
    }
    ConfusionCounts c;
    c.universe = static_cast<std::int64_t>(pred.pixels.size());
    c.tp = both;
    c.fp = p - both;
    c.fn = g - both;
    c.tn = c.universe - either;
    return c;
}

MetricRecord compute_metrics(const ConfusionCounts& c) {
    if (c.tp < 0 || c.fp < 0 || c.fn < 0 || c.tn < 0 || c.tp + c.fp + c.fn + c.tn != c.universe) {
        throw DataError("confusion counts do not partition the universe");
    }
    const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    const double fn = static_cast<double>(c.fn), tn = static_cast<double>(c.tn);
    const bool agree = c.fp == 0 && c.fn == 0;
    MetricRecord r;

    if (c.tp + c.fn > 0) {
        r.sensitivity = tp / (tp + fn);
    } else {
        r.sensitivity = c.fp == 0 ? 1.0 : 0.0;
        r.flags |= kFlagSensitivity;
    }
    if (c.fp + c.tn > 0) {
        r.specificity = tn / (fp + tn);
    } else {
        r.specificity = 1.0;
        r.flags |= kFlagSpecificity;
    }
    if (2 * c.tp + c.fp + c.fn > 0) {
        r.dice = 2.0 * tp / (2.0 * tp + fp + fn);
    } else {
        r.dice = 1.0;
        r.flags |= kFlagDice;
    }
    const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (denom > 0) {
        r.mcc = (tp * tn - fp * fn) / std::sqrt(denom);
    } else {
        r.mcc = agree ? 1.0 : 0.0;
        r.flags |= kFlagMcc;
    }
    return r;
}

std::string flag_string(unsigned flags) {
    std::string s;
    auto add = [&](unsigned bit, const char* name) {
        if (!(flags & bit)) return;
        if (!s.empty()) s += '|';
        s += name;
    };
    add(kFlagSensitivity, "sens");
    add(kFlagSpecificity, "spec");
    add(kFlagDice, "dice");
    add(kFlagMcc, "mcc");
    return s;
}

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd r;
    if (values.empty()) return r;
    double sum = 0.0;
    for (double v : values) sum += v;
    r.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - r.mean) * (v - r.mean);
        r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return r;
}

RegionSummary summarize(Region region, const std::vector<ImageMetrics>& per_image) {
    RegionSummary s;
    s.region = region;
    std::vector<double> spec, sens, mcc;
    for (const auto& m : per_image) {
        if (m.region != region) continue;
        s.dice_values.push_back(m.metrics.dice);
        spec.push_back(m.metrics.specificity);
        sens.push_back(m.metrics.sensitivity);
        mcc.push_back(m.metrics.mcc);
    }
    s.images = s.dice_values.size();
    s.dice = mean_std(s.dice_values);
    s.specificity = mean_std(spec);
    s.sensitivity = mean_std(sens);
    s.mcc = mean_std(mcc);
    return s;
}

SplitEvaluation evaluate_split(const std::vector<LabeledItem>& predictions, const std::vector<LabeledItem>& ground_truth) {
    std::map<std::string, const LabelImage*> gt;
    for (const auto& g : ground_truth) {
        if (!gt.emplace(g.id, &g.label).second) throw DataError("duplicate ground-truth id '" + g.id + "'");
    }
    std::map<std::string, const LabelImage*> pred;
    for (const auto& p : predictions) {
        if (!pred.emplace(p.id, &p.label).second) throw DataError("duplicate prediction id '" + p.id + "'");
        if (!gt.count(p.id)) throw DataError("prediction '" + p.id + "' has no ground truth");
    }
    for (const auto& [id, _] : gt) {
        if (!pred.count(id)) throw DataError("ground truth '" + id + "' has no prediction");
    }

    // Items are independent; results land in id order so aggregation is deterministic.
    std::vector<std::pair<std::string, std::pair<const LabelImage*, const LabelImage*>>> items;
    for (const auto& [id, g] : gt) items.push_back({id, {pred.at(id), g}});
    std::vector<std::array<ImageMetrics, 3>> rows(items.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(items.size()); ++i) {
        const auto& [id, pg] = items[i];
        const auto pm = region_masks(*pg.first);
        const auto gm = region_masks(*pg.second);
        for (std::size_t r = 0; r < 3; ++r) {
            ImageMetrics m;
            m.id = id;
            m.region = gm[r].region;
            m.counts = confusion(pm[r], gm[r]);
            m.metrics = compute_metrics(m.counts);
            rows[i][r] = std::move(m);
        }
    }

    SplitEvaluation out;
    for (const auto& r : rows) {
        // Row order per image: complete, ulcer, surrounding skin.
        out.per_image.push_back(r[2]);
        out.per_image.push_back(r[0]);
        out.per_image.push_back(r[1]);
    }
    for (Region region : kAllRegions) out.summary.push_back(summarize(region, out.per_image));
    return out;
}

std::string format_mean_std(const MeanStd& v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f±%.4f", v.mean, v.std);
    return buf;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write " + path.string());
    return f;
}

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

void write_per_image_csv(const std::filesystem::path& path, const std::vector<ImageMetrics>& rows) {
    auto f = open_csv(path);
    f << kPerImageHeader << '\n';
    for (const auto& r : rows) {
        f << r.id << ',' << to_string(r.region) << ',' << r.counts.tp << ',' << r.counts.fp << ',' << r.counts.fn << ','
          << r.counts.tn << ',' << fixed(r.metrics.dice) << ',' << fixed(r.metrics.sensitivity) << ','
          << fixed(r.metrics.specificity) << ',' << fixed(r.metrics.mcc) << ',' << flag_string(r.metrics.flags) << '\n';
    }
}

void write_summary_csv(const std::filesystem::path& path, const std::string& method,
                       const std::vector<RegionSummary>& summary) {
    auto f = open_csv(path);
    f << kSummaryHeader << '\n';
    for (const auto& s : summary) {
        f << method << ',' << to_string(s.region) << ',' << format_mean_std(s.dice) << ','
          << format_mean_std(s.specificity) << ',' << format_mean_std(s.sensitivity) << ',' << format_mean_std(s.mcc)
          << '\n';
    }
}

Histogram dice_histogram(const std::vector<double>& values, std::size_t bins) {
    if (bins == 0) throw ConfigError("histogram needs at least one bin");
    Histogram h;
    for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(static_cast<double>(i) / static_cast<double>(bins));
    h.counts.assign(bins, 0);
    for (double v : values) {
        const double c = std::clamp(v, 0.0, 1.0);
        const auto b = std::min(bins - 1, static_cast<std::size_t>(c * static_cast<double>(bins)));
        ++h.counts[b];
    }
    return h;
}

}  // namespace fcnseg
