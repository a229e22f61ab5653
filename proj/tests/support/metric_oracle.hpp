#pragma once
// Pixel-loop oracles for the metric checks, written independently of the
// library's counting code.

#include <cmath>
#include <cstdint>

#include "fcnseg/metrics.hpp"
#include "testgen.hpp"

namespace oracle {

struct Counts {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline bool in_region(std::uint8_t cls, fcnseg::Region r) {
    switch (r) {
        case fcnseg::Region::kUlcer: return cls == fcnseg::kUlcer;
        case fcnseg::Region::kSurroundingSkin: return cls == fcnseg::kSurroundingSkin;
        case fcnseg::Region::kComplete: return cls == fcnseg::kUlcer || cls == fcnseg::kSurroundingSkin;
    }
    return false;
}

inline Counts count(const fcnseg::LabelImage& pred, const fcnseg::LabelImage& gt, fcnseg::Region r) {
    Counts c;
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x) {
            const bool p = in_region(pred.at(x, y), r), g = in_region(gt.at(x, y), r);
            if (p && g) ++c.tp;
            else if (p) ++c.fp;
            else if (g) ++c.fn;
            else ++c.tn;
        }
    return c;
}

/// Largest deviation of the library's record from direct substitution into the
/// metric definitions. Only meaningful when no denominator is zero.
inline double metric_deviation(const Counts& c, const fcnseg::MetricRecord& m) {
    const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    const double fn = static_cast<double>(c.fn), tn = static_cast<double>(c.tn);
    const double sens = tp / (tp + fn);
    const double spec = tn / (tn + fp);
    const double dice = 2 * tp / (2 * tp + fp + fn);
    const double mcc = (tp * tn - fp * fn) / std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
    return std::max({std::abs(sens - m.sensitivity), std::abs(spec - m.specificity), std::abs(dice - m.dice),
                     std::abs(mcc - m.mcc)});
}

/// Dice from set sizes: 2|P∧G| / (|P| + |G|).
inline double dice_from_sets(const fcnseg::LabelImage& pred, const fcnseg::LabelImage& gt, fcnseg::Region r) {
    std::int64_t inter = 0, np = 0, ng = 0;
    for (std::size_t i = 0; i < gt.pixels.size(); ++i) {
        const bool p = in_region(pred.pixels[i], r), g = in_region(gt.pixels[i], r);
        inter += p && g;
        np += p;
        ng += g;
    }
    return np + ng == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(np + ng);
}

/// Random prediction/ground-truth pair; mixes noise labels with blocky ones so
/// both dense and sparse regions appear.
inline std::pair<fcnseg::LabelImage, fcnseg::LabelImage> random_pair(testgen::Rng& rng) {
    const int w = rng.integer(4, 40), h = rng.integer(4, 40);
    auto gt = rng.coin() ? testgen::blocky_label(rng, w, h) : testgen::random_label(rng, w, h, 3);
    auto pred = gt;
    const double flip = rng.uniform(0.0, 0.6);
    for (auto& p : pred.pixels)
        if (rng.coin(flip)) p = static_cast<std::uint8_t>(rng.integer(0, 2));
    return {pred, gt};
}

}  // namespace oracle
