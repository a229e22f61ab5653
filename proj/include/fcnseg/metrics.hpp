#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fcnseg/label_image.hpp"

namespace fcnseg {

enum class Region { kUlcer, kSurroundingSkin, kComplete };

inline constexpr std::array<Region, 3> kAllRegions{Region::kComplete, Region::kUlcer, Region::kSurroundingSkin};

std::string_view to_string(Region r);
Region parse_region(std::string_view s);

struct RegionMask {
    int width = 0;
    int height = 0;
    Region region = Region::kComplete;
    std::vector<std::uint8_t> pixels;  // 0 or 1

    std::size_t count() const;
};

/// Masks in the order ulcer, surrounding skin, complete.
std::array<RegionMask, 3> region_masks(const LabelImage& label);
RegionMask region_mask(const LabelImage& label, Region region);

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;
    std::int64_t universe = 0;

    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// TP = |P∧G|, FP = |P| − TP, FN = |G| − TP, TN = ∀ − |P∨G|. Throws ShapeError on extent or tag mismatch.
ConfusionCounts confusion(const RegionMask& pred, const RegionMask& gt);

/// Bit set in MetricRecord::flags when the value came from a degenerate-denominator convention.
enum MetricFlag : unsigned {
    kFlagSensitivity = 1,
    kFlagSpecificity = 2,
    kFlagDice = 4,
    kFlagMcc = 8,
};

struct MetricRecord {
    double sensitivity = 0.0;
    double specificity = 0.0;
    double dice = 0.0;
    double mcc = 0.0;
    unsigned flags = 0;
};

/// Degenerate cases: an empty prediction against an empty ground truth scores 1
/// (flagged); a zero denominator with any disagreement scores 0 (flagged).
MetricRecord compute_metrics(const ConfusionCounts& c);

/// "sens|mcc" style rendering of the flag bits; empty when none are set.
std::string flag_string(unsigned flags);

struct ImageMetrics {
    std::string id;
    Region region = Region::kComplete;
    ConfusionCounts counts;
    MetricRecord metrics;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation; 0 for fewer than two values
};

MeanStd mean_std(const std::vector<double>& values);

struct RegionSummary {
    Region region = Region::kComplete;
    std::size_t images = 0;
    MeanStd dice, specificity, sensitivity, mcc;
    std::vector<double> dice_values;  // per image, in id order
};

struct SplitEvaluation {
    std::vector<ImageMetrics> per_image;  // sorted by id, then region
    std::vector<RegionSummary> summary;   // complete, ulcer, surrounding skin
};

struct LabeledItem {
    std::string id;
    LabelImage label;
};

/// Pairs predictions with ground truth by id. Throws DataError for unpaired or duplicate ids.
SplitEvaluation evaluate_split(const std::vector<LabeledItem>& predictions, const std::vector<LabeledItem>& ground_truth);

RegionSummary summarize(Region region, const std::vector<ImageMetrics>& per_image);

// ---- CSV output ----------------------------------------------------------------

inline constexpr std::string_view kPerImageHeader = "id,region,TP,FP,FN,TN,dice,sens,spec,mcc,flags";
inline constexpr std::string_view kSummaryHeader = "method,region,dice,specificity,sensitivity,mcc";

/// Formats mean and std as "0.8512±0.0734".
std::string format_mean_std(const MeanStd& v);

void write_per_image_csv(const std::filesystem::path& path, const std::vector<ImageMetrics>& rows);
void write_summary_csv(const std::filesystem::path& path, const std::string& method,
                       const std::vector<RegionSummary>& summary);

/// Equal-width Dice histogram over [0, 1]; the last bin is closed.
struct Histogram {
    std::vector<double> edges;  // bins + 1
    std::vector<std::size_t> counts;
};

Histogram dice_histogram(const std::vector<double>& values, std::size_t bins = 10);

}  // namespace fcnseg
