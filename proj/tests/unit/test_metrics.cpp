#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "fcnseg/errors.hpp"
#include "fcnseg/metrics.hpp"
#include "metric_oracle.hpp"
#include "testgen.hpp"

using namespace fcnseg;
using testgen::Rng;

namespace {

RegionMask mask_with(int w, int h, std::vector<int> on) {
    RegionMask m{w, h, Region::kComplete, std::vector<std::uint8_t>(static_cast<std::size_t>(w * h), 0)};
    for (int i : on) m.pixels[static_cast<std::size_t>(i)] = 1;
    return m;
}

std::vector<int> range(int lo, int hi) {
    std::vector<int> v;
    for (int i = lo; i < hi; ++i) v.push_back(i);
    return v;
}

}  // namespace

TEST_CASE("region masks") {
    const auto bg = region_masks(LabelImage(5, 5));
    for (const auto& m : bg) CHECK(m.count() == 0);

    Rng rng(1);
    const auto l = testgen::random_label(rng, 20, 11, 3);
    const auto ms = region_masks(l);
    const auto& complete = ms[2];
    CHECK(complete.region == Region::kComplete);
    CHECK(complete.count() == ms[0].count() + ms[1].count());
    for (std::size_t i = 0; i < l.size(); ++i) {
        CHECK(ms[0].pixels[i] == (l.pixels[i] == kUlcer));
        CHECK(ms[1].pixels[i] == (l.pixels[i] == kSurroundingSkin));
        CHECK(complete.pixels[i] == (ms[0].pixels[i] | ms[1].pixels[i]));
    }
}

TEST_CASE("confusion: identity and disjoint masks") {
    const auto gt = mask_with(10, 10, range(0, 37));
    CHECK(confusion(gt, gt) == ConfusionCounts{37, 0, 0, 63, 100});
    const auto pred = mask_with(10, 10, range(0, 10));
    const auto other = mask_with(10, 10, range(50, 70));
    CHECK(confusion(pred, other) == ConfusionCounts{0, 10, 20, 70, 100});
}

TEST_CASE("confusion: mismatched extents or regions are shape errors") {
    CHECK_THROWS_AS(confusion(mask_with(4, 4, {}), mask_with(4, 5, {})), ShapeError);
    auto a = mask_with(4, 4, {});
    a.region = Region::kUlcer;
    CHECK_THROWS_AS(confusion(a, mask_with(4, 4, {})), ShapeError);
}

TEST_CASE("confusion equals a pixel loop on random 16x16 pairs") {
    Rng rng(2);
    for (int i = 0; i < 64; ++i) {
        const auto gt = testgen::random_label(rng, 16, 16, 3);
        const auto pred = testgen::random_label(rng, 16, 16, 3);
        for (auto r : kAllRegions) {
            const auto c = confusion(region_mask(pred, r), region_mask(gt, r));
            const auto o = oracle::count(pred, gt, r);
            CHECK(c == ConfusionCounts{o.tp, o.fp, o.fn, o.tn, 256});
        }
    }
}

TEST_CASE("metrics: worked example") {
    const auto m = compute_metrics({2, 1, 1, 96, 100});
    CHECK(m.dice == doctest::Approx(4.0 / 6));
    CHECK(m.sensitivity == doctest::Approx(2.0 / 3));
    CHECK(m.specificity == doctest::Approx(96.0 / 97));
    CHECK(m.flags == 0);
}

TEST_CASE("metrics: perfect prediction") {
    const auto m = compute_metrics({30, 0, 0, 70, 100});
    CHECK(m.dice == 1.0);
    CHECK(m.mcc == 1.0);
    CHECK(m.sensitivity == 1.0);
    CHECK(m.specificity == 1.0);
}

TEST_CASE("metrics: empty ground truth and empty prediction") {
    const auto m = compute_metrics({0, 0, 0, 100, 100});
    CHECK(m.dice == 1.0);
    CHECK(m.mcc == 1.0);
    CHECK(m.specificity == 1.0);
    CHECK(m.sensitivity == 1.0);
    CHECK((m.flags & kFlagDice));
    CHECK((m.flags & kFlagMcc));
    CHECK((m.flags & kFlagSensitivity));
    CHECK_FALSE((m.flags & kFlagSpecificity));
    CHECK(flag_string(m.flags).find("dice") != std::string::npos);

    // Empty ground truth with false positives: the limit breaks the other way.
    const auto fp = compute_metrics({0, 3, 0, 97, 100});
    CHECK(fp.dice == 0.0);
    CHECK(fp.mcc == 0.0);
    CHECK(fp.sensitivity == 0.0);
}

TEST_CASE("metric properties on random masks") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        auto [pred, gt] = oracle::random_pair(rng);
        for (auto r : kAllRegions) {
            const auto c = confusion(region_mask(pred, r), region_mask(gt, r));
            CHECK(c.tp + c.fp + c.fn + c.tn == c.universe);
            const auto m = compute_metrics(c);
            CHECK(m.mcc >= -1.0);
            CHECK(m.mcc <= 1.0);
            CHECK(std::abs(m.dice - oracle::dice_from_sets(pred, gt, r)) <= 1e-12);
            const bool same = region_mask(pred, r).pixels == region_mask(gt, r).pixels;
            const auto n = region_mask(gt, r).count();
            if (n > 0 && n < gt.size()) CHECK((m.mcc == 1.0) == same);
        }
    }
}

TEST_CASE("adding a correct positive never lowers dice") {
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        auto [pred, gt] = oracle::random_pair(rng);
        auto p = region_mask(pred, Region::kComplete);
        const auto g = region_mask(gt, Region::kComplete);
        double prev = compute_metrics(confusion(p, g)).dice;
        for (std::size_t k = 0; k < p.pixels.size(); ++k) {
            if (!g.pixels[k] || p.pixels[k]) continue;
            p.pixels[k] = 1;
            const double now = compute_metrics(confusion(p, g)).dice;
            CHECK(now >= prev);
            prev = now;
        }
    }
}

TEST_CASE("metrics are invariant under a shared pixel permutation") {
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        auto [pred, gt] = oracle::random_pair(rng);
        auto pp = pred, gg = gt;
        for (std::size_t k = pp.pixels.size(); k > 1; --k) {
            const std::size_t j = rng.next() % k;
            std::swap(pp.pixels[k - 1], pp.pixels[j]);
            std::swap(gg.pixels[k - 1], gg.pixels[j]);
        }
        for (auto r : kAllRegions)
            CHECK(confusion(region_mask(pred, r), region_mask(gt, r)) == confusion(region_mask(pp, r), region_mask(gg, r)));
    }
}

TEST_CASE("summaries: mean and sample standard deviation") {
    const auto ms = mean_std({0.4, 0.8});
    CHECK(ms.mean == doctest::Approx(0.6));
    CHECK(ms.std == doctest::Approx(0.28284271).epsilon(1e-6));
    CHECK(mean_std({0.5}).std == 0.0);
    CHECK(format_mean_std({0.5, 0.25}) == "0.5000±0.2500");
}

TEST_CASE("evaluate_split: all-perfect fixture") {
    Rng rng(6);
    std::vector<LabeledItem> items;
    for (int i = 0; i < 5; ++i) items.push_back({"id" + std::to_string(i), testgen::blocky_label(rng, 16, 16)});
    for (auto& it : items) it.label.at(0, 0) = kUlcer, it.label.at(1, 0) = kSurroundingSkin;
    const auto ev = evaluate_split(items, items);
    REQUIRE(ev.summary.size() == 3);
    for (const auto& s : ev.summary) {
        CHECK(s.images == 5);
        CHECK(s.dice.mean == 1.0);
        CHECK(s.dice.std == 0.0);
        CHECK(s.mcc.mean == 1.0);
    }
}

TEST_CASE("evaluate_split: healthy images with empty predictions have specificity 1") {
    std::vector<LabeledItem> items{{"h1", LabelImage(8, 8)}, {"h2", LabelImage(8, 8)}};
    for (const auto& s : evaluate_split(items, items).summary) CHECK(s.specificity.mean == 1.0);
}

TEST_CASE("evaluate_split: sorted output and unpaired items") {
    Rng rng(7);
    std::vector<LabeledItem> gt{{"b", testgen::blocky_label(rng, 8, 8)}, {"a", testgen::blocky_label(rng, 8, 8)}};
    const auto ev = evaluate_split(gt, gt);
    REQUIRE(ev.per_image.size() == 6);
    CHECK(ev.per_image.front().id == "a");
    CHECK(ev.per_image.back().id == "b");
    std::vector<LabeledItem> pred{gt[0]};
    CHECK_THROWS_AS(evaluate_split(pred, gt), DataError);
}

TEST_CASE("histogram counts every value once") {
    const auto h = dice_histogram({0.0, 0.05, 0.5, 0.99, 1.0, 1.0});
    CHECK(h.edges.size() == 11);
    CHECK(h.counts.front() == 2);
    CHECK(h.counts.back() == 3);
    std::size_t total = 0;
    for (auto c : h.counts) total += c;
    CHECK(total == 6);
}

TEST_CASE("CSV writers use the fixed headers") {
    const auto dir = std::filesystem::temp_directory_path() / "fcnseg_unit_csv";
    std::filesystem::create_directories(dir);
    std::vector<LabeledItem> items{{"x", LabelImage(4, 4, 1)}};
    const auto ev = evaluate_split(items, items);
    write_per_image_csv(dir / "p.csv", ev.per_image);
    write_summary_csv(dir / "s.csv", "fcn-8s", ev.summary);
    std::string line;
    std::ifstream p(dir / "p.csv");
    std::getline(p, line);
    CHECK(line == kPerImageHeader);
    std::ifstream s(dir / "s.csv");
    std::getline(s, line);
    CHECK(line == kSummaryHeader);
    std::getline(s, line);
    CHECK(line.rfind("fcn-8s,complete,", 0) == 0);
}
