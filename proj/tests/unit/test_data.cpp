#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "fcnseg/annotation.hpp"
#include "fcnseg/dataset.hpp"
#include "fcnseg/errors.hpp"
#include "fcnseg/folds.hpp"
#include "fcnseg/png.hpp"
#include "fcnseg/synthetic.hpp"
#include "testgen.hpp"

using namespace fcnseg;
using testgen::Rng;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> make_ids(std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("img" + std::to_string(i));
    return ids;
}

Polygon regular(double cx, double cy, double r, int sides, double phase = 0.0) {
    Polygon p;
    for (int i = 0; i < sides; ++i) {
        const double t = phase + 2 * std::numbers::pi * i / sides;
        p.push_back({cx + r * std::cos(t), cy + r * std::sin(t)});
    }
    return p;
}

Polygon rect(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }

std::size_t count(const LabelImage& l, std::uint8_t v) { return std::count(l.pixels.begin(), l.pixels.end(), v); }

fs::path scratch_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("fcnseg_unit_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

// ---- palette and PNG ------------------------------------------------------------

TEST_CASE("palette uses the VOC bytes for the three classes") {
    const auto& p = voc_palette();
    REQUIRE(p.size() == 256);
    CHECK(p[0] == Rgb{0, 0, 0});
    CHECK(p[1] == Rgb{128, 0, 0});
    CHECK(p[2] == Rgb{0, 128, 0});
}

TEST_CASE("all-background label decodes to zeros") {
    const LabelImage bg(17, 9);
    Palette pal;
    const auto back = decode_paletted_png(encode_paletted_png(bg), &pal);
    CHECK(back == bg);
    CHECK(pal[1] == Rgb{128, 0, 0});
}

TEST_CASE("paletted PNG round trip is bit-exact") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const int classes = rng.coin(0.8) ? 3 : 256;
        LabelImage l = testgen::random_label(rng, rng.integer(1, 70), rng.integer(1, 70), classes);
        if (rng.coin(0.2)) l.pixels[0] = kIgnoreLabel;
        REQUIRE(decode_paletted_png(encode_paletted_png(l)) == l);
    }
}

TEST_CASE("RGB PNG round trip and non-palette rejection") {
    Rng rng(2);
    RgbImage img(13, 7);
    for (auto& b : img.rgb) b = static_cast<std::uint8_t>(rng.integer(0, 255));
    const auto bytes = encode_rgb_png(img);
    CHECK(decode_rgb_png(bytes) == img);
    CHECK_THROWS_AS(decode_paletted_png(bytes), FormatError);
    auto corrupt = bytes;
    corrupt[corrupt.size() / 2] ^= 0xFF;
    CHECK_THROWS_AS(decode_rgb_png(corrupt), FormatError);
}

TEST_CASE("label value without a palette entry is a data error") {
    LabelImage l(2, 2);
    l.pixels[3] = 5;
    CHECK_THROWS_AS(encode_paletted_png(l, Palette{{0, 0, 0}, {1, 1, 1}}), DataError);
}

// ---- annotations ----------------------------------------------------------------

TEST_CASE("minimal annotation parses to one ROI and one ulcer polygon") {
    const std::string xml = R"(<annotation>
  <image id="a1" file="a1.png" width="20" height="10"/>
  <region class="roi"><point x="1" y="1"/><point x="19" y="1"/><point x="19" y="9"/><point x="1" y="9"/></region>
  <region class="ulcer"><point x="5" y="3"/><point x="8" y="3"/><point x="8" y="6"/></region>
</annotation>)";
    const auto a = parse_annotation(xml);
    CHECK(a.image_id == "a1");
    CHECK(a.width == 20);
    CHECK(a.roi.size() == 4);
    REQUIRE(a.ulcer.size() == 1);
    CHECK(a.ulcer[0][1] == Point{8, 3});
    CHECK(a.surrounding_skin.empty());
}

TEST_CASE("ingestion errors carry the element path") {
    const std::string outside = R"(<annotation>
  <image id="a" width="20" height="20"/>
  <region class="roi"><point x="1" y="1"/><point x="10" y="1"/><point x="10" y="10"/><point x="1" y="10"/></region>
  <region class="ulcer"><point x="12" y="12"/><point x="15" y="12"/><point x="15" y="15"/></region>
</annotation>)";
    try {
        (void)parse_annotation(outside);
        FAIL("expected IngestionError");
    } catch (const IngestionError& e) {
        CHECK(e.element_path().rfind("annotation/region[2]", 0) == 0);
    }

    const std::string oob = R"(<annotation>
  <image id="a" width="20" height="20"/>
  <region class="roi"><point x="1" y="1"/><point x="30" y="1"/><point x="10" y="10"/></region>
</annotation>)";
    try {
        (void)parse_annotation(oob);
        FAIL("expected IngestionError");
    } catch (const IngestionError& e) {
        CHECK(e.element_path().find("region[1]/point[2]") != std::string::npos);
    }

    CHECK_THROWS_AS(parse_annotation("<annotation><image id=\"a\""), IngestionError);
}

TEST_CASE("serialize/parse round trip over a generated corpus") {
    for (std::size_t i = 0; i < 20; ++i) {
        const auto s = generate_synthetic_sample(77, i, 64 + 16 * static_cast<int>(i % 3), i % 5 == 4);
        const auto text = serialize_annotation(s.annotation);
        const auto parsed = parse_annotation(text);
        CHECK(parsed == s.annotation);
        CHECK(serialize_annotation(parsed) == text);
    }
}

TEST_CASE("registered importers handle foreign root elements") {
    register_annotation_importer("foreign", [](std::string_view) {
        RegionAnnotation a;
        a.image_id = "f";
        a.width = a.height = 4;
        a.healthy = true;
        return a;
    });
    CHECK(parse_annotation("<foreign/>").image_id == "f");
    CHECK_THROWS_AS(parse_annotation("<unknown/>"), IngestionError);
}

TEST_CASE("rectangle ulcer rasterizes to an exact block") {
    RegionAnnotation a;
    a.image_id = "r";
    a.width = 12;
    a.height = 10;
    a.roi = rect(0, 0, 12, 10);
    a.ulcer.push_back(rect(2, 3, 7, 8));
    const auto l = rasterize(a, 12, 10);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 12; ++x) CHECK(l.at(x, y) == ((x >= 2 && x < 7 && y >= 3 && y < 8) ? kUlcer : kBackground));
}

TEST_CASE("disc inside annulus matches analytic areas within a perimeter band") {
    const double r1 = 9.5, r2 = 17.25;
    RegionAnnotation a;
    a.image_id = "d";
    a.width = a.height = 48;
    a.roi = rect(0, 0, 48, 48);
    a.surrounding_skin.push_back(regular(24.3, 23.7, r2, 720));
    a.ulcer.push_back(regular(24.3, 23.7, r1, 720));
    const auto l = rasterize(a, 48, 48);
    const double ulcer_area = std::numbers::pi * r1 * r1;
    const double skin_area = std::numbers::pi * (r2 * r2 - r1 * r1);
    CHECK(std::abs(count(l, kUlcer) - ulcer_area) <= 2 * std::numbers::pi * r1);
    CHECK(std::abs(count(l, kSurroundingSkin) - skin_area) <= 2 * std::numbers::pi * (r1 + r2));
    // Pixel centres decide membership exactly.
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x) {
            const double d = std::hypot(x + 0.5 - 24.3, y + 0.5 - 23.7);
            if (d < r1 - 0.05) CHECK(l.at(x, y) == kUlcer);
            if (d > r2 + 0.05) CHECK(l.at(x, y) == kBackground);
        }
}

TEST_CASE("overlap of ulcer and skin goes to the ulcer") {
    RegionAnnotation a;
    a.image_id = "o";
    a.width = a.height = 20;
    a.roi = rect(0, 0, 20, 20);
    a.surrounding_skin.push_back(rect(2, 2, 12, 12));
    a.ulcer.push_back(rect(8, 8, 16, 16));
    const auto l = rasterize(a, 20, 20);
    CHECK(l.at(9, 9) == kUlcer);
    CHECK(l.at(3, 3) == kSurroundingSkin);
    CHECK(l.at(15, 15) == kUlcer);
}

TEST_CASE("rasterization ignores where the vertex list starts") {
    Rng rng(5);
    for (int round = 0; round < 20; ++round) {
        Polygon p = regular(rng.uniform(10, 20), rng.uniform(10, 20), rng.uniform(3, 9), rng.integer(3, 12), rng.unit());
        LabelImage a(32, 32), b(32, 32);
        fill_polygon(p, 1, a);
        std::rotate(p.begin(), p.begin() + rng.integer(0, static_cast<int>(p.size()) - 1), p.end());
        fill_polygon(p, 1, b);
        CHECK(a == b);
        std::reverse(p.begin(), p.end());
        LabelImage c(32, 32);
        fill_polygon(p, 1, c);
        CHECK(a == c);
    }
}

TEST_CASE("zero-area ROI is an ingestion error") {
    RegionAnnotation a;
    a.image_id = "z";
    a.width = a.height = 10;
    a.roi = {{1, 1}, {5, 5}, {9, 9}};
    CHECK_THROWS_AS(rasterize(a, 10, 10), IngestionError);
}

TEST_CASE("polygon helpers") {
    CHECK(polygon_area(rect(0, 0, 3, 2)) == doctest::Approx(6.0));
    CHECK(polygon_is_simple(rect(0, 0, 3, 2)));
    CHECK_FALSE(polygon_is_simple({{0, 0}, {4, 4}, {4, 0}, {0, 4}}));
    CHECK(point_in_polygon(rect(0, 0, 3, 2), {1, 1}));
    CHECK(point_in_polygon(rect(0, 0, 3, 2), {3, 1}));
    CHECK_FALSE(point_in_polygon(rect(0, 0, 3, 2), {4, 1}));
}

// ---- fold plans -----------------------------------------------------------------

namespace {

void check_invariants(const FoldPlan& plan) {
    const std::size_t n = plan.ids.size();
    const std::set<std::string> all(plan.ids.begin(), plan.ids.end());
    std::set<std::string> tests;
    REQUIRE(plan.folds.size() == static_cast<std::size_t>(kNumFolds));
    for (const auto& f : plan.folds) {
        std::set<std::string> seen;
        for (auto role : {FoldRole::kTrain, FoldRole::kValidation, FoldRole::kTest})
            for (const auto& id : f.items(role)) REQUIRE(seen.insert(id).second);
        REQUIRE(seen == all);
        for (const auto& id : f.test) REQUIRE(tests.insert(id).second);
        REQUIRE(f.test.size() >= n / 5);
        REQUIRE(f.test.size() <= (n + 4) / 5);
        REQUIRE(std::abs(static_cast<double>(f.validation.size()) - 0.1 * static_cast<double>(n)) <= 1.5);
    }
    REQUIRE(tests == all);
}

}  // namespace

TEST_CASE("600 items give 420/60/120 in every fold") {
    const auto plan = make_fold_plan(make_ids(600), 1);
    for (const auto& f : plan.folds) {
        CHECK(f.train.size() == 420);
        CHECK(f.validation.size() == 60);
        CHECK(f.test.size() == 120);
    }
    check_invariants(plan);
}

TEST_CASE("fold plans keep their invariants across sizes") {
    for (std::size_t n = 10; n <= 120; ++n) check_invariants(make_fold_plan(make_ids(n), n));
    Rng rng(3);
    for (int draw = 0; draw < 25; ++draw) {
        const std::size_t n = static_cast<std::size_t>(rng.integer(121, 10000));
        CAPTURE(n);
        check_invariants(make_fold_plan(make_ids(n), rng.next()));
    }
}

TEST_CASE("fold plans are seed-deterministic") {
    const auto ids = make_ids(50);
    CHECK(to_json(make_fold_plan(ids, 9)) == to_json(make_fold_plan(ids, 9)));
    for (std::uint64_t s = 0; s < 5; ++s) CHECK(to_json(make_fold_plan(ids, s)) != to_json(make_fold_plan(ids, s + 100)));
}

TEST_CASE("fold plan errors and persistence") {
    CHECK_THROWS_AS(make_fold_plan(make_ids(9), 1), ConfigError);
    auto dup = make_ids(12);
    dup[3] = dup[4];
    CHECK_THROWS_AS(make_fold_plan(dup, 1), ConfigError);

    const auto plan = make_fold_plan(make_ids(40), 4);
    const auto path = scratch_dir("folds") / "plan.json";
    save_fold_plan(path, plan);
    CHECK(to_json(load_fold_plan(path)) == to_json(plan));

    auto broken = plan;
    broken.folds[0].test.push_back(broken.folds[0].train.front());
    CHECK_THROWS_AS(check_fold_plan(broken), DataError);
}

// ---- dataset plumbing -----------------------------------------------------------

TEST_CASE("resizing keeps labels categorical and images in range") {
    Rng rng(6);
    const auto l = testgen::blocky_label(rng, 40, 30);
    const auto small = resize_nearest(l, 20, 15);
    for (auto v : small.pixels) CHECK(v <= 2);
    CHECK(resize_nearest(l, 40, 30) == l);
    RgbImage img(10, 10);
    for (auto& b : img.rgb) b = 200;
    const auto big = resize_bilinear(img, 33, 21);
    for (auto b : big.rgb) CHECK(b == 200);
}

TEST_CASE("image normalization") {
    RgbImage img(1, 1);
    img.px(0, 0)[0] = 0;
    img.px(0, 0)[1] = 255;
    img.px(0, 0)[2] = 51;
    const Tensor t = image_to_tensor(img);
    CHECK(t.at(0, 0, 0, 0) == doctest::Approx(-2.0));
    CHECK(t.at(0, 1, 0, 0) == doctest::Approx(2.0));
    CHECK(t.at(0, 2, 0, 0) == doctest::Approx((0.2 - 0.5) / 0.25));
}

TEST_CASE("manifest round trip with relative paths") {
    const auto dir = scratch_dir("manifest");
    std::vector<ManifestEntry> entries{{"a", dir / "images/a.png", dir / "labels/a.png", false},
                                       {"b", dir / "images/b.png", {}, true}};
    write_manifest(dir / "manifest.jsonl", entries);
    const auto back = read_manifest(dir / "manifest.jsonl");
    CHECK(back == entries);
    std::ofstream(dir / "dup.jsonl") << R"({"id":"a","image":"x.png"})" << "\n" << R"({"id":"a","image":"y.png"})" << "\n";
    CHECK_THROWS_AS(read_manifest(dir / "dup.jsonl"), DataError);
}

TEST_CASE("make_sample rejects mismatched label extents and foreign classes") {
    RgbImage img(8, 8);
    CHECK_THROWS_AS(make_sample("x", img, LabelImage(7, 8)), ShapeError);
    LabelImage bad(8, 8);
    bad.pixels[0] = 7;
    CHECK_THROWS_AS(make_sample("x", img, bad), DataError);
}

// ---- synthetic generator --------------------------------------------------------

TEST_CASE("healthy synthetic samples carry empty labels") {
    for (std::size_t i = 0; i < 10; ++i) {
        const auto s = generate_synthetic_sample(3, i, 64, true);
        CHECK(s.healthy);
        CHECK(count(s.label, 0) == s.label.size());
    }
}

TEST_CASE("ulcer area fraction stays within bounds over 200 samples") {
    for (const auto& s : generate_synthetic_dataset(200, 64, 42)) {
        const double f = static_cast<double>(count(s.label, kUlcer)) / static_cast<double>(s.label.size());
        CAPTURE(s.id);
        CHECK(f >= 0.005);
        CHECK(f <= 0.15);
        CHECK(count(s.label, kSurroundingSkin) > 0);
    }
}

TEST_CASE("synthetic labels agree with their annotations") {
    // The generator only promotes background next to the ulcer to skin, so the
    // raster of the polygons differs from the label in exactly those pixels.
    for (std::size_t i = 0; i < 10; ++i) {
        const auto s = generate_synthetic_sample(5, i, 64);
        const auto raw = rasterize(s.annotation, 64, 64);
        for (std::size_t p = 0; p < raw.size(); ++p) {
            if (raw.pixels[p] == s.label.pixels[p]) continue;
            CHECK(raw.pixels[p] == kBackground);
            CHECK(s.label.pixels[p] == kSurroundingSkin);
        }
    }
}

TEST_CASE("generator is deterministic in (seed, index)") {
    const auto a = generate_synthetic_sample(9, 4, 64);
    const auto b = generate_synthetic_sample(9, 4, 64);
    CHECK(a.image == b.image);
    CHECK(a.label == b.label);
    CHECK_FALSE(generate_synthetic_sample(9, 5, 64).image == a.image);
}
