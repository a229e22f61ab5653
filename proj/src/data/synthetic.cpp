#include "fcnseg/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>

#include "fcnseg/errors.hpp"

namespace fcnseg {
namespace {

using Color = std::array<double, 3>;

struct Draw {
    std::mt19937_64 rng;

    Draw(std::uint64_t seed, std::uint64_t index, std::uint32_t stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), stream};
        rng.seed(seq);
    }

    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }
    double normal(double sigma) { return std::normal_distribution<double>(0.0, sigma)(rng); }
    int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); }
    bool chance(double p) { return uniform(0.0, 1.0) < p; }
};

/// Smooth random field in [0,1]: bilinear interpolation of a coarse random grid.
class ValueNoise {
public:
    ValueNoise(Draw& d, int size, double cell) : cell_(cell), n_(static_cast<int>(std::ceil(size / cell)) + 2) {
        grid_.resize(static_cast<std::size_t>(n_) * n_);
        for (auto& v : grid_) v = d.uniform(0.0, 1.0);
    }

    double at(double x, double y) const {
        const double gx = x / cell_, gy = y / cell_;
        const int x0 = static_cast<int>(gx), y0 = static_cast<int>(gy);
        const double fx = gx - x0, fy = gy - y0;
        auto g = [&](int i, int j) { return grid_[static_cast<std::size_t>(std::min(j, n_ - 1)) * n_ + std::min(i, n_ - 1)]; };
        const double top = g(x0, y0) * (1 - fx) + g(x0 + 1, y0) * fx;
        const double bottom = g(x0, y0 + 1) * (1 - fx) + g(x0 + 1, y0 + 1) * fx;
        return top * (1 - fy) + bottom * fy;
    }

private:
    double cell_;
    int n_;
    std::vector<double> grid_;
};

/// r(θ) = R · (1 + Σ a_h cos(hθ + φ_h)) for h = 2..4.
struct StarShape {
    double cx = 0, cy = 0, radius = 0;
    std::array<double, 3> amp{};
    std::array<double, 3> phase{};

    static StarShape random(Draw& d, double cx, double cy, double radius, double wobble) {
        StarShape s{cx, cy, radius, {}, {}};
        double budget = wobble;
        for (int h = 0; h < 3; ++h) {
            s.amp[h] = d.uniform(0.0, budget);
            budget -= s.amp[h] * 0.5;
            s.phase[h] = d.uniform(0.0, 2 * std::numbers::pi);
        }
        return s;
    }

    double r(double theta) const {
        double f = 1.0;
        for (int h = 0; h < 3; ++h) f += amp[h] * std::cos((h + 2) * theta + phase[h]);
        return radius * f;
    }

    double max_r() const { return radius * (1.0 + amp[0] + amp[1] + amp[2]); }

    Polygon polygon(double grow, int vertices = 48) const {
        Polygon p;
        for (int i = 0; i < vertices; ++i) {
            const double t = 2 * std::numbers::pi * i / vertices;
            const double rr = r(t) + grow;
            // Quantized to 1/64 px so serialized coordinates stay short.
            p.push_back({std::round((cx + rr * std::cos(t)) * 64) / 64, std::round((cy + rr * std::sin(t)) * 64) / 64});
        }
        return p;
    }
};

std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

Color mix(const Color& a, const Color& b, double t) {
    return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

struct Ellipse {
    double cx, cy, a, b, angle;

    /// Normalized radius: < 1 inside.
    double rho(double x, double y) const {
        const double dx = x - cx, dy = y - cy;
        const double c = std::cos(angle), s = std::sin(angle);
        const double u = (dx * c + dy * s) / a, v = (-dx * s + dy * c) / b;
        return std::sqrt(u * u + v * v);
    }
};

Color skin_tone(Draw& d) {
    if (d.chance(0.3)) return {d.uniform(120, 160), d.uniform(80, 110), d.uniform(60, 90)};
    return {d.uniform(185, 230), d.uniform(145, 180), d.uniform(115, 155)};
}

/// Closes the label so no ulcer pixel has a background 8-neighbour.
void close_ring(LabelImage& label) {
    const LabelImage before = label;
    for (int y = 0; y < label.height; ++y) {
        for (int x = 0; x < label.width; ++x) {
            if (before.at(x, y) != kUlcer) continue;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= label.width || ny >= label.height) continue;
                    if (label.at(nx, ny) == kBackground) label.at(nx, ny) = kSurroundingSkin;
                }
            }
        }
    }
}

}  // namespace

SyntheticSample generate_synthetic_sample(std::uint64_t seed, std::size_t index, int size, bool healthy) {
    if (size < 32) throw ConfigError("synthetic image size must be >= 32, got " + std::to_string(size));
    Draw d(seed, index, healthy ? 2u : 1u);
    const double scale = size / 64.0;

    SyntheticSample s;
    s.id = std::string(healthy ? "healthy-" : "dfu-") + std::to_string(index);
    s.healthy = healthy;
    s.image = RgbImage(size, size);

    const Color backdrop{d.uniform(15, 60), d.uniform(20, 65), d.uniform(30, 80)};
    const Color skin = skin_tone(d);
    const Ellipse foot{size / 2.0 + d.uniform(-0.08, 0.08) * size, size / 2.0 + d.uniform(-0.08, 0.08) * size,
                       d.uniform(0.38, 0.52) * size, d.uniform(0.30, 0.42) * size, d.uniform(0, std::numbers::pi)};

    RegionAnnotation& a = s.annotation;
    a.image_id = s.id;
    a.image_file = s.id + ".png";
    a.width = a.height = size;
    a.healthy = healthy;

    StarShape ulcer{};
    double margin = 0;
    if (!healthy) {
        const double radius = d.uniform(6.0, 11.0) * scale;
        margin = d.uniform(3.0, 6.0) * scale;
        const double wobble = 0.2;
        const double reach = radius * (1 + wobble * 1.75) + margin + 4;
        double cx = size / 2.0, cy = size / 2.0;
        for (int attempt = 0; attempt < 64; ++attempt) {
            const double tx = d.uniform(reach, size - reach), ty = d.uniform(reach, size - reach);
            if (foot.rho(tx, ty) < 0.5) {
                cx = tx;
                cy = ty;
                break;
            }
        }
        ulcer = StarShape::random(d, cx, cy, radius, wobble);
        a.ulcer.push_back(ulcer.polygon(0));
        a.surrounding_skin.push_back(ulcer.polygon(margin));
        a.roi = ulcer.polygon(margin + 3);
        s.label = rasterize(a, size, size);
        close_ring(s.label);
    } else {
        a.roi = {{0, 0}, {static_cast<double>(size), 0}, {static_cast<double>(size), static_cast<double>(size)},
                 {0, static_cast<double>(size)}};
        s.label = LabelImage(size, size, kBackground);
    }

    // Pale callus patch that is never labelled.
    std::optional<StarShape> callus;
    if (d.chance(0.35)) {
        for (int attempt = 0; attempt < 32 && !callus; ++attempt) {
            const double cx = d.uniform(0, size), cy = d.uniform(0, size);
            const double r = d.uniform(3.0, 6.0) * scale;
            if (foot.rho(cx, cy) > 0.8) continue;
            if (!healthy && std::hypot(cx - ulcer.cx, cy - ulcer.cy) < ulcer.max_r() + margin + r + 4) continue;
            callus = StarShape::random(d, cx, cy, r, 0.25);
        }
    }

    const Color inflamed{d.uniform(205, 240), d.uniform(70, 110), d.uniform(75, 105)};
    const Color wound{d.uniform(140, 185), d.uniform(25, 60), d.uniform(25, 55)};
    const Color slough{d.uniform(195, 225), d.uniform(170, 200), d.uniform(70, 110)};
    const Color callus_color{d.uniform(225, 245), d.uniform(215, 235), d.uniform(195, 220)};
    const ValueNoise shading(d, size, 20 * scale);
    const ValueNoise texture(d, size, 3 * scale);
    const ValueNoise grain(d, size, 1.5 * scale);
    const double noise_sigma = d.uniform(4, 9);

    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            const double rho = foot.rho(px, py);
            Color c = backdrop;
            if (rho < 1.0) {
                // Darker towards the rim of the foot.
                c = mix(skin, mix(skin, backdrop, 0.35), std::clamp((rho - 0.7) / 0.3, 0.0, 1.0));
            } else if (rho < 1.06) {
                c = mix(mix(skin, backdrop, 0.35), backdrop, (rho - 1.0) / 0.06);
            }
            if (callus) {
                const double t = std::atan2(py - callus->cy, px - callus->cx);
                if (std::hypot(px - callus->cx, py - callus->cy) < callus->r(t)) c = mix(c, callus_color, 0.9);
            }
            const auto cls = s.label.at(x, y);
            if (cls == kSurroundingSkin) {
                c = mix(inflamed, skin, 0.25 * texture.at(px, py));
            } else if (cls == kUlcer) {
                const double t = texture.at(px, py);
                c = t > 0.62 ? mix(wound, slough, std::min(1.0, (t - 0.62) * 4)) : wound;
                c = mix(c, Color{60, 15, 15}, 0.3 * grain.at(px, py));
            }
            const double shade = 0.85 + 0.3 * shading.at(px, py);
            std::uint8_t* p = s.image.px(x, y);
            for (int k = 0; k < 3; ++k) p[k] = clamp_byte(c[k] * shade + d.normal(noise_sigma));
        }
    }
    return s;
}

std::vector<SyntheticSample> generate_synthetic_dataset(std::size_t count, int image_size, std::uint64_t seed,
                                                        bool healthy) {
    if (count < 1) throw ConfigError("synthetic dataset needs count >= 1");
    std::vector<SyntheticSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(generate_synthetic_sample(seed, i, image_size, healthy));
    return out;
}

namespace {

struct Family {
    Color base;
    Color accent;
    double cell;  // texture scale in px at 64×64
};

const std::array<Family, 4>& families() {
    static const std::array<Family, 4> f{{
        {{170, 40, 40}, {120, 20, 20}, 2.0},    // granular red
        {{215, 190, 90}, {170, 140, 50}, 4.0},  // yellow slough
        {{70, 45, 35}, {30, 20, 15}, 6.0},      // dark necrotic
        {{230, 150, 160}, {200, 110, 130}, 1.5} // pink fine-grained
    }};
    return f;
}

RgbImage surrogate_background(Draw& d, int size) {
    RgbImage img(size, size);
    const Color a{d.uniform(30, 220), d.uniform(30, 220), d.uniform(30, 220)};
    const Color b{d.uniform(30, 220), d.uniform(30, 220), d.uniform(30, 220)};
    const ValueNoise field(d, size, d.uniform(10, 30) * size / 64.0);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const Color c = mix(a, b, field.at(x + 0.5, y + 0.5));
            for (int k = 0; k < 3; ++k) img.px(x, y)[k] = clamp_byte(c[k] + d.normal(6));
        }
    }
    return img;
}

void paint_blob(Draw& d, RgbImage& img, LabelImage* label, const StarShape& shape, int family) {
    const Family& f = families()[family];
    const double scale = img.width / 64.0;
    const ValueNoise tex(d, img.width, f.cell * scale);
    const Color base{f.base[0] + d.uniform(-20, 20), f.base[1] + d.uniform(-20, 20), f.base[2] + d.uniform(-20, 20)};
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            const double t = std::atan2(py - shape.cy, px - shape.cx);
            if (std::hypot(px - shape.cx, py - shape.cy) >= shape.r(t)) continue;
            const Color c = mix(base, f.accent, tex.at(px, py));
            for (int k = 0; k < 3; ++k) img.px(x, y)[k] = clamp_byte(c[k] + d.normal(6));
            if (label) label->at(x, y) = static_cast<std::uint8_t>(family + 1);
        }
    }
}

}  // namespace

std::vector<SurrogateSample> generate_segmentation_surrogate(std::size_t count, int size, std::uint64_t seed) {
    if (size < 32) throw ConfigError("surrogate image size must be >= 32");
    std::vector<SurrogateSample> out;
    const double scale = size / 64.0;
    for (std::size_t i = 0; i < count; ++i) {
        Draw d(seed, i, 3u);
        SurrogateSample s;
        s.id = "surseg-" + std::to_string(i);
        s.image = surrogate_background(d, size);
        s.label = LabelImage(size, size, kBackground);
        const int objects = d.integer(1, 3);
        for (int k = 0; k < objects; ++k) {
            const double r = d.uniform(5.0, 14.0) * scale;
            const auto shape = StarShape::random(d, d.uniform(r, size - r), d.uniform(r, size - r), r, 0.3);
            paint_blob(d, s.image, &s.label, shape, d.integer(0, 3));
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<SurrogateSample> generate_classification_surrogate(std::size_t count, int size, std::uint64_t seed) {
    if (size < 32) throw ConfigError("surrogate image size must be >= 32");
    std::vector<SurrogateSample> out;
    const double scale = size / 64.0;
    for (std::size_t i = 0; i < count; ++i) {
        Draw d(seed, i, 4u);
        SurrogateSample s;
        s.id = "surcls-" + std::to_string(i);
        s.image = surrogate_background(d, size);
        s.class_label = static_cast<int>(i % kSurrogateClsClasses);
        const double r = d.uniform(10.0, 18.0) * scale;
        const auto shape = StarShape::random(d, d.uniform(r, size - r), d.uniform(r, size - r), r, 0.3);
        paint_blob(d, s.image, nullptr, shape, s.class_label);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace fcnseg
