#include "fcnseg/annotation.hpp"

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <charconv>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include "fcnseg/errors.hpp"

namespace fcnseg {
namespace {

namespace pt = boost::property_tree;

std::mutex& importer_mutex() {
    static std::mutex m;
    return m;
}

std::map<std::string, AnnotationImporter>& importers() {
    static std::map<std::string, AnnotationImporter> registry;
    return registry;
}

std::string attr(const pt::ptree& node, const std::string& name, const std::string& path, bool required = true) {
    const auto v = node.get_optional<std::string>("<xmlattr>." + name);
    if (!v) {
        if (required) throw IngestionError(path, "missing attribute '" + name + "'");
        return {};
    }
    return *v;
}

double parse_number(const std::string& text, const std::string& path) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    while (first != last && *first == ' ') ++first;
    while (last != first && last[-1] == ' ') --last;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
        throw IngestionError(path, "not a finite number: '" + text + "'");
    }
    return v;
}

int parse_extent(const std::string& text, const std::string& path) {
    const double v = parse_number(text, path);
    if (v < 1 || v > 1 << 16 || v != std::floor(v)) throw IngestionError(path, "bad image extent '" + text + "'");
    return static_cast<int>(v);
}

bool parse_bool(const std::string& text, const std::string& path) {
    if (text.empty() || text == "false" || text == "0") return false;
    if (text == "true" || text == "1") return true;
    throw IngestionError(path, "not a boolean: '" + text + "'");
}

double cross(Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

int sign(double v) { return (v > 0) - (v < 0); }

bool on_segment(Point a, Point b, Point p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

/// Any shared point, including touching and collinear overlap.
bool segments_touch(Point a, Point b, Point c, Point d) {
    const int d1 = sign(cross(c, d, a)), d2 = sign(cross(c, d, b));
    const int d3 = sign(cross(a, b, c)), d4 = sign(cross(a, b, d));
    if (d1 * d2 < 0 && d3 * d4 < 0) return true;
    if (d1 == 0 && on_segment(c, d, a)) return true;
    if (d2 == 0 && on_segment(c, d, b)) return true;
    if (d3 == 0 && on_segment(a, b, c)) return true;
    if (d4 == 0 && on_segment(a, b, d)) return true;
    return false;
}

bool segments_cross_properly(Point a, Point b, Point c, Point d) {
    const int d1 = sign(cross(c, d, a)), d2 = sign(cross(c, d, b));
    const int d3 = sign(cross(a, b, c)), d4 = sign(cross(a, b, d));
    return d1 * d2 < 0 && d3 * d4 < 0;
}

void check_polygon(const Polygon& poly, int width, int height, const std::string& path) {
    if (poly.size() < 3) throw IngestionError(path, "polygon needs at least 3 points, got " + std::to_string(poly.size()));
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point p = poly[i];
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0 || p.y < 0 || p.x > width || p.y > height) {
            std::ostringstream msg;
            msg << "point (" << p.x << ", " << p.y << ") outside image " << width << "x" << height;
            throw IngestionError(path + "/point[" + std::to_string(i + 1) + "]", msg.str());
        }
    }
    if (!polygon_is_simple(poly)) throw IngestionError(path, "polygon is self-intersecting");
}

void check_inside_roi(const Polygon& poly, const Polygon& roi, const std::string& path) {
    for (std::size_t i = 0; i < poly.size(); ++i) {
        if (!point_in_polygon(roi, poly[i])) {
            throw IngestionError(path + "/point[" + std::to_string(i + 1) + "]", "vertex lies outside the ROI");
        }
    }
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point a = poly[i], b = poly[(i + 1) % poly.size()];
        for (std::size_t j = 0; j < roi.size(); ++j) {
            if (segments_cross_properly(a, b, roi[j], roi[(j + 1) % roi.size()])) {
                throw IngestionError(path, "polygon crosses the ROI boundary");
            }
        }
    }
}

std::string region_path(std::size_t index) { return "annotation/region[" + std::to_string(index) + "]"; }

RegionAnnotation parse_native(const pt::ptree& root) {
    RegionAnnotation a;
    a.healthy = parse_bool(attr(root, "healthy", "annotation", false), "annotation@healthy");

    const auto image = root.get_child_optional("image");
    if (!image) throw IngestionError("annotation", "missing <image> element");
    a.image_id = attr(*image, "id", "annotation/image");
    if (a.image_id.empty()) throw IngestionError("annotation/image", "empty image id");
    a.image_file = attr(*image, "file", "annotation/image", false);
    a.width = parse_extent(attr(*image, "width", "annotation/image"), "annotation/image@width");
    a.height = parse_extent(attr(*image, "height", "annotation/image"), "annotation/image@height");

    std::size_t region_index = 0;
    bool have_roi = false;
    for (const auto& [tag, node] : root) {
        if (tag != "region") continue;
        ++region_index;
        const std::string path = region_path(region_index);
        const std::string cls = attr(node, "class", path);
        Polygon poly;
        std::size_t point_index = 0;
        for (const auto& [ptag, pnode] : node) {
            if (ptag != "point") continue;
            ++point_index;
            const std::string ppath = path + "/point[" + std::to_string(point_index) + "]";
            poly.push_back({parse_number(attr(pnode, "x", ppath), ppath + "@x"),
                            parse_number(attr(pnode, "y", ppath), ppath + "@y")});
        }
        if (cls == "roi") {
            if (have_roi) throw IngestionError(path, "more than one ROI region");
            have_roi = true;
            a.roi = std::move(poly);
        } else if (cls == "ulcer") {
            a.ulcer.push_back(std::move(poly));
        } else if (cls == "surrounding_skin") {
            a.surrounding_skin.push_back(std::move(poly));
        } else {
            throw IngestionError(path + "@class", "unknown region class '" + cls + "'");
        }
    }
    validate_annotation(a);
    return a;
}

void append_number(std::string& out, double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

void append_region(std::string& out, const char* cls, const Polygon& poly) {
    out += "  <region class=\"";
    out += cls;
    out += "\">\n";
    for (const auto& p : poly) {
        out += "    <point x=\"";
        append_number(out, p.x);
        out += "\" y=\"";
        append_number(out, p.y);
        out += "\"/>\n";
    }
    out += "  </region>\n";
}

}  // namespace

RegionAnnotation parse_annotation(std::string_view xml) {
    pt::ptree tree;
    try {
        std::istringstream in{std::string(xml)};
        pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
    } catch (const pt::xml_parser_error& e) {
        throw IngestionError("line " + std::to_string(e.line()), "malformed XML: " + e.message());
    }
    std::string root_name;
    for (const auto& [tag, node] : tree) {
        if (tag == "<xmlcomment>") continue;
        root_name = tag;
        break;
    }
    if (root_name.empty()) throw IngestionError("/", "document has no root element");
    if (root_name == "annotation") return parse_native(tree.get_child("annotation"));

    AnnotationImporter importer;
    {
        std::lock_guard lock(importer_mutex());
        const auto it = importers().find(root_name);
        if (it != importers().end()) importer = it->second;
    }
    if (!importer) throw IngestionError(root_name, "no importer registered for root element <" + root_name + ">");
    RegionAnnotation a = importer(xml);
    validate_annotation(a);
    return a;
}

std::string serialize_annotation(const RegionAnnotation& a) {
    std::string out = "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<annotation healthy=\"";
    out += a.healthy ? "true" : "false";
    out += "\">\n  <image id=\"" + escape(a.image_id) + "\" file=\"" + escape(a.image_file) + "\" width=\"" +
           std::to_string(a.width) + "\" height=\"" + std::to_string(a.height) + "\"/>\n";
    if (!a.roi.empty()) append_region(out, "roi", a.roi);
    for (const auto& p : a.ulcer) append_region(out, "ulcer", p);
    for (const auto& p : a.surrounding_skin) append_region(out, "surrounding_skin", p);
    out += "</annotation>\n";
    return out;
}

void validate_annotation(const RegionAnnotation& a) {
    if (a.width < 1 || a.height < 1) throw IngestionError("annotation/image", "image extents must be positive");
    // Region indices follow serialization order: roi, ulcers, skin.
    std::size_t index = 0;
    if (!a.roi.empty()) check_polygon(a.roi, a.width, a.height, region_path(++index));
    if (a.roi.empty() && !a.healthy) throw IngestionError("annotation", "missing ROI region");
    if (a.healthy && !a.ulcer.empty()) throw IngestionError("annotation", "healthy image carries ulcer regions");
    auto check_class = [&](const std::vector<Polygon>& polys) {
        for (const auto& poly : polys) {
            const std::string path = region_path(++index);
            check_polygon(poly, a.width, a.height, path);
            if (!a.roi.empty()) check_inside_roi(poly, a.roi, path);
        }
    };
    check_class(a.ulcer);
    check_class(a.surrounding_skin);
}

void register_annotation_importer(const std::string& root_element, AnnotationImporter importer) {
    std::lock_guard lock(importer_mutex());
    importers()[root_element] = std::move(importer);
}

double polygon_area(const Polygon& poly) {
    double twice = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point a = poly[i], b = poly[(i + 1) % poly.size()];
        twice += a.x * b.y - b.x * a.y;
    }
    return std::abs(twice) / 2.0;
}

bool polygon_is_simple(const Polygon& poly) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = poly[i], b = poly[(i + 1) % n];
        if (a == b) return false;
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            const Point c = poly[j], d = poly[(j + 1) % n];
            if (adjacent) {
                // Neighbouring edges share one vertex; they may not fold back onto each other.
                const Point shared = j == i + 1 ? b : a;
                const Point far_ab = j == i + 1 ? a : b;
                const Point far_cd = j == i + 1 ? d : c;
                if (sign(cross(shared, far_ab, far_cd)) == 0 &&
                    (far_ab.x - shared.x) * (far_cd.x - shared.x) + (far_ab.y - shared.y) * (far_cd.y - shared.y) > 0) {
                    return false;
                }
                continue;
            }
            if (segments_touch(a, b, c, d)) return false;
        }
    }
    return true;
}

bool point_in_polygon(const Polygon& poly, Point p) {
    const std::size_t n = poly.size();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point a = poly[i], b = poly[j];
        if (sign(cross(a, b, p)) == 0 && on_segment(a, b, p)) return true;
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x) inside = !inside;
        }
    }
    return inside;
}

void fill_polygon(const Polygon& poly, std::uint8_t value, LabelImage& out) {
    const std::size_t n = poly.size();
    if (n < 3) return;
    std::vector<double> xs;
    for (int y = 0; y < out.height; ++y) {
        const double yc = y + 0.5;
        xs.clear();
        for (std::size_t i = 0; i < n; ++i) {
            const Point a = poly[i], b = poly[(i + 1) % n];
            // Half-open rule: an edge counts when exactly one endpoint lies at or below the scanline.
            if ((a.y <= yc) != (b.y <= yc)) xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            // Pixel x is inside when xs[k] <= x + 0.5 < xs[k + 1].
            const int x0 = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
            const int x1 = std::min(out.width, static_cast<int>(std::ceil(xs[k + 1] - 0.5)));
            for (int x = x0; x < x1; ++x) out.at(x, y) = value;
        }
    }
}

LabelImage rasterize(const RegionAnnotation& a, int width, int height) {
    if (width < 1 || height < 1) throw ShapeError("rasterize: extents must be positive");
    if (!a.healthy && polygon_area(a.roi) <= 0.0) throw IngestionError("annotation/region[1]", "ROI has zero area");
    LabelImage out(width, height, kBackground);
    for (const auto& p : a.surrounding_skin) fill_polygon(p, kSurroundingSkin, out);
    for (const auto& p : a.ulcer) fill_polygon(p, kUlcer, out);
    return out;
}

}  // namespace fcnseg
