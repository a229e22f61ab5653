#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "fcnseg/label_image.hpp"

namespace fcnseg {

/// Vertex in pixel units; (0,0) is the top-left corner of the top-left pixel.
struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

using Polygon = std::vector<Point>;

/// Expert delineation of one photograph.
///
/// XML layout (root element `annotation`):
///
///     <annotation healthy="false">
///       <image id="case-001" file="case-001.png" width="500" height="500"/>
///       <region class="roi"><point x="12" y="40"/>...</region>
///       <region class="ulcer">...</region>
///       <region class="surrounding_skin">...</region>
///     </annotation>
///
/// Exactly one `roi` region unless the image is healthy; any number of ulcer and
/// surrounding_skin regions.
struct RegionAnnotation {
    std::string image_id;
    std::string image_file;
    int width = 0;
    int height = 0;
    bool healthy = false;
    Polygon roi;
    std::vector<Polygon> ulcer;
    std::vector<Polygon> surrounding_skin;

    friend bool operator==(const RegionAnnotation&, const RegionAnnotation&) = default;
};

/// Parses the documented schema, or hands other root elements to a registered importer.
/// Throws IngestionError with the failing element path.
RegionAnnotation parse_annotation(std::string_view xml);

std::string serialize_annotation(const RegionAnnotation& annotation);

/// Bounds, simplicity and ROI containment checks. Throws IngestionError.
void validate_annotation(const RegionAnnotation& annotation);

/// Importer for a foreign annotation schema, selected by the XML root element name.
using AnnotationImporter = std::function<RegionAnnotation(std::string_view xml)>;
void register_annotation_importer(const std::string& root_element, AnnotationImporter importer);

/// Even-odd fill at pixel centres; ulcer (2) over surrounding skin (1) over background (0).
/// Throws IngestionError for a zero-area ROI on a non-healthy annotation.
LabelImage rasterize(const RegionAnnotation& annotation, int width, int height);

/// Even-odd fill of a single polygon into `out`, writing `value` where the pixel centre is inside.
void fill_polygon(const Polygon& polygon, std::uint8_t value, LabelImage& out);

double polygon_area(const Polygon& polygon);
bool polygon_is_simple(const Polygon& polygon);
/// Even-odd point test; points on the boundary count as inside.
bool point_in_polygon(const Polygon& polygon, Point p);

}  // namespace fcnseg
