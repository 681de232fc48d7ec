#include "match/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace match {

GeoVec geo_vector(double lat_deg, double lon_deg) {
    if (lat_deg < -90.0 || lat_deg > 90.0)
        throw ParameterError("latitude out of range: " + std::to_string(lat_deg));
    if (lon_deg < -180.0 || lon_deg > 180.0)
        throw ParameterError("longitude out of range: " + std::to_string(lon_deg));
    double lat = lat_deg * std::numbers::pi / 180.0;
    double lon = lon_deg * std::numbers::pi / 180.0;
    return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

double great_circle_distance(const GeoVec& c1, const GeoVec& c2, double radius_km) {
    if (radius_km <= 0.0) throw ParameterError("radius must be positive");
    double dot = c1[0] * c2[0] + c1[1] * c2[1] + c1[2] * c2[2];
    // Chord length squared, clamped against floating-point drift at the
    // coincident and antipodal extremes.
    double chord2 = std::clamp(2.0 - 2.0 * dot, 0.0, 4.0);
    return 2.0 * radius_km * std::asin(std::sqrt(chord2) / 2.0);
}

}  // namespace match
