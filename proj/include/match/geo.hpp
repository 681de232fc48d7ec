#pragma once

#include <array>

#include "match/common.hpp"

namespace match {

// Unit-sphere location vector.
using GeoVec = std::array<double, 3>;

constexpr double kEarthRadiusKm = 6371.0;

// Latitude/longitude in degrees -> Cartesian unit vector.
GeoVec geo_vector(double lat_deg, double lon_deg);

// Great-circle distance through the chord-length identity
// d = 2r * asin(sqrt(2 - 2<c1,c2>) / 2).
double great_circle_distance(const GeoVec& c1, const GeoVec& c2, double radius_km = kEarthRadiusKm);

}  // namespace match
