#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "match/geo.hpp"

using namespace match;

namespace {

// independent haversine oracle, straight from the textbook formula
double haversine_km(double lat1, double lon1, double lat2, double lon2, double r = kEarthRadiusKm) {
    auto rad = [](double deg) { return deg * M_PI / 180.0; };
    double dlat = rad(lat2 - lat1);
    double dlon = rad(lon2 - lon1);
    double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
               std::cos(rad(lat1)) * std::cos(rad(lat2)) * std::sin(dlon / 2) * std::sin(dlon / 2);
    return 2.0 * r * std::asin(std::min(1.0, std::sqrt(a)));
}

}  // namespace

TEST_CASE("geo vectors live on the unit sphere") {
    Rng rng(11);
    std::uniform_real_distribution<double> lat(-90.0, 90.0), lon(-180.0, 180.0);
    for (int i = 0; i < 200; ++i) {
        GeoVec v = geo_vector(lat(rng), lon(rng));
        double n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        CHECK(n2 == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("axis cases are exact") {
    GeoVec equator_origin = geo_vector(0.0, 0.0);
    CHECK(equator_origin[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(equator_origin[1]) < 1e-15);
    CHECK(std::abs(equator_origin[2]) < 1e-15);

    GeoVec north = geo_vector(90.0, 0.0);
    CHECK(north[2] == doctest::Approx(1.0).epsilon(1e-15));

    // pole to pole: half the circumference
    double d = great_circle_distance(north, geo_vector(-90.0, 0.0));
    CHECK(std::abs(d - M_PI * kEarthRadiusKm) < 1e-12 * M_PI * kEarthRadiusKm);

    // quarter turns along the equator
    d = great_circle_distance(equator_origin, geo_vector(0.0, 90.0));
    CHECK(std::abs(d - M_PI / 2 * kEarthRadiusKm) < 1e-12 * kEarthRadiusKm);

    // antipodes on the equator
    d = great_circle_distance(equator_origin, geo_vector(0.0, 180.0));
    CHECK(std::abs(d - M_PI * kEarthRadiusKm) < 1e-12 * M_PI * kEarthRadiusKm);

    // coincident points
    CHECK(great_circle_distance(equator_origin, equator_origin) == doctest::Approx(0.0));
}

TEST_CASE("distance matches the haversine oracle on 1000 random pairs") {
    Rng rng(12);
    std::uniform_real_distribution<double> lat(-89.9, 89.9), lon(-180.0, 180.0);
    for (int i = 0; i < 1000; ++i) {
        double la1 = lat(rng), lo1 = lon(rng), la2 = lat(rng), lo2 = lon(rng);
        double got = great_circle_distance(geo_vector(la1, lo1), geo_vector(la2, lo2));
        double want = haversine_km(la1, lo1, la2, lo2);
        if (want > 1e-9) {
            CHECK(std::abs(got - want) / want < 1e-6);
        } else {
            CHECK(std::abs(got - want) < 1e-6);
        }
    }
}

TEST_CASE("coordinate validation") {
    CHECK_THROWS_AS(geo_vector(91.0, 0.0), ParameterError);
    CHECK_THROWS_AS(geo_vector(-91.0, 0.0), ParameterError);
    CHECK_THROWS_AS(geo_vector(0.0, 181.0), ParameterError);
    CHECK_THROWS_AS(geo_vector(0.0, -181.0), ParameterError);
    CHECK_NOTHROW(geo_vector(90.0, 180.0));
}

TEST_CASE("symmetry and triangle sanity") {
    Rng rng(13);
    std::uniform_real_distribution<double> lat(-90.0, 90.0), lon(-180.0, 180.0);
    for (int i = 0; i < 100; ++i) {
        GeoVec a = geo_vector(lat(rng), lon(rng));
        GeoVec b = geo_vector(lat(rng), lon(rng));
        double ab = great_circle_distance(a, b);
        CHECK(ab == great_circle_distance(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= M_PI * kEarthRadiusKm * (1.0 + 1e-12));
    }
}
