#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "ngcg/errors.hpp"

namespace ngcg {

struct RetrievalResult;
struct EmbeddingIndex;

inline constexpr double kEarthRadiusM = 6371000.0;
inline constexpr std::array<int, 3> kRecallKs = {1, 5, 10};
inline constexpr std::array<int, 3> kLocDs = {50, 100, 150};

struct GeoPoint {
    double lat = 0.0;  // degrees, [-90, 90]
    double lon = 0.0;  // degrees, (-180, 180]

    GeoPoint() = default;
    GeoPoint(double lat_deg, double lon_deg);
};

// Great-circle distance in meters on a spherical Earth.
double haversine(const GeoPoint& a, const GeoPoint& b);

struct EvalReport {
    std::map<int, double> r_at_k;  // K in {1, 5, 10}
    std::map<int, double> l_at_d;  // D in {50, 100, 150} meters
    std::size_t query_count = 0;

    // R@K non-decreasing in K, L@D non-decreasing in D, everything in [0, 1].
    void validate() const;
};

double recall_at_k(const std::vector<RetrievalResult>& results,
                   const std::vector<std::string>& truth_ids, int k,
                   const std::vector<std::string>& index_ids);

// Fraction of queries whose top-1 candidate lies strictly within d_meters of the
// truth location. strict additionally requires the top-1 id to equal the truth id.
double loc_at_d(const std::vector<RetrievalResult>& results,
                const std::vector<GeoPoint>& truth_geo, const EmbeddingIndex& index,
                double d_meters, const std::vector<std::string>& truth_ids = {},
                bool strict = false);

EvalReport evaluate(const EmbeddingIndex& index, const std::vector<RetrievalResult>& results,
                    const std::vector<std::string>& truth_ids,
                    const std::vector<GeoPoint>& truth_geo, bool strict = false);

std::string report_to_json(const EvalReport& report, const std::string& split,
                           const std::string& config_hash);
std::string report_to_csv(const EvalReport& report, const std::string& split,
                          const std::string& config_hash);

}  // namespace ngcg
