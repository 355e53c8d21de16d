#include "ngcg/geoeval.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ngcg/retrieval.hpp"

namespace ngcg {

GeoPoint::GeoPoint(double lat_deg, double lon_deg) : lat(lat_deg), lon(lon_deg) {
    if (!(lat >= -90.0 && lat <= 90.0))
        throw ContractError("GeoPoint: latitude out of [-90, 90]");
    if (!(lon > -180.0 && lon <= 180.0))
        throw ContractError("GeoPoint: longitude out of (-180, 180]");
}

double haversine(const GeoPoint& a, const GeoPoint& b) {
    const double deg = M_PI / 180.0;
    const double phi1 = a.lat * deg, phi2 = b.lat * deg;
    const double dphi = (b.lat - a.lat) * deg;
    const double dlam = (b.lon - a.lon) * deg;
    const double s1 = std::sin(dphi / 2.0), s2 = std::sin(dlam / 2.0);
    const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

void EvalReport::validate() const {
    double prev = -1.0;
    for (int k : kRecallKs) {
        const double v = r_at_k.at(k);
        if (v < 0.0 || v > 1.0) throw ContractError("EvalReport: R@K outside [0, 1]");
        if (v < prev) throw ContractError("EvalReport: R@K not monotone in K");
        prev = v;
    }
    prev = -1.0;
    for (int d : kLocDs) {
        const double v = l_at_d.at(d);
        if (v < 0.0 || v > 1.0) throw ContractError("EvalReport: L@D outside [0, 1]");
        if (v < prev) throw ContractError("EvalReport: L@D not monotone in D");
        prev = v;
    }
}

double recall_at_k(const std::vector<RetrievalResult>& results,
                   const std::vector<std::string>& truth_ids, int k,
                   const std::vector<std::string>& index_ids) {
    if (results.size() != truth_ids.size())
        throw ContractError("recall_at_k: results/truth size mismatch");
    if (results.empty()) throw ContractError("recall_at_k: no queries");
    if (k < 1) throw ContractError("recall_at_k: K must be >= 1");
    const std::set<std::string> universe(index_ids.begin(), index_ids.end());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (!universe.count(truth_ids[i]))
            throw DataError("recall_at_k: truth id '" + truth_ids[i] + "' not in index");
        const auto& ranked = results[i].ids;
        const std::size_t limit = std::min<std::size_t>(k, ranked.size());
        for (std::size_t j = 0; j < limit; ++j) {
            if (ranked[j] == truth_ids[i]) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

double loc_at_d(const std::vector<RetrievalResult>& results,
                const std::vector<GeoPoint>& truth_geo, const EmbeddingIndex& index,
                double d_meters, const std::vector<std::string>& truth_ids, bool strict) {
    if (results.size() != truth_geo.size())
        throw ContractError("loc_at_d: results/geo size mismatch");
    if (results.empty()) throw ContractError("loc_at_d: no queries");
    if (strict && truth_ids.size() != results.size())
        throw ContractError("loc_at_d: strict mode needs truth ids");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i].ids.empty()) throw ContractError("loc_at_d: empty result");
        const std::string& top1 = results[i].ids.front();
        auto it = index.row_of.find(top1);
        if (it == index.row_of.end()) throw DataError("loc_at_d: candidate missing from index");
        const bool within = haversine(truth_geo[i], index.geo[it->second]) < d_meters;
        const bool id_ok = !strict || top1 == truth_ids[i];
        if (within && id_ok) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

EvalReport evaluate(const EmbeddingIndex& index, const std::vector<RetrievalResult>& results,
                    const std::vector<std::string>& truth_ids,
                    const std::vector<GeoPoint>& truth_geo, bool strict) {
    EvalReport report;
    report.query_count = results.size();
    for (int k : kRecallKs) report.r_at_k[k] = recall_at_k(results, truth_ids, k, index.ids);
    for (int d : kLocDs)
        report.l_at_d[d] = loc_at_d(results, truth_geo, index, d, truth_ids, strict);
    report.validate();
    return report;
}

std::string report_to_json(const EvalReport& report, const std::string& split,
                           const std::string& config_hash) {
    report.validate();
    nlohmann::json j;
    j["split"] = split;
    j["config_hash"] = config_hash;
    j["query_count"] = report.query_count;
    for (int k : kRecallKs) j["recall"]["R@" + std::to_string(k)] = report.r_at_k.at(k);
    for (int d : kLocDs) j["localization"]["L@" + std::to_string(d)] = report.l_at_d.at(d);
    return j.dump(2) + "\n";
}

std::string report_to_csv(const EvalReport& report, const std::string& split,
                          const std::string& config_hash) {
    report.validate();
    std::ostringstream out;
    out << "metric,value,K-or-D,split,config-hash\n";
    out.precision(17);
    for (int k : kRecallKs)
        out << "R@K," << report.r_at_k.at(k) << "," << k << "," << split << "," << config_hash
            << "\n";
    for (int d : kLocDs)
        out << "L@D," << report.l_at_d.at(d) << "," << d << "," << split << "," << config_hash
            << "\n";
    return out.str();
}

}  // namespace ngcg
