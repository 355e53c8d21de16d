#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ngcg/graph.hpp"

namespace ngcg {

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    bool all_pass() const {
        for (const auto& e : entries)
            if (!e.pass) return false;
        return !entries.empty();
    }
};

// Builds a scalar graph from one leaf node per checked parameter.
using GraphBuilder = std::function<graph::NodePtr(const std::vector<graph::NodePtr>&)>;

// Compares the analytic gradient of f against central finite differences,
// entry by entry, and reports the max relative error per parameter.
GradCheckReport gradcheck(const GraphBuilder& f, const std::vector<Matrix>& params,
                          double step, double tol,
                          std::vector<std::string> names = {});

// Finite-difference checks for every graph operator, random inputs in [-1, 1]
// (shifted positive where the operator's domain demands it).
GradCheckReport operator_gradcheck_suite(std::uint64_t seed, double step = 1e-5,
                                         double tol = 1e-4);

}  // namespace ngcg
