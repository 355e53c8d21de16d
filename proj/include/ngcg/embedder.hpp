#pragma once

#include <string>
#include <vector>

#include "ngcg/checkpoint.hpp"
#include "ngcg/datagen.hpp"
#include "ngcg/retrieval.hpp"

namespace ngcg {

// Embeds every scene of a split on one side ("text" or "image") into unit-norm
// vectors tagged with ids and locations.
std::vector<IndexEntry> embed_split(const Checkpoint& model, const Corpus& corpus,
                                    const std::string& split, const std::string& side);

// Text-to-image R@1 on the given split, candidates = that split's grids.
double split_r_at_1(const Checkpoint& model, const Corpus& corpus, const std::string& split);

}  // namespace ngcg
