#include "ngcg/embedder.hpp"

#include "ngcg/pooling.hpp"

namespace ngcg {

namespace g = graph;

std::vector<IndexEntry> embed_split(const Checkpoint& model, const Corpus& corpus,
                                    const std::string& split, const std::string& side) {
    if (side != "text" && side != "image")
        throw ConfigError("embed_split: side must be 'text' or 'image'");
    const auto items = corpus.split_items(split);
    if (items.empty()) throw DataError("embed_split: split '" + split + "' is empty");

    // param nodes are shared across all items; nothing needs gradients here
    BoundParams bp = bind_params(model.params, model.adapter_ptr(), {});
    g::NodePtr query_node = model.pooling.strategy == PoolStrategy::Query
                                ? g::constant(model.pooling.query)
                                : nullptr;
    model.pooling.validate(model.params.cfg.dim);

    std::vector<IndexEntry> out;
    out.reserve(items.size());
    for (const SceneRecord* rec : items) {
        g::NodePtr hidden;
        std::vector<int> mask;
        int eos = 0;
        if (side == "text") {
            hidden = encode_text_graph(bp, rec->text);
            mask = rec->text.mask;
            eos = rec->text.eos_index;
        } else {
            SceneGrid grid{rec->grid, rec->geo};
            hidden = encode_image_graph(bp, grid);
            mask.assign(model.params.cfg.patches + 1, 1);
            eos = model.params.cfg.patches;
        }
        g::NodePtr emb = pool_graph(hidden, mask, eos, model.pooling.strategy, query_node);
        IndexEntry entry;
        entry.id = rec->id;
        entry.geo = rec->geo;
        entry.vec = emb->value.data;
        out.push_back(std::move(entry));
    }
    return out;
}

double split_r_at_1(const Checkpoint& model, const Corpus& corpus, const std::string& split) {
    const auto queries = embed_split(model, corpus, split, "text");
    const auto candidates = embed_split(model, corpus, split, "image");
    EmbeddingIndex index = build_index(candidates);
    std::size_t hits = 0;
    for (const auto& q : queries) {
        RetrievalResult r = query_topk(index, q.vec, 1);
        if (r.ids.front() == q.id) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(queries.size());
}

}  // namespace ngcg
