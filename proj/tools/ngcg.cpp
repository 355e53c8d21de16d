#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "ngcg/embedder.hpp"
#include "ngcg/experiments.hpp"

namespace {

using namespace ngcg;

int cmd_gen_data(const std::string& out, int scenes, std::uint64_t seed, double noise) {
    GenParams p;
    p.n_scenes = scenes;
    p.seed = seed;
    p.noise = noise;
    Corpus corpus = generate(p);
    write_corpus(out, corpus);
    std::cout << "wrote " << corpus.items.size() << " scenes to " << out << "\n";
    return 0;
}

Corpus corpus_for(const ExperimentConfig& cfg) {
    return cfg.corpus_path.empty() ? generate(cfg.data) : read_corpus(cfg.corpus_path);
}

int cmd_train(const std::string& config_path, const std::string& out_ckpt,
              const std::string& log_path) {
    ExperimentConfig cfg = load_config(config_path);
    Corpus corpus = corpus_for(cfg);
    TrainResult tr = train(corpus, cfg.model, cfg.train_config(), log_path, cfg.config_hash());
    tr.log.checkpoint_path = out_ckpt;
    save_checkpoint(out_ckpt, tr.model);

    if (tr.model.adapters) {
        // frozen-base check: weights must hash identically to a fresh init
        EncoderParams fresh = init_encoder(cfg.model);
        bool frozen_ok = true;
        auto trained = named_params(tr.model.params);
        auto initial = named_params(fresh);
        for (std::size_t i = 0; i < trained.size(); ++i)
            frozen_ok = frozen_ok &&
                        matrix_hash(*trained[i].second) == matrix_hash(*initial[i].second);
        std::cout << "frozen-base check: " << (frozen_ok ? "pass" : "FAIL") << "\n";
        if (!frozen_ok) return 1;
    }
    if (!tr.log.epoch_r_at_1.empty())
        std::cout << "final held-out R@1: " << tr.log.epoch_r_at_1.back() << "\n";
    std::cout << "checkpoint: " << out_ckpt << " (" << tr.log.wall_seconds << " s)\n";
    return 0;
}

int cmd_embed(const std::string& ckpt_path, const std::string& corpus_path,
              const std::string& split, const std::string& side, const std::string& out) {
    Checkpoint model = load_checkpoint(ckpt_path);
    Corpus corpus = read_corpus(corpus_path);
    auto entries = embed_split(model, corpus, split, side);
    write_embedding_file(out, entries, model.config_hash);
    std::cout << "wrote " << entries.size() << " embeddings to " << out << "\n";
    return 0;
}

int cmd_eval(const std::string& query_emb, const std::string& index_emb,
             const std::string& truth, const std::string& out_prefix, bool strict_loc) {
    std::uint64_t qhash = 0;
    auto query_entries = read_embedding_file(query_emb, &qhash);
    auto index_entries = read_embedding_file(index_emb);
    EmbeddingIndex index = build_index(index_entries);

    std::vector<std::string> truth_ids;
    if (truth == "identity") {
        for (const auto& q : query_entries) truth_ids.push_back(q.id);
    } else {
        std::ifstream in(truth);
        if (!in) throw DataError("eval: cannot open truth file " + truth);
        std::map<std::string, std::string> map;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto comma = line.find(',');
            if (comma == std::string::npos) throw DataError("eval: bad truth line: " + line);
            map[line.substr(0, comma)] = line.substr(comma + 1);
        }
        for (const auto& q : query_entries) {
            auto it = map.find(q.id);
            if (it == map.end()) throw DataError("eval: no truth for query " + q.id);
            truth_ids.push_back(it->second);
        }
    }

    std::vector<RetrievalResult> results;
    std::vector<GeoPoint> truth_geo;
    for (auto& q : query_entries) {
        double sq = 0.0;
        for (double v : q.vec) sq += v * v;
        const double norm = std::sqrt(sq);
        if (norm < 1e-154) throw NumericError("eval: zero-norm query " + q.id);
        for (double& v : q.vec) v /= norm;  // float32 storage needs re-normalization
        results.push_back(query_topk(index, q.vec, 10));
        truth_geo.push_back(q.geo);
    }
    EvalReport report = evaluate(index, results, truth_ids, truth_geo, strict_loc);

    char hex[32];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(qhash));
    std::ofstream json_out(out_prefix + ".json");
    json_out << report_to_json(report, "file", hex);
    std::ofstream csv_out(out_prefix + ".csv");
    csv_out << report_to_csv(report, "file", hex);
    std::cout << report_to_json(report, "file", hex);
    return 0;
}

int cmd_ablate(const std::string& axis, const std::string& config_path,
               const std::string& out_csv) {
    ExperimentConfig cfg = load_config(config_path);
    auto rows = run_ablation(axis, cfg);
    const std::string csv = ablation_csv(rows);
    std::ofstream out(out_csv);
    if (!out) throw DataError("ablate: cannot open " + out_csv);
    out << csv;
    std::cout << csv;
    return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
    bool all_pass = true;
    GradCheckReport ops = operator_gradcheck_suite(seed);
    for (const auto& e : ops.entries) {
        std::cout << (e.pass ? "pass" : "FAIL") << "  op " << e.name
                  << "  max_rel_err=" << e.max_rel_err << "\n";
        all_pass = all_pass && e.pass;
    }
    for (TrainMode mode : {TrainMode::Lora, TrainMode::Full}) {
        GradCheckReport comp = composite_gradcheck(seed, mode);
        double worst = 0.0;
        bool pass = true;
        for (const auto& e : comp.entries) {
            worst = std::max(worst, e.max_rel_err);
            pass = pass && e.pass;
        }
        std::cout << (pass ? "pass" : "FAIL") << "  infonce-through-encoder [" << to_string(mode)
                  << "]  max_rel_err=" << worst << "\n";
        all_pass = all_pass && pass;
    }
    for (const auto& [name, grad] : frozen_gradient_report(seed)) {
        std::cout << (grad == 0.0 ? "pass" : "FAIL") << "  frozen " << name
                  << "  max_abs_grad=" << grad << "\n";
        all_pass = all_pass && grad == 0.0;
    }
    std::cout << (all_pass ? "gradcheck: all pass\n" : "gradcheck: FAILURES\n");
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"natural-language guided cross-view geo-localization, desk scale"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
    std::string gen_out = "corpus.jsonl";
    int gen_scenes = 1024;
    std::uint64_t gen_seed = 7;
    double gen_noise = 0.02;
    gen->add_option("--out", gen_out, "output JSONL path");
    gen->add_option("--scenes", gen_scenes, "number of scenes");
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_option("--noise", gen_noise, "grid noise stddev");

    auto* tr = app.add_subcommand("train", "train an encoder");
    std::string tr_config, tr_ckpt = "model.ckpt", tr_log;
    tr->add_option("--config", tr_config, "experiment config JSON")->required();
    tr->add_option("--out-ckpt", tr_ckpt, "checkpoint output path");
    tr->add_option("--log", tr_log, "JSONL training log path");

    auto* em = app.add_subcommand("embed", "embed one side of a corpus split");
    std::string em_ckpt, em_corpus, em_split = "test", em_side = "text", em_out = "emb.bin";
    em->add_option("--ckpt", em_ckpt, "checkpoint path")->required();
    em->add_option("--corpus", em_corpus, "corpus JSONL path")->required();
    em->add_option("--split", em_split, "train|test")
        ->check(CLI::IsMember({"train", "test"}));
    em->add_option("--side", em_side, "text|image")->check(CLI::IsMember({"text", "image"}));
    em->add_option("--out", em_out, "embedding file output path");

    auto* ev = app.add_subcommand("eval", "retrieval + localization metrics");
    std::string ev_query, ev_index, ev_truth = "identity", ev_out = "report";
    bool ev_strict = false;
    ev->add_option("--query-emb", ev_query, "query embedding file")->required();
    ev->add_option("--index-emb", ev_index, "candidate embedding file")->required();
    ev->add_option("--truth", ev_truth, "'identity' or CSV of query_id,truth_id");
    ev->add_option("--out", ev_out, "output prefix (.json and .csv)");
    ev->add_flag("--strict-loc", ev_strict,
                 "L@D counts only queries whose top-1 is the true candidate");

    auto* ab = app.add_subcommand("ablate", "run one ablation axis, write a CSV table");
    std::string ab_axis, ab_config, ab_out = "ablation.csv";
    ab->add_option("--axis", ab_axis, "tau|alpha|pooling|mode")
        ->required()
        ->check(CLI::IsMember({"tau", "alpha", "pooling", "mode"}));
    ab->add_option("--config", ab_config, "experiment config JSON")->required();
    ab->add_option("--out-csv", ab_out, "CSV output path");

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient report");
    std::uint64_t gc_seed = 1;
    gc->add_option("--seed", gc_seed, "random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage errors exit 2, --help exits 0
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_out, gen_scenes, gen_seed, gen_noise);
        if (tr->parsed()) return cmd_train(tr_config, tr_ckpt, tr_log);
        if (em->parsed()) return cmd_embed(em_ckpt, em_corpus, em_split, em_side, em_out);
        if (ev->parsed()) return cmd_eval(ev_query, ev_index, ev_truth, ev_out, ev_strict);
        if (ab->parsed()) return cmd_ablate(ab_axis, ab_config, ab_out);
        if (gc->parsed()) return cmd_gradcheck(gc_seed);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
