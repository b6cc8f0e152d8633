#include "ipg/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "json.hpp"

#include "ipg/attacks.hpp"
#include "ipg/rng.hpp"

namespace ipg {

namespace {

using nlohmann::json;

constexpr AttackKind kAllKinds[] = {AttackKind::fgsm, AttackKind::pgd, AttackKind::spsa,
                                    AttackKind::square, AttackKind::bitflip};
constexpr AttackKind kCoreKinds[] = {AttackKind::fgsm, AttackKind::pgd, AttackKind::spsa};

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void check_config(const DeskConfig& cfg) {
    if (cfg.out_dir.empty()) throw std::invalid_argument("desk run needs an output directory");
    if (cfg.feature_dim <= 0 || cfg.class_count < 2)
        throw std::invalid_argument("bad target dimensions");
    if (cfg.corpus_inputs <= 0 || cfg.pool_samples < cfg.corpus_inputs)
        throw std::invalid_argument("input pool smaller than the requested corpus");
    if (cfg.train_samples <= 0 || cfg.eval_samples <= 0)
        throw std::invalid_argument("bad sample counts");
    if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
}

json metric_json(const MetricReport& m) {
    return {{"accuracy", m.accuracy},
            {"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"roc_auc", m.roc_auc},
            {"pr_auc", m.pr_auc},
            {"tpr_at_1pct_fpr", m.tpr_at_1pct_fpr},
            {"fpr_at_95pct_tpr", m.fpr_at_95pct_tpr},
            {"n", m.n_scores}};
}

}  // namespace

std::vector<std::pair<std::string, ProtocolSpec>> desk_protocols(std::uint64_t seed) {
    auto spec = [&](const char* name, Protocol p, std::vector<std::string> train,
                    std::vector<std::string> test) {
        ProtocolSpec s;
        s.protocol = p;
        s.train_attacks = std::move(train);
        s.test_attacks = std::move(test);
        s.seed = mix_seed(seed, std::string("desk:protocol:") + name);
        return std::make_pair(std::string(name), std::move(s));
    };
    return {
        spec("intra_fgsm", Protocol::intra, {"fgsm"}, {"fgsm"}),
        spec("intra_pgd", Protocol::intra, {"pgd"}, {"pgd"}),
        spec("intra_spsa", Protocol::intra, {"spsa"}, {"spsa"}),
        spec("multi", Protocol::multi, {"fgsm", "pgd", "spsa"}, {"fgsm", "pgd", "spsa"}),
        spec("cross_pgd_to_spsa", Protocol::cross_threat, {"pgd"}, {"spsa"}),
        spec("cross_spsa_to_pgd", Protocol::cross_threat, {"spsa"}, {"pgd"}),
    };
}

DeskResult run_desk(const DeskConfig& cfg) {
    check_config(cfg);
    std::filesystem::create_directories(cfg.out_dir / "graphs");

    // One generated task, cut into target-training, held-out evaluation, and
    // attack-pool portions; the pool never sees training.
    const auto t_start = std::chrono::steady_clock::now();
    const std::size_t n_train = static_cast<std::size_t>(cfg.train_samples);
    const std::size_t n_eval = static_cast<std::size_t>(cfg.eval_samples);
    const std::size_t n_pool = static_cast<std::size_t>(cfg.pool_samples);
    const LabeledDataset everything = make_binary_features(
        static_cast<int>(n_train + n_eval + n_pool), cfg.feature_dim, cfg.class_count,
        cfg.flip_rate, mix_seed(cfg.seed, "desk:data"), "bin");
    const LabeledDataset train_data = slice_dataset(everything, 0, n_train);
    const LabeledDataset eval_data = slice_dataset(everything, n_train, n_train + n_eval);
    const LabeledDataset pool =
        slice_dataset(everything, n_train + n_eval, n_train + n_eval + n_pool);

    TargetModel model = build_mlp("desk-mlp", cfg.feature_dim, cfg.hidden_dims, cfg.class_count,
                                  mix_seed(cfg.seed, "desk:model-init"));
    TrainConfig tcfg = cfg.target_train;
    tcfg.seed = mix_seed(cfg.seed, "desk:target-train");
    train_target(model, train_data, eval_data, tcfg);

    DeskResult result;
    result.out_dir = cfg.out_dir;
    result.clean_accuracy = accuracy(model, eval_data);
    save_target_model(cfg.out_dir / "target_model.ipgt", model);
    std::fprintf(stderr, "desk: target trained, clean accuracy %.4f (%.1fs)\n",
                 result.clean_accuracy, elapsed_s(t_start));

    // Every attack kind against the pool, each on its own seed stream.
    std::map<AttackKind, AttackSet> sets;
    std::map<AttackKind, std::map<std::string, std::size_t>> by_base;
    for (AttackKind kind : kAllKinds) {
        const auto t0 = std::chrono::steady_clock::now();
        AttackConfig acfg;
        acfg.kind = kind;
        acfg.epsilon = cfg.epsilon;
        acfg.seed = mix_seed(cfg.seed, std::string("desk:attack:") + attack_kind_name(kind));
        AttackSet set = generate_attack_set(model, pool, acfg);
        for (std::size_t i = 0; i < set.examples.size(); ++i)
            by_base[kind][base_sample_id(set.examples.sample_ids[i])] = i;
        std::fprintf(stderr, "desk: %s flipped %zu/%d inputs (%.1fs)\n", attack_kind_name(kind),
                     set.examples.size(), set.attempted, elapsed_s(t0));
        sets.emplace(kind, std::move(set));
    }

    // Corpus bases: correctly classified and broken by every core attack.
    std::vector<std::string> bases;
    std::map<std::string, std::size_t> pool_index;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const std::string& id = pool.sample_ids[i];
        pool_index[id] = i;
        if (predict(model, pool.inputs[i]).label != pool.labels[i]) continue;
        bool all_core = true;
        for (AttackKind kind : kCoreKinds)
            if (!by_base[kind].count(id)) all_core = false;
        if (all_core) bases.push_back(id);
    }
    if (static_cast<int>(bases.size()) < cfg.corpus_inputs)
        throw std::runtime_error("only " + std::to_string(bases.size()) +
                                 " pool inputs broken by all core attacks; need " +
                                 std::to_string(cfg.corpus_inputs) +
                                 " (grow the pool or weaken the target)");
    bases.resize(static_cast<std::size_t>(cfg.corpus_inputs));
    const std::set<std::string> kept(bases.begin(), bases.end());

    // Extract and store one benign graph per base plus every successful
    // adversarial counterpart.
    const auto t_extract = std::chrono::steady_clock::now();
    ProvenanceEngine engine = register_hooks(model);
    std::vector<ManifestRecord> records;
    auto emit = [&](const Tensor& x, const std::string& sid, const std::string& kind_name,
                    int graph_label, int input_label) {
        GraphMeta meta;
        meta.sample_id = sid;
        meta.model_id = model.model_id;
        meta.attack_kind = kind_name;
        meta.graph_label = graph_label;
        meta.input_label = input_label;
        const InferenceProvenanceGraph ipg = extract_ipg(engine, x, cfg.extraction, meta);
        const std::string fname = graph_file_name(sid);
        save_graph(cfg.out_dir / "graphs" / fname, ipg);

        ManifestRecord rec;
        rec.path = "graphs/" + fname;
        rec.model_id = model.model_id;
        rec.sample_id = sid;
        rec.input_label = input_label;
        rec.graph_label = graph_label;
        rec.attack_kind = kind_name;
        rec.config_hash = ipg.meta.config_hash;
        records.push_back(std::move(rec));
    };
    for (const std::string& base : bases) {
        const std::size_t pi = pool_index.at(base);
        emit(pool.inputs[pi], base, "benign", 0, pool.labels[pi]);
        ++result.benign_graphs;
    }
    for (AttackKind kind : kAllKinds) {
        AttackSummary summary;
        summary.kind = attack_kind_name(kind);
        summary.attempted = sets.at(kind).attempted;
        summary.successes = static_cast<int>(sets.at(kind).examples.size());
        for (const auto& [base, idx] : by_base[kind]) {
            if (!kept.count(base)) continue;
            const AttackSet& set = sets.at(kind);
            emit(set.examples.inputs[idx], set.examples.sample_ids[idx],
                 attack_kind_name(kind), 1, set.examples.labels[idx]);
            ++summary.in_corpus;
        }
        result.attacks.push_back(std::move(summary));
    }
    std::fprintf(stderr, "desk: %zu graphs extracted (%.1fs)\n", records.size(),
                 elapsed_s(t_extract));

    result.manifest = build_dataset(std::move(records), cfg.split_ratios,
                                    mix_seed(cfg.seed, "desk:split"));
    result.manifest.stats = compute_stats(result.manifest, cfg.out_dir);
    save_manifest(cfg.out_dir / "manifest.tsv", result.manifest);

    for (auto& [name, spec] : desk_protocols(cfg.seed)) {
        const auto t0 = std::chrono::steady_clock::now();
        ProtocolResult pr = run_protocol(spec, result.manifest, cfg.out_dir, cfg.detector);
        save_detector(cfg.out_dir / ("detector_" + name + ".ipgt"), pr.training.model);
        write_text(cfg.out_dir / ("report_" + name + ".txt"), protocol_table(pr));
        write_text(cfg.out_dir / ("report_" + name + ".tsv"), protocol_tsv(pr));
        std::fprintf(stderr, "desk: protocol %s done (%.1fs)\n", name.c_str(), elapsed_s(t0));
        result.protocols.emplace_back(name, std::move(pr));
    }

    json summary;
    summary["clean_accuracy"] = result.clean_accuracy;
    summary["benign_graphs"] = result.benign_graphs;
    json attacks_json;
    for (const AttackSummary& a : result.attacks)
        attacks_json[a.kind] = {
            {"attempted", a.attempted}, {"successes", a.successes}, {"in_corpus", a.in_corpus}};
    summary["attacks"] = std::move(attacks_json);
    json protocols_json;
    for (const auto& [name, pr] : result.protocols) {
        json per_attack;
        for (const AttackReport& row : pr.per_attack) per_attack[row.attack] = metric_json(row.metrics);
        protocols_json[name] = std::move(per_attack);
    }
    summary["protocols"] = std::move(protocols_json);
    if (result.manifest.stats) {
        const DatasetStats& s = *result.manifest.stats;
        summary["dataset"] = {{"graph_count", s.graph_count},
                              {"avg_nodes", s.avg_nodes},
                              {"avg_edges", s.avg_edges},
                              {"avg_sparsity", s.avg_sparsity},
                              {"min_bytes", s.min_bytes},
                              {"median_bytes", s.median_bytes},
                              {"max_bytes", s.max_bytes}};
    }
    summary["config"] = {{"seed", cfg.seed},
                         {"feature_dim", cfg.feature_dim},
                         {"class_count", cfg.class_count},
                         {"hidden_dims", cfg.hidden_dims},
                         {"flip_rate", cfg.flip_rate},
                         {"train_samples", cfg.train_samples},
                         {"eval_samples", cfg.eval_samples},
                         {"pool_samples", cfg.pool_samples},
                         {"corpus_inputs", cfg.corpus_inputs},
                         {"epsilon", cfg.epsilon},
                         {"tau", cfg.extraction.tau},
                         {"split_ratios", cfg.split_ratios},
                         {"detector_hidden_dim", cfg.detector.hidden_dim},
                         {"detector_layers", cfg.detector.layers},
                         {"detector_epochs", cfg.detector.epochs}};
    write_text(cfg.out_dir / "summary.json", summary.dump(2) + "\n");

    std::fprintf(stderr, "desk: complete (%.1fs total)\n", elapsed_s(t_start));
    return result;
}

const MetricReport* find_metrics(const DeskResult& result, const std::string& protocol,
                                 const std::string& attack) {
    for (const auto& [name, pr] : result.protocols) {
        if (name != protocol) continue;
        for (const AttackReport& row : pr.per_attack)
            if (row.attack == attack) return &row.metrics;
    }
    return nullptr;
}

}  // namespace ipg
