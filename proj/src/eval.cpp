#include "ipg/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <stdexcept>

#include "ipg/attacks.hpp"

namespace ipg {

namespace {

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

bool is_gradient_based(AttackKind k) {
    return k == AttackKind::fgsm || k == AttackKind::pgd;
}

std::set<std::string> attack_set(const std::vector<std::string>& names, const char* which) {
    if (names.empty())
        throw std::invalid_argument(std::string(which) + " attack set is empty");
    std::set<std::string> out;
    for (const std::string& name : names) {
        parse_attack_kind(name);  // rejects unknown kinds
        if (!out.insert(name).second)
            throw std::invalid_argument(std::string(which) + " attack listed twice: " + name);
    }
    return out;
}

void check_protocol_composition(const ProtocolSpec& spec, const std::set<std::string>& train,
                                const std::set<std::string>& test) {
    switch (spec.protocol) {
        case Protocol::intra:
            if (train.size() != 1 || train != test)
                throw std::invalid_argument(
                    "intra protocol trains and tests on one identical attack");
            break;
        case Protocol::multi:
            for (const std::string& t : test)
                if (!train.count(t))
                    throw std::invalid_argument("multi protocol test attack " + t +
                                                " missing from the training mix");
            break;
        case Protocol::cross_threat: {
            bool train_gradient = false, train_query = false;
            for (const std::string& t : train) {
                if (test.count(t))
                    throw std::invalid_argument(
                        "cross-threat train and test attacks overlap: " + t);
                (is_gradient_based(parse_attack_kind(t)) ? train_gradient : train_query) = true;
            }
            for (const std::string& t : test) {
                const bool grad = is_gradient_based(parse_attack_kind(t));
                if ((grad && train_gradient) || (!grad && train_query))
                    throw std::invalid_argument(
                        "cross-threat sets must come from different threat classes (" + t +
                        " shares a class with a training attack)");
            }
            break;
        }
    }
}

InferenceProvenanceGraph load_checked(const ManifestRecord& r,
                                      const std::filesystem::path& base_dir) {
    InferenceProvenanceGraph ipg = load_graph(base_dir / r.path);
    if (ipg.meta.graph_label != r.graph_label)
        throw std::runtime_error("graph label disagrees with manifest for " + r.sample_id);
    return ipg;
}

}  // namespace

const char* protocol_name(Protocol p) {
    switch (p) {
        case Protocol::intra: return "intra";
        case Protocol::multi: return "multi";
        case Protocol::cross_threat: return "cross_threat";
    }
    throw std::logic_error("unknown protocol");
}

Protocol parse_protocol(const std::string& name) {
    if (name == "intra") return Protocol::intra;
    if (name == "multi") return Protocol::multi;
    if (name == "cross_threat") return Protocol::cross_threat;
    throw std::invalid_argument("unknown protocol: " + name);
}

ProtocolResult run_protocol(const ProtocolSpec& spec, const Manifest& manifest,
                            const std::filesystem::path& base_dir, DetectorConfig cfg) {
    const std::set<std::string> train_set = attack_set(spec.train_attacks, "train");
    const std::set<std::string> test_set = attack_set(spec.test_attacks, "test");
    check_protocol_composition(spec, train_set, test_set);

    const std::vector<std::string> leaks = validate_splits(manifest);
    if (!leaks.empty())
        throw std::runtime_error("manifest leaks inputs across splits: " + join(leaks, ", "));

    // Per-split, per-kind record buckets; every requested kind must be there.
    auto collect = [&](const std::string& split, const std::string& kind) {
        std::vector<const ManifestRecord*> out;
        for (const ManifestRecord& r : manifest.records)
            if (r.split == split && r.attack_kind == kind) out.push_back(&r);
        return out;
    };
    auto load_all = [&](const std::vector<const ManifestRecord*>& records) {
        std::vector<InferenceProvenanceGraph> out;
        out.reserve(records.size());
        for (const ManifestRecord* r : records) out.push_back(load_checked(*r, base_dir));
        return out;
    };

    std::vector<InferenceProvenanceGraph> train_graphs = load_all(collect("train", "benign"));
    if (train_graphs.empty()) throw std::runtime_error("no benign graphs in the train split");
    for (const std::string& kind : train_set) {
        auto records = collect("train", kind);
        if (records.empty())
            throw std::runtime_error("no train-split graphs for attack " + kind);
        for (auto& g : load_all(records)) train_graphs.push_back(std::move(g));
    }

    std::vector<InferenceProvenanceGraph> val_graphs = load_all(collect("val", "benign"));
    for (const std::string& kind : train_set)
        for (auto& g : load_all(collect("val", kind))) val_graphs.push_back(std::move(g));

    cfg.seed = spec.seed;
    ProtocolResult result;
    result.spec = spec;
    result.training = train_detector(train_graphs, val_graphs, cfg);

    const std::vector<InferenceProvenanceGraph> test_benign = load_all(collect("test", "benign"));
    if (test_benign.empty()) throw std::runtime_error("no benign graphs in the test split");
    const std::vector<double> benign_scores = score_graphs(result.training.model, test_benign);

    for (const std::string& kind : test_set) {
        auto records = collect("test", kind);
        if (records.empty()) throw std::runtime_error("no test-split graphs for attack " + kind);
        const std::vector<double> adv_scores =
            score_graphs(result.training.model, load_all(records));

        std::vector<double> scores = benign_scores;
        std::vector<int> labels(benign_scores.size(), 0);
        scores.insert(scores.end(), adv_scores.begin(), adv_scores.end());
        labels.insert(labels.end(), adv_scores.size(), 1);
        result.per_attack.push_back({kind, full_report(scores, labels, cfg.threshold)});
    }
    return result;
}

OverheadReport measure_overhead(const TargetModel& model, const std::vector<Tensor>& inputs,
                                const ExtractionConfig& cfg) {
    if (inputs.size() < 10)
        throw std::invalid_argument("overhead measurement needs at least 10 inputs");

    ProvenanceEngine engine = register_hooks(model);
    OverheadReport report;
    report.node_feature_dim = 5;
    report.edge_attr_dim = 1;
    double total_seconds = 0.0, total_nodes = 0.0, total_edges = 0.0, total_bytes = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        GraphMeta meta;
        char id[32];
        std::snprintf(id, sizeof id, "overhead-%05zu", i);
        meta.sample_id = id;

        const auto t0 = std::chrono::steady_clock::now();
        const InferenceProvenanceGraph ipg = extract_ipg(engine, inputs[i], cfg, meta);
        const std::string bytes = serialize_ipg(ipg);
        const auto t1 = std::chrono::steady_clock::now();

        const double seconds = std::chrono::duration<double>(t1 - t0).count();
        const double size = static_cast<double>(ipg.nodes.size() + ipg.edges.size());
        report.samples.push_back({size, seconds});
        total_seconds += seconds;
        total_nodes += static_cast<double>(ipg.nodes.size());
        total_edges += static_cast<double>(ipg.edges.size());
        total_bytes += static_cast<double>(bytes.size());
    }
    const double n = static_cast<double>(inputs.size());
    report.t_overhead_s = total_seconds / n;
    report.avg_nodes = total_nodes / n;
    report.avg_edges = total_edges / n;
    report.s_ipg_mb = total_bytes / n / (1024.0 * 1024.0);
    return report;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("x and y differ in length");
    if (x.size() < 2) throw std::invalid_argument("linear fit needs at least 2 points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("linear fit needs non-constant x");

    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (fit.intercept + fit.slope * x[i]);
        ss_res += e * e;
        ss_tot += (y[i] - my) * (y[i] - my);
    }
    fit.r2 = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
    return fit;
}

std::string format_table(const std::vector<std::vector<std::string>>& rows) {
    if (rows.empty()) throw std::invalid_argument("table needs a header row");
    const std::size_t cols = rows[0].size();
    std::vector<std::size_t> width(cols, 0);
    for (const auto& row : rows) {
        if (row.size() != cols) throw std::invalid_argument("ragged table row");
        for (std::size_t c = 0; c < cols; ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::string out;
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (c) out += "  ";
            out += row[c];
            if (c + 1 < cols) out.append(width[c] - row[c].size(), ' ');
        }
        out += '\n';
    };
    emit(rows[0]);
    std::vector<std::string> rule(cols);
    for (std::size_t c = 0; c < cols; ++c) rule[c].assign(width[c], '-');
    emit(rule);
    for (std::size_t r = 1; r < rows.size(); ++r) emit(rows[r]);
    return out;
}

std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

namespace {

const std::vector<std::string> kMetricColumns = {
    "attack", "accuracy",      "precision",     "recall", "f1",
    "roc_auc", "pr_auc",        "tpr_at_1pct_fpr", "fpr_at_95pct_tpr", "n"};

std::vector<std::string> metric_cells(const AttackReport& row,
                                      const std::function<std::string(double)>& fmt) {
    const MetricReport& m = row.metrics;
    return {row.attack,
            fmt(m.accuracy),
            fmt(m.precision),
            fmt(m.recall),
            fmt(m.f1),
            fmt(m.roc_auc),
            fmt(m.pr_auc),
            fmt(m.tpr_at_1pct_fpr),
            fmt(m.fpr_at_95pct_tpr),
            std::to_string(m.n_scores)};
}

}  // namespace

std::string protocol_table(const ProtocolResult& result) {
    std::vector<std::vector<std::string>> rows{kMetricColumns};
    for (const AttackReport& row : result.per_attack)
        rows.push_back(metric_cells(row, [](double v) { return format_fixed(v, 4); }));
    return format_table(rows);
}

std::string protocol_tsv(const ProtocolResult& result) {
    std::string out = join(kMetricColumns, "\t") + "\n";
    for (const AttackReport& row : result.per_attack)
        out += join(metric_cells(row, fmt_g17), "\t") + "\n";
    return out;
}

std::string overhead_table(const OverheadReport& report) {
    return format_table({{"quantity", "value"},
                         {"t_overhead_s", format_fixed(report.t_overhead_s, 6)},
                         {"avg_nodes", format_fixed(report.avg_nodes, 2)},
                         {"avg_edges", format_fixed(report.avg_edges, 2)},
                         {"node_feature_dim", std::to_string(report.node_feature_dim)},
                         {"edge_attr_dim", std::to_string(report.edge_attr_dim)},
                         {"s_ipg_mb", format_fixed(report.s_ipg_mb, 6)}});
}

std::string overhead_tsv(const OverheadReport& report) {
    std::string out = "size\tseconds\n";
    for (const OverheadSample& s : report.samples)
        out += fmt_g17(s.size) + "\t" + fmt_g17(s.seconds) + "\n";
    return out;
}

}  // namespace ipg
