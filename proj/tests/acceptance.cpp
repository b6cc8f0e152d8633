// End-to-end acceptance gate: one pass/fail line per criterion, nonzero exit
// on any failure. Each criterion runs independently; an exception fails only
// its own criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ipg/attacks.hpp"
#include "ipg/detector.hpp"
#include "ipg/eval.hpp"
#include "ipg/metrics.hpp"
#include "ipg/nn.hpp"
#include "ipg/pipeline.hpp"
#include "ipg/provenance.hpp"
#include "ipg/rng.hpp"
#include "ipg/store.hpp"
#include "ipg/targets.hpp"
#include "ipg/tensor.hpp"

using namespace ipg;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] %2d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

void run_criterion(int id, const std::string& name,
                   const std::function<std::pair<bool, std::string>()>& body) {
    try {
        const auto [pass, detail] = body();
        report(id, name, pass, detail);
    } catch (const std::exception& e) {
        report(id, name, false, std::string("exception: ") + e.what());
    }
}

double elapsed_s(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

bool close_enough(double got, double want) {
    if (std::abs(want) > 1e-6) return std::abs(got - want) <= 1e-4 * std::abs(want);
    return std::abs(got - want) <= 1e-6;
}

// ---------------------------------------------------------------- criterion 1

std::pair<bool, std::string> gradients_match_finite_differences() {
    const auto start = clock_type::now();
    Rng rng(1001);
    int probes = 0, mismatches = 0;

    struct Case {
        const char* label;
        TargetModel model;
    };
    std::vector<Case> cases;
    cases.push_back({"dense", build_mlp("g-dense", 6, {5}, 3, 11)});
    cases.push_back({"dense-relu", build_mlp("g-relu", 6, {5, 4}, 3, 12)});
    cases.push_back({"conv", build_cnn("g-conv", {1, 6, 6}, {2}, 2, 13)});
    cases.push_back({"conv-pool-flatten", build_cnn("g-pool", {2, 12, 12}, {3, 4}, 3, 14)});
    // maxpool and flatten carry no parameters; the conv nets exercise their
    // backward paths, and this parameter-free net isolates them on the input.
    {
        TargetModel m;
        m.model_id = "g-pool-only";
        m.input_shape = {1, 4, 4};
        m.class_count = 4;
        m.layers = {LayerSpec::make_maxpool2d(2), LayerSpec::make_flatten()};
        m.rebuild_param_index();
        cases.push_back({"pool-flatten", std::move(m)});
    }

    for (Case& c : cases) {
        const std::vector<int>& shape = c.model.input_shape;
        for (int probe = 0; probe < 20; ++probe) {
            Tensor x(shape);
            for (double& v : x.values()) v = rng.uniform(0.05, 0.95);
            const int label = rng.below(c.model.class_count);

            // One random input coordinate.
            {
                const std::int64_t i = rng.below(static_cast<int>(x.size()));
                const Tensor g = grad_input(c.model, x, label);
                const double h = 1e-4;
                Tensor up = x, dn = x;
                up[i] += h;
                dn[i] -= h;
                const double fd = (cross_entropy(forward(c.model, up).logits(), label) -
                                   cross_entropy(forward(c.model, dn).logits(), label)) /
                                  (2.0 * h);
                ++probes;
                if (!close_enough(g[i], fd)) ++mismatches;
            }

            // One random parameter coordinate, when the model has any.
            if (!c.model.params.empty()) {
                const std::vector<Tensor> grads = grad_params(c.model, {{x, label}});
                const std::size_t p = rng.below(static_cast<int>(c.model.params.size()));
                const std::int64_t i = rng.below(static_cast<int>(c.model.params[p].size()));
                const double h = 1e-4;
                TargetModel probe_model = c.model;
                probe_model.params[p][i] += h;
                const double up = cross_entropy(forward(probe_model, x).logits(), label);
                probe_model.params[p][i] -= 2.0 * h;
                const double dn = cross_entropy(forward(probe_model, x).logits(), label);
                ++probes;
                if (!close_enough(grads[p][i], (up - dn) / (2.0 * h))) ++mismatches;
            }
        }
    }

    const double secs = elapsed_s(start);
    const bool pass = mismatches == 0 && secs < 60.0;
    return {pass, fmt("%d finite-difference probes over %zu architectures, %d mismatches, %.1fs",
                      probes, cases.size(), mismatches, secs)};
}

// ---------------------------------------------------------------- criterion 2

std::pair<bool, std::string> attack_contracts_hold() {
    const LabeledDataset all = make_binary_features(560, 16, 2, 0.12, 2002);
    const LabeledDataset train = slice_dataset(all, 0, 380);
    const LabeledDataset val = slice_dataset(all, 380, 430);
    const LabeledDataset pool = slice_dataset(all, 430, 560);
    TargetModel target = build_mlp("contracts", 16, {12}, 2, 2002);
    TrainConfig tc;
    tc.epochs = 12;
    tc.seed = 2002;
    train_target(target, train, val, tc);

    std::map<std::string, std::size_t> pool_index;
    for (std::size_t i = 0; i < pool.size(); ++i) pool_index[pool.sample_ids[i]] = i;

    int checked = 0, violations = 0;
    for (AttackKind kind : {AttackKind::fgsm, AttackKind::pgd, AttackKind::spsa,
                            AttackKind::square, AttackKind::bitflip}) {
        AttackConfig cfg;
        cfg.kind = kind;
        cfg.epsilon = 0.3;
        cfg.steps = 8;
        cfg.query_budget = 512;
        cfg.k_max = 6;
        cfg.seed = 2003;
        cfg.keep_only_successful = false;
        const AttackSet set = generate_attack_set(target, pool, cfg);
        for (std::size_t i = 0; i < set.results.size(); ++i) {
            const AttackResult& r = set.results[i];
            const Tensor& x = pool.inputs[pool_index.at(r.sample_id)];
            bool ok = true;
            if (kind == AttackKind::bitflip) {
                int hamming = 0;
                for (std::int64_t t = 0; t < x.size(); ++t) {
                    const double v = r.adversarial[t];
                    if (v != 0.0 && v != 1.0) ok = false;
                    if (v != x[t]) ++hamming;
                }
                if (hamming > cfg.k_max) ok = false;
            } else {
                if (!(linf_distance(x, r.adversarial) <= cfg.epsilon)) ok = false;
                for (double v : r.adversarial.values())
                    if (v < 0.0 || v > 1.0) ok = false;
            }
            if (kind == AttackKind::spsa || kind == AttackKind::square) {
                if (r.queries_used > cfg.query_budget) ok = false;
            }
            if (kind == AttackKind::spsa && r.queries_used % (2 * cfg.spsa_samples) != 0) ok = false;
            ++checked;
            if (!ok) ++violations;
        }
    }

    int disagreements = 0;
    for (std::size_t i = 0; i < 50; ++i) {
        const Tensor& x = pool.inputs[i];
        const int y = pool.labels[i];
        const AttackResult a = fgsm(target, x, y, 0.3);
        const AttackResult b = pgd(target, x, y, 0.3, 1, 0.3, 1, false);
        if (!(a.adversarial == b.adversarial)) ++disagreements;
    }

    const bool pass = checked >= 500 && violations == 0 && disagreements == 0;
    return {pass, fmt("%d results checked (budget/box/query contracts), %d violations; "
                      "single-step equivalence on 50 inputs, %d disagreements",
                      checked, violations, disagreements)};
}

// ---------------------------------------------------------------- criterion 3

std::pair<bool, std::string> extraction_is_faithful() {
    const TargetModel small = build_mlp("x-small", 4, {3}, 2, 3001);
    ProvenanceEngine engine = register_hooks(small);
    ExtractionConfig zero_tau;
    GraphMeta meta;
    meta.sample_id = "probe";
    meta.model_id = small.model_id;
    const InferenceProvenanceGraph g =
        extract_ipg(engine, Tensor({4}, {0.8, 0.2, 0.6, 0.4}), zero_tau, meta);
    const bool counts_ok = g.nodes.size() == 9 && g.edges.size() == 18;

    const TargetModel wide = build_mlp("x-wide", 8, {6, 5}, 3, 3002);
    ProvenanceEngine wide_engine = register_hooks(wide);
    Rng rng(3003);
    int monotonicity_breaks = 0, logit_mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Tensor x({8});
        for (double& v : x.values()) v = rng.uniform(0.0, 1.0);

        std::vector<std::map<std::uint32_t, IPGNode>> levels;
        for (double tau : {0.0, 0.1, 1.0, 10.0}) {
            ExtractionConfig cfg;
            cfg.tau = tau;
            GraphMeta m2;
            m2.sample_id = "mono";
            const InferenceProvenanceGraph gi = extract_ipg(wide_engine, x, cfg, m2);
            std::map<std::uint32_t, IPGNode> nodes;
            for (const IPGNode& n : gi.nodes) nodes[n.node_id] = n;
            levels.push_back(std::move(nodes));
        }
        for (std::size_t l = 1; l < levels.size(); ++l) {
            for (const auto& [id, node] : levels[l]) {
                const auto prev = levels[l - 1].find(id);
                if (prev == levels[l - 1].end()) {
                    ++monotonicity_breaks;  // tighter threshold produced a new node
                    continue;
                }
                if (prev->second.mean != node.mean || prev->second.l2_norm != node.l2_norm ||
                    prev->second.type != node.type)
                    ++monotonicity_breaks;  // same id no longer names the same neuron
            }
        }

        const ActivationTrace plain = forward(wide, x);
        const ActivationTrace& hooked = wide_engine.run(x);
        if (!(plain.logits() == hooked.logits())) ++logit_mismatches;
    }

    const bool pass = counts_ok && monotonicity_breaks == 0 && logit_mismatches == 0;
    return {pass, fmt("4-3-2 net: %zu nodes %zu edges (want 9/18); 100 inputs x 4 thresholds: "
                      "%d nesting breaks; hooked forward: %d logit mismatches",
                      g.nodes.size(), g.edges.size(), monotonicity_breaks, logit_mismatches)};
}

// ---------------------------------------------------------------- criterion 4

std::pair<bool, std::string> serialization_round_trips() {
    const TargetModel mlp = build_mlp("s-mlp", 10, {8}, 2, 4001);
    const TargetModel cnn = build_cnn("s-cnn", {1, 8, 8}, {3}, 2, 4002);
    ProvenanceEngine mlp_engine = register_hooks(mlp);
    ProvenanceEngine cnn_engine = register_hooks(cnn);
    Rng rng(4003);

    int round_trips = 0, mismatches = 0, corruption_misses = 0;
    for (int i = 0; i < 200; ++i) {
        InferenceProvenanceGraph g;
        GraphMeta meta;
        meta.sample_id = "g-" + std::to_string(i);
        meta.attack_kind = i % 3 == 0 ? "pgd" : "benign";
        meta.graph_label = i % 3 == 0 ? 1 : 0;
        meta.input_label = i % 2;
        ExtractionConfig cfg;
        cfg.tau = (i % 4) * 0.05;
        if (i % 2 == 0) {
            Tensor x({10});
            for (double& v : x.values()) v = rng.uniform(0.0, 1.0);
            g = extract_ipg(mlp_engine, x, cfg, meta);
        } else {
            Tensor x({1, 8, 8});
            for (double& v : x.values()) v = rng.uniform(0.0, 1.0);
            g = extract_ipg(cnn_engine, x, cfg, meta);
        }

        const std::string bytes = serialize_ipg(g);
        const InferenceProvenanceGraph back = deserialize_ipg(bytes);
        ++round_trips;
        if (!(back == g) || serialize_ipg(back) != bytes) ++mismatches;

        if (i < 20) {
            // Corruption must never pass silently: each mutation either throws
            // a positioned error or (for payload flips) changes the graph.
            bool caught = true;
            try {
                deserialize_ipg(bytes.substr(0, bytes.size() - 3));
                caught = false;
            } catch (const ParseError&) {
            }
            if (!caught) ++corruption_misses;

            std::string trailing = bytes;
            trailing.push_back('\0');
            caught = true;
            try {
                deserialize_ipg(trailing);
                caught = false;
            } catch (const ParseError&) {
            }
            if (!caught) ++corruption_misses;

            std::string magic = bytes;
            magic[1] = 'X';
            caught = true;
            try {
                deserialize_ipg(magic);
                caught = false;
            } catch (const ParseError& e) {
                if (e.offset() > 4) caught = false;  // must point at the magic
            }
            if (!caught) ++corruption_misses;

            std::string flipped = bytes;
            flipped[bytes.size() / 2] ^= 0x20;
            try {
                const InferenceProvenanceGraph mutant = deserialize_ipg(flipped);
                if (mutant == g) ++corruption_misses;
            } catch (const ParseError&) {
            }
        }
    }

    const bool pass = mismatches == 0 && corruption_misses == 0;
    return {pass, fmt("%d graphs round-tripped byte-identically, %d mismatches; "
                      "80 corruptions applied, %d slipped through",
                      round_trips, mismatches, corruption_misses)};
}

// ---------------------------------------------------------------- criterion 5

namespace oracle {

double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0.0;
    std::int64_t pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (y[i] != 1) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j] != 0) continue;
            ++pairs;
            if (s[i] > s[j]) wins += 1.0;
            else if (s[i] == s[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

struct Counts {
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

Counts count_at(const std::vector<double>& s, const std::vector<int>& y, double threshold) {
    Counts c;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const bool pred = s[i] >= threshold;
        if (pred && y[i] == 1) ++c.tp;
        else if (pred && y[i] == 0) ++c.fp;
        else if (!pred && y[i] == 1) ++c.fn;
        else ++c.tn;
    }
    return c;
}

std::vector<double> thresholds(const std::vector<double>& s) {
    std::set<double, std::greater<double>> d(s.begin(), s.end());
    return {d.begin(), d.end()};
}

double pr_auc(const std::vector<double>& s, const std::vector<int>& y) {
    std::int64_t positives = 0;
    for (int label : y) positives += label;
    double area = 0.0, prev_recall = 0.0;
    for (double t : thresholds(s)) {
        const Counts c = count_at(s, y, t);
        const double recall = static_cast<double>(c.tp) / static_cast<double>(positives);
        const double precision =
            c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return area;
}

double tpr_at_fpr(const std::vector<double>& s, const std::vector<int>& y, double budget) {
    std::int64_t pos = 0, neg = 0;
    for (int label : y) (label == 1 ? pos : neg)++;
    double best = 0.0;
    for (double t : thresholds(s)) {
        const Counts c = count_at(s, y, t);
        if (static_cast<double>(c.fp) / neg <= budget)
            best = std::max(best, static_cast<double>(c.tp) / pos);
    }
    return best;
}

double fpr_at_tpr(const std::vector<double>& s, const std::vector<int>& y, double target) {
    std::int64_t pos = 0, neg = 0;
    for (int label : y) (label == 1 ? pos : neg)++;
    double best = 0.0;
    bool reachable = 0.0 >= target;
    if (!reachable) best = 1.0;
    for (double t : thresholds(s)) {
        const Counts c = count_at(s, y, t);
        if (static_cast<double>(c.tp) / pos >= target) {
            const double fpr = static_cast<double>(c.fp) / neg;
            best = reachable ? std::min(best, fpr) : fpr;
            reachable = true;
        }
    }
    return reachable ? best : 1.0;
}

}  // namespace oracle

std::pair<bool, std::string> metrics_match_bruteforce() {
    Rng rng(5001);
    int instances = 0, disagreements = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.below(19);
        std::vector<double> s(n);
        std::vector<int> y(n);
        const int levels = 2 + rng.below(7);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng.below(levels)) / (levels - 1);
            y[i] = rng.bernoulli(0.5) ? 1 : 0;
        }
        y[0] = 0;
        y[n - 1] = 1;
        ++instances;

        bool ok = true;
        if (std::abs(roc_auc(s, y) - oracle::pairwise_auc(s, y)) > 1e-12) ok = false;
        if (std::abs(pr_auc(s, y) - oracle::pr_auc(s, y)) > 1e-12) ok = false;
        for (double budget : {0.0, 0.01, 0.25, 1.0})
            if (std::abs(tpr_at_fpr(s, y, budget) - oracle::tpr_at_fpr(s, y, budget)) > 1e-12)
                ok = false;
        for (double target : {0.0, 0.5, 0.95, 1.0})
            if (std::abs(fpr_at_tpr(s, y, target) - oracle::fpr_at_tpr(s, y, target)) > 1e-12)
                ok = false;

        const double threshold = static_cast<double>(rng.below(levels)) / (levels - 1);
        const ConfusionMetrics cm = confusion_metrics(s, y, threshold);
        const oracle::Counts oc = oracle::count_at(s, y, threshold);
        if (cm.tp != oc.tp || cm.fp != oc.fp || cm.tn != oc.tn || cm.fn != oc.fn) ok = false;

        if (!ok) ++disagreements;
    }

    const double worked = roc_auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1});
    const bool worked_ok = worked == 0.75;

    const bool pass = disagreements == 0 && worked_ok;
    return {pass, fmt("%d random tied instances vs naive recomputation, %d disagreements; "
                      "four-point example gives %.2f (want 0.75)",
                      instances, disagreements, worked)};
}

// ------------------------------------------------------- desk fixture (6/7/8/11)

struct DeskFixture {
    bool ran = false;
    std::string error;
    DeskResult result;
    double first_run_s = 0.0;
    fs::path dir_a, dir_b;
};

DeskFixture& desk() {
    static DeskFixture fixture;
    if (fixture.ran || !fixture.error.empty()) return fixture;
    try {
        fixture.dir_a = fs::temp_directory_path() / "ipg-acceptance-desk-a";
        fixture.dir_b = fs::temp_directory_path() / "ipg-acceptance-desk-b";
        fs::remove_all(fixture.dir_a);
        fs::remove_all(fixture.dir_b);

        DeskConfig cfg;
        cfg.seed = 1;
        cfg.out_dir = fixture.dir_a;
        const auto start = clock_type::now();
        fixture.result = run_desk(cfg);
        fixture.first_run_s = elapsed_s(start);

        cfg.out_dir = fixture.dir_b;
        run_desk(cfg);
        fixture.ran = true;
    } catch (const std::exception& e) {
        fixture.error = e.what();
    }
    return fixture;
}

std::pair<bool, std::string> desk_intra_detects() {
    DeskFixture& f = desk();
    if (!f.ran) return {false, "pipeline failed: " + f.error};
    const MetricReport* m = find_metrics(f.result, "intra_pgd", "pgd");
    if (m == nullptr) return {false, "no intra_pgd metrics in the pipeline result"};
    const bool pass =
        f.result.clean_accuracy >= 0.95 && m->roc_auc >= 0.90 && f.first_run_s < 600.0;
    return {pass, fmt("clean accuracy %.4f (want >= 0.95), intra roc_auc %.4f (want >= 0.90), "
                      "run took %.0fs (limit 600)",
                      f.result.clean_accuracy, m->roc_auc, f.first_run_s)};
}

std::pair<bool, std::string> desk_crosses_threat_classes() {
    DeskFixture& f = desk();
    if (!f.ran) return {false, "pipeline failed: " + f.error};
    const MetricReport* to_query = find_metrics(f.result, "cross_pgd_to_spsa", "spsa");
    const MetricReport* to_gradient = find_metrics(f.result, "cross_spsa_to_pgd", "pgd");
    if (to_query == nullptr || to_gradient == nullptr)
        return {false, "missing cross-protocol metrics in the pipeline result"};
    const bool pass = to_query->roc_auc >= 0.80 && to_gradient->roc_auc >= 0.80;
    return {pass, fmt("gradient->query roc_auc %.4f, query->gradient roc_auc %.4f (want >= 0.80)",
                      to_query->roc_auc, to_gradient->roc_auc)};
}

std::pair<bool, std::string> desk_multi_holds_up() {
    DeskFixture& f = desk();
    if (!f.ran) return {false, "pipeline failed: " + f.error};
    std::string detail;
    bool pass = true;
    for (const char* attack : {"fgsm", "pgd", "spsa"}) {
        const MetricReport* multi = find_metrics(f.result, "multi", attack);
        const MetricReport* intra =
            find_metrics(f.result, std::string("intra_") + attack, attack);
        if (multi == nullptr || intra == nullptr) return {false, "missing per-attack metrics"};
        const bool ok = multi->roc_auc >= 0.85 && std::abs(multi->roc_auc - intra->roc_auc) <= 0.10;
        pass = pass && ok;
        if (!detail.empty()) detail += ", ";
        detail += fmt("%s multi %.4f vs intra %.4f", attack, multi->roc_auc, intra->roc_auc);
    }
    return {pass, detail + " (want multi >= 0.85 and within 0.10 of intra)"};
}

// ---------------------------------------------------------------- criterion 9

std::pair<bool, std::string> extraction_scales_linearly() {
    Rng rng(9001);
    std::vector<double> sizes, times;
    double min_size = 0.0, max_size = 0.0;
    for (int width : {16, 32, 64, 128, 192}) {
        const TargetModel m = build_mlp("scale-" + std::to_string(width), 16, {width}, 2, 9002);
        std::vector<Tensor> inputs;
        for (int i = 0; i < 60; ++i) {
            Tensor x({16});
            for (double& v : x.values()) v = rng.uniform(0.0, 1.0);
            inputs.push_back(std::move(x));
        }
        const OverheadReport r = measure_overhead(m, inputs, ExtractionConfig{});
        const double size = r.avg_nodes + r.avg_edges;
        sizes.push_back(size);
        times.push_back(r.t_overhead_s);
        if (min_size == 0.0 || size < min_size) min_size = size;
        max_size = std::max(max_size, size);
    }
    const LinearFit fit = linear_fit(sizes, times);
    const double span = max_size / min_size;
    const bool pass = sizes.size() >= 4 && span >= 8.0 && fit.r2 >= 0.9 && fit.slope > 0.0;
    return {pass, fmt("%zu sizes spanning %.1fx (|V|+|E| %.0f..%.0f), time-vs-size r2 %.4f "
                      "(want >= 0.9)",
                      sizes.size(), span, min_size, max_size, fit.r2)};
}

// --------------------------------------------------------------- criterion 10

std::pair<bool, std::string> split_hygiene_holds() {
    int violations = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        Rng rng(seed * 31 + 7);
        std::vector<ManifestRecord> records;
        const int inputs = 20 + rng.below(30);
        for (int i = 0; i < inputs; ++i) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "in-%03d", i);
            ManifestRecord r;
            r.path = std::string("graphs/") + buf + ".ipg";
            r.model_id = "hygiene";
            r.sample_id = buf;
            r.input_label = rng.below(2);
            r.graph_label = 0;
            r.attack_kind = "benign";
            r.config_hash = "0123456789abcdef";
            records.push_back(r);
            for (const char* kind : {"fgsm", "pgd", "spsa"}) {
                if (!rng.bernoulli(0.7)) continue;
                ManifestRecord a = r;
                a.sample_id = std::string(buf) + "::" + kind;
                a.path = std::string("graphs/") + buf + "__" + kind + ".ipg";
                a.graph_label = 1;
                a.attack_kind = kind;
                records.push_back(a);
            }
        }
        const std::vector<double> ratios =
            seed % 2 == 0 ? std::vector<double>{0.8, 0.2} : std::vector<double>{0.6, 0.2, 0.2};
        const Manifest m = build_dataset(records, ratios, seed);
        violations += static_cast<int>(validate_splits(m).size());
    }

    // A manifest corrupted by hand must be caught.
    std::vector<ManifestRecord> records;
    for (int i = 0; i < 6; ++i) {
        ManifestRecord r;
        r.path = "graphs/c-" + std::to_string(i) + ".ipg";
        r.model_id = "hygiene";
        r.sample_id = "c-" + std::to_string(i);
        r.input_label = 0;
        r.graph_label = 0;
        r.attack_kind = "benign";
        r.config_hash = "0123456789abcdef";
        records.push_back(r);
        ManifestRecord a = r;
        a.sample_id += "::pgd";
        a.path = "graphs/c-" + std::to_string(i) + "__pgd.ipg";
        a.graph_label = 1;
        a.attack_kind = "pgd";
        records.push_back(a);
    }
    Manifest corrupted = build_dataset(records, {0.5, 0.5}, 1);
    bool flipped = false;
    for (ManifestRecord& r : corrupted.records)
        if (!flipped && r.attack_kind == "pgd") {
            r.split = r.split == "train" ? "test" : "train";
            flipped = true;
        }
    const bool leak_caught = validate_splits(corrupted).size() == 1;

    // A syntactically mangled manifest file must be rejected with a position.
    const fs::path dir = fs::temp_directory_path() / "ipg-acceptance-manifest";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream out(dir / "mangled.tsv", std::ios::binary);
    out << "#ipg-manifest v1\n#seed 1\n#fields path model_id sample_id input_label graph_label "
           "attack_kind split config_hash\ngraphs/x.ipg\tm\tx\t0\t1\tpgd\tnowhere\tdeadbeef00000000\n";
    out.close();
    bool parse_caught = false;
    std::size_t parse_line = 0;
    try {
        load_manifest(dir / "mangled.tsv");
    } catch (const ParseError& e) {
        parse_caught = true;
        parse_line = e.offset();
    }

    const bool pass = violations == 0 && leak_caught && parse_caught && parse_line == 4;
    return {pass, fmt("50 seeded splits: %d leaked inputs; forced leak caught: %s; "
                      "mangled file rejected at line %zu",
                      violations, leak_caught ? "yes" : "no", parse_line)};
}

// --------------------------------------------------------------- criterion 11

std::pair<bool, std::string> pipeline_is_reproducible() {
    DeskFixture& f = desk();
    if (!f.ran) return {false, "pipeline failed: " + f.error};

    std::map<fs::path, fs::path> files_a, files_b;
    for (const auto& entry : fs::recursive_directory_iterator(f.dir_a))
        if (entry.is_regular_file())
            files_a[fs::relative(entry.path(), f.dir_a)] = entry.path();
    for (const auto& entry : fs::recursive_directory_iterator(f.dir_b))
        if (entry.is_regular_file())
            files_b[fs::relative(entry.path(), f.dir_b)] = entry.path();

    if (files_a.size() != files_b.size())
        return {false, fmt("run produced %zu files vs %zu", files_a.size(), files_b.size())};

    auto read_all = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };

    std::size_t compared = 0, differing = 0;
    std::string first_diff;
    for (const auto& [rel, full_a] : files_a) {
        const auto it = files_b.find(rel);
        if (it == files_b.end()) {
            ++differing;
            if (first_diff.empty()) first_diff = rel.string() + " (missing)";
            continue;
        }
        ++compared;
        if (read_all(full_a) != read_all(it->second)) {
            ++differing;
            if (first_diff.empty()) first_diff = rel.string();
        }
    }

    const bool pass = differing == 0 && compared > 0;
    std::string detail = fmt("two same-seed runs: %zu files compared byte for byte, %zu differ",
                             compared, differing);
    if (!first_diff.empty()) detail += " (first: " + first_diff + ")";
    return {pass, detail};
}

}  // namespace

int main() {
    std::printf("acceptance checks\n=================\n");
    run_criterion(1, "autodiff matches finite differences", gradients_match_finite_differences);
    run_criterion(2, "attack budgets and equivalences hold", attack_contracts_hold);
    run_criterion(3, "graph extraction is faithful and threshold-monotone", extraction_is_faithful);
    run_criterion(4, "graph serialization round-trips canonically", serialization_round_trips);
    run_criterion(5, "metrics agree with brute-force recomputation", metrics_match_bruteforce);
    run_criterion(6, "pipeline detects the attack it trained on", desk_intra_detects);
    run_criterion(7, "detector transfers across threat classes", desk_crosses_threat_classes);
    run_criterion(8, "joint training holds up per attack", desk_multi_holds_up);
    run_criterion(9, "extraction cost scales linearly with graph size", extraction_scales_linearly);
    run_criterion(10, "splits never leak inputs", split_hygiene_holds);
    run_criterion(11, "same seed reproduces every output byte", pipeline_is_reproducible);

    std::printf("=================\n%s (%d/11 passed)\n", failures == 0 ? "ALL PASS" : "FAILURES",
                11 - failures);
    return failures == 0 ? 0 : 1;
}
