// Command-line front end for the provenance pipeline: data/model preparation,
// attack generation, graph extraction, dataset assembly, detector training,
// and the evaluation protocols, each as one subcommand. Every writing
// subcommand logs its resolved settings (plus a hash) next to its outputs so
// runs can be repeated from the log alone.
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ipg/attacks.hpp"
#include "ipg/detector.hpp"
#include "ipg/eval.hpp"
#include "ipg/metrics.hpp"
#include "ipg/pipeline.hpp"
#include "ipg/provenance.hpp"
#include "ipg/rng.hpp"
#include "ipg/store.hpp"
#include "ipg/targets.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ipg;

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

void log_run_config(const fs::path& out_dir, const std::string& subcommand,
                    const json& settings) {
    fs::create_directories(out_dir);
    json doc;
    doc["subcommand"] = subcommand;
    doc["settings"] = settings;
    doc["config_hash"] = hex64(fnv1a64(settings.dump()));
    write_text_file(out_dir / "run_config.json", doc.dump(2) + "\n");
}

// Splits [0, n) into contiguous chunks, one worker thread each. Chunk outputs
// must be independent so the thread count never changes results.
void parallel_chunks(std::size_t n, int threads,
                     const std::function<void(std::size_t, std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        fn(0, n);
        return;
    }
    const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::thread> workers;
    std::exception_ptr err;
    std::mutex mu;
    for (std::size_t k = 0; k < t; ++k) {
        const std::size_t lo = n * k / t, hi = n * (k + 1) / t;
        workers.emplace_back([&, lo, hi] {
            try {
                fn(lo, hi);
            } catch (...) {
                const std::lock_guard<std::mutex> guard(mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (std::thread& w : workers) w.join();
    if (err) std::rethrow_exception(err);
}

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------- train-target

struct TrainTargetOpts {
    std::string out;
    std::string arch = "mlp";
    std::string data_kind = "binary";  // binary | blobs; cnn always blob images
    std::string model_id;
    int features = 20;
    int classes = 2;
    std::vector<int> hidden = {16};
    std::vector<int> channels = {4};
    std::vector<int> image_shape = {1, 8, 8};
    double noise = 0.15;
    int samples = 2000;
    int val_samples = 500;
    int pool_samples = 0;
    int epochs = 20;
    int batch = 32;
    double lr = 1e-3;
    std::uint64_t seed = 1;
};

void cmd_train_target(const TrainTargetOpts& o) {
    const fs::path out(o.out);
    log_run_config(out, "train-target",
                   {{"arch", o.arch},
                    {"data", o.data_kind},
                    {"model_id", o.model_id},
                    {"features", o.features},
                    {"classes", o.classes},
                    {"hidden", o.hidden},
                    {"channels", o.channels},
                    {"image_shape", o.image_shape},
                    {"noise", o.noise},
                    {"samples", o.samples},
                    {"val_samples", o.val_samples},
                    {"pool_samples", o.pool_samples},
                    {"epochs", o.epochs},
                    {"batch", o.batch},
                    {"lr", o.lr},
                    {"seed", o.seed},
                    {"out", o.out}});

    // One generated task, sliced into train/val/pool so all three share the
    // same class prototypes.
    auto make = [&](int count, std::uint64_t seed) {
        if (o.arch == "cnn") {
            if (o.image_shape.size() != 3)
                throw std::runtime_error("--image-shape needs channels,height,width");
            return make_blob_images(count, o.image_shape[0], o.image_shape[1], o.image_shape[2],
                                    o.classes, o.noise, seed, "img");
        }
        if (o.data_kind == "blobs")
            return make_blobs(count, o.features, o.classes, o.noise, seed, "blob");
        return make_binary_features(count, o.features, o.classes, o.noise, seed, "bin");
    };
    const std::size_t n_train = static_cast<std::size_t>(o.samples);
    const std::size_t n_val = static_cast<std::size_t>(o.val_samples);
    const std::size_t n_pool = static_cast<std::size_t>(o.pool_samples);
    const LabeledDataset everything =
        make(static_cast<int>(n_train + n_val + n_pool), mix_seed(o.seed, "data"));
    const LabeledDataset train_data = slice_dataset(everything, 0, n_train);
    const LabeledDataset val_data = slice_dataset(everything, n_train, n_train + n_val);

    const std::string model_id = o.model_id.empty() ? o.arch : o.model_id;
    TargetModel model =
        o.arch == "cnn"
            ? build_cnn(model_id, o.image_shape, o.channels, o.classes,
                        mix_seed(o.seed, "model-init"))
            : build_mlp(model_id, o.features, o.hidden, o.classes, mix_seed(o.seed, "model-init"));

    TrainConfig tcfg;
    tcfg.epochs = o.epochs;
    tcfg.batch_size = o.batch;
    tcfg.learning_rate = o.lr;
    tcfg.seed = mix_seed(o.seed, "target-train");
    const TrainHistory history = train_target(model, train_data, val_data, tcfg);

    save_target_model(out / "target_model.ipgt", model);
    save_labeled_dataset(out / "train_data.ipgt", train_data);
    save_labeled_dataset(out / "val_data.ipgt", val_data);
    if (o.pool_samples > 0)
        save_labeled_dataset(out / "pool_data.ipgt",
                             slice_dataset(everything, n_train + n_val, n_train + n_val + n_pool));

    std::string tsv = "epoch\ttrain_loss\ttrain_accuracy\tval_accuracy\n";
    for (std::size_t e = 0; e < history.train_loss.size(); ++e)
        tsv += std::to_string(e + 1) + "\t" + fmt_g17(history.train_loss[e]) + "\t" +
               fmt_g17(history.train_accuracy[e]) + "\t" + fmt_g17(history.val_accuracy[e]) + "\n";
    write_text_file(out / "train_history.tsv", tsv);

    std::printf("model %s: %lld parameters, train accuracy %.4f, val accuracy %.4f\n",
                model.model_id.c_str(), static_cast<long long>(model.param_count()),
                history.train_accuracy.back(), history.val_accuracy.back());
}

// ---------------------------------------------------------------------- attack

struct AttackOpts {
    std::string model, data, out;
    std::string kind = "pgd";
    double epsilon = 0.3;
    int steps = 10;
    double alpha = 0.0;
    bool no_random_start = false;
    int budget = 2048;
    int spsa_samples = 32;
    double spsa_delta = 0.01;
    int kmax = 8;
    std::uint64_t seed = 1;
    bool keep_all = false;
};

void cmd_attack(const AttackOpts& o) {
    const fs::path out(o.out);
    log_run_config(out, "attack",
                   {{"model", o.model},
                    {"data", o.data},
                    {"kind", o.kind},
                    {"epsilon", o.epsilon},
                    {"steps", o.steps},
                    {"alpha", o.alpha},
                    {"random_start", !o.no_random_start},
                    {"budget", o.budget},
                    {"spsa_samples", o.spsa_samples},
                    {"spsa_delta", o.spsa_delta},
                    {"kmax", o.kmax},
                    {"seed", o.seed},
                    {"keep_all", o.keep_all},
                    {"out", o.out}});

    const TargetModel model = load_target_model(o.model);
    const LabeledDataset data = load_labeled_dataset(o.data);

    AttackConfig cfg;
    cfg.kind = parse_attack_kind(o.kind);
    cfg.epsilon = o.epsilon;
    cfg.steps = o.steps;
    cfg.step_size = o.alpha;
    cfg.random_start = !o.no_random_start;
    cfg.query_budget = o.budget;
    cfg.spsa_samples = o.spsa_samples;
    cfg.spsa_delta = o.spsa_delta;
    cfg.k_max = o.kmax;
    cfg.seed = o.seed;
    cfg.keep_only_successful = !o.keep_all;
    const AttackSet set = generate_attack_set(model, data, cfg);

    save_labeled_dataset(out / ("adversarial_" + o.kind + ".ipgt"), set.examples);

    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < data.size(); ++i) index[data.sample_ids[i]] = i;
    std::string tsv = "sample_id\tsuccess\tqueries\titerations\tlinf\n";
    for (std::size_t i = 0; i < set.results.size(); ++i) {
        const AttackResult& r = set.results[i];
        const Tensor& original = data.inputs[index.at(r.sample_id)];
        tsv += set.examples.sample_ids[i] + "\t" + (r.success ? "1" : "0") + "\t" +
               std::to_string(r.queries_used) + "\t" + std::to_string(r.iterations) + "\t" +
               fmt_g17(linf_distance(set.examples.inputs[i], original)) + "\n";
    }
    write_text_file(out / ("attack_" + o.kind + ".tsv"), tsv);

    std::printf("%s: %zu/%d correctly-classified inputs flipped\n", o.kind.c_str(),
                set.examples.size(), set.attempted);
}

// --------------------------------------------------------------------- extract

struct ExtractOpts {
    std::string model, data, out;
    double tau = 0.0;
    bool no_input_nodes = false;
    std::uint64_t seed = 0;
};

void cmd_extract(const ExtractOpts& o, int threads) {
    const fs::path out(o.out);
    log_run_config(out, "extract",
                   {{"model", o.model},
                    {"data", o.data},
                    {"tau", o.tau},
                    {"input_nodes", !o.no_input_nodes},
                    {"seed", o.seed},
                    {"threads", threads},
                    {"out", o.out}});

    const TargetModel model = load_target_model(o.model);
    const LabeledDataset data = load_labeled_dataset(o.data);
    ExtractionConfig cfg;
    cfg.tau = o.tau;
    cfg.include_input_nodes = !o.no_input_nodes;
    cfg.seed = o.seed;

    fs::create_directories(out / "graphs");
    parallel_chunks(data.size(), threads, [&](std::size_t lo, std::size_t hi) {
        ProvenanceEngine engine = register_hooks(model);
        for (std::size_t i = lo; i < hi; ++i) {
            const std::string& id = data.sample_ids[i];
            const std::string base = base_sample_id(id);
            GraphMeta meta;
            meta.sample_id = id;
            meta.model_id = model.model_id;
            meta.input_label = data.labels[i];
            if (base != id) {  // suffixed ids mark adversarial inputs
                meta.attack_kind = id.substr(base.size() + 2);
                meta.graph_label = 1;
            }
            const InferenceProvenanceGraph ipg = extract_ipg(engine, data.inputs[i], cfg, meta);
            save_graph(out / "graphs" / graph_file_name(id), ipg);
        }
    });
    std::printf("extracted %zu graphs into %s\n", data.size(),
                (out / "graphs").string().c_str());
}

// --------------------------------------------------------------- build-dataset

struct BuildDatasetOpts {
    std::string out;
    std::string graphs = "graphs";
    std::vector<double> ratios = {0.7, 0.1, 0.2};
    std::uint64_t seed = 1;
    bool no_stats = false;
};

void cmd_build_dataset(const BuildDatasetOpts& o) {
    const fs::path out(o.out);
    log_run_config(out, "build-dataset",
                   {{"graphs", o.graphs},
                    {"ratios", o.ratios},
                    {"seed", o.seed},
                    {"stats", !o.no_stats},
                    {"out", o.out}});

    const fs::path graph_dir = out / o.graphs;
    if (!fs::is_directory(graph_dir))
        throw std::runtime_error("no graph directory at " + graph_dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(graph_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".ipg")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no .ipg files under " + graph_dir.string());

    std::vector<ManifestRecord> records;
    records.reserve(files.size());
    for (const fs::path& file : files) {
        const InferenceProvenanceGraph ipg = load_graph(file);
        ManifestRecord rec;
        rec.path = o.graphs + "/" + file.filename().string();
        rec.model_id = ipg.meta.model_id;
        rec.sample_id = ipg.meta.sample_id;
        rec.input_label = ipg.meta.input_label;
        rec.graph_label = ipg.meta.graph_label;
        rec.attack_kind = ipg.meta.attack_kind;
        rec.config_hash = ipg.meta.config_hash;
        records.push_back(std::move(rec));
    }

    Manifest manifest = build_dataset(std::move(records), o.ratios, o.seed);
    if (!o.no_stats) manifest.stats = compute_stats(manifest, out);
    save_manifest(out / "manifest.tsv", manifest);

    std::map<std::string, int> per_split;
    for (const ManifestRecord& r : manifest.records) ++per_split[r.split];
    std::printf("manifest: %zu graphs", manifest.records.size());
    for (const auto& [split, n] : per_split) std::printf(", %s %d", split.c_str(), n);
    std::printf("\n");
}

// ----------------------------------------------------------------------- stats

struct StatsOpts {
    std::string manifest;
    bool write = false;
};

void cmd_stats(const StatsOpts& o) {
    const fs::path path(o.manifest);
    Manifest manifest = load_manifest(path);
    const DatasetStats s = compute_stats(manifest, path.parent_path());
    std::printf("%s", format_table({{"quantity", "value"},
                                    {"graph_count", std::to_string(s.graph_count)},
                                    {"avg_nodes", format_fixed(s.avg_nodes, 2)},
                                    {"avg_edges", format_fixed(s.avg_edges, 2)},
                                    {"avg_sparsity", format_fixed(s.avg_sparsity, 4)},
                                    {"min_bytes", std::to_string(s.min_bytes)},
                                    {"median_bytes", std::to_string(s.median_bytes)},
                                    {"max_bytes", std::to_string(s.max_bytes)},
                                    {"node_feature_dim", std::to_string(s.node_feature_dim)},
                                    {"edge_attr_dim", std::to_string(s.edge_attr_dim)}})
                          .c_str());
    if (o.write) {
        manifest.stats = s;
        save_manifest(path, manifest);
        std::printf("stats written back to %s\n", path.string().c_str());
    }
}

// -------------------------------------------------------------------- validate

struct ValidateOpts {
    std::string manifest;
};

void cmd_validate(const ValidateOpts& o) {
    const fs::path path(o.manifest);
    const Manifest manifest = load_manifest(path);
    std::vector<std::string> problems = validate_splits(manifest);
    for (const ManifestRecord& r : manifest.records)
        if (!fs::is_regular_file(path.parent_path() / r.path))
            problems.push_back("missing graph file: " + r.path);
    if (!problems.empty()) {
        for (const std::string& p : problems) std::printf("violation: %s\n", p.c_str());
        throw std::runtime_error(std::to_string(problems.size()) + " manifest violations");
    }
    std::printf("ok: %zu records, splits are leak-free and all files exist\n",
                manifest.records.size());
}

// -------------------------------------------------------------- train-detector

struct TrainDetectorOpts {
    std::string manifest, out;
    int dim = 128, layers = 3, batch = 32, epochs = 50, patience = 10;
    double lr = 1e-3, threshold = 0.5;
    std::uint64_t seed = 1;
};

DetectorConfig detector_config(const TrainDetectorOpts& o) {
    DetectorConfig cfg;
    cfg.hidden_dim = o.dim;
    cfg.layers = o.layers;
    cfg.batch_size = o.batch;
    cfg.learning_rate = o.lr;
    cfg.epochs = o.epochs;
    cfg.patience = o.patience;
    cfg.threshold = o.threshold;
    cfg.seed = o.seed;
    return cfg;
}

json detector_settings(const TrainDetectorOpts& o) {
    return {{"manifest", o.manifest}, {"dim", o.dim},           {"layers", o.layers},
            {"batch", o.batch},       {"epochs", o.epochs},     {"patience", o.patience},
            {"lr", o.lr},             {"threshold", o.threshold}, {"seed", o.seed},
            {"out", o.out}};
}

std::string curves_tsv(const TrainingCurves& c) {
    const bool has_val = !c.val_loss.empty();
    std::string tsv = has_val ? "epoch\ttrain_loss\ttrain_accuracy\tval_loss\tval_accuracy\n"
                              : "epoch\ttrain_loss\ttrain_accuracy\n";
    for (std::size_t e = 0; e < c.train_loss.size(); ++e) {
        tsv += std::to_string(e + 1) + "\t" + fmt_g17(c.train_loss[e]) + "\t" +
               fmt_g17(c.train_accuracy[e]);
        if (has_val)
            tsv += "\t" + fmt_g17(c.val_loss[e]) + "\t" + fmt_g17(c.val_accuracy[e]);
        tsv += "\n";
    }
    return tsv;
}

void cmd_train_detector(const TrainDetectorOpts& o) {
    const fs::path out(o.out);
    log_run_config(out, "train-detector", detector_settings(o));

    const fs::path manifest_path(o.manifest);
    const Manifest manifest = load_manifest(manifest_path);
    const DetectorTrainResult result =
        train_detector(manifest, manifest_path.parent_path(), detector_config(o));

    save_detector(out / "detector.ipgt", result.model);
    write_text_file(out / "curves.tsv", curves_tsv(result.curves));
    std::printf("detector trained: %zu epochs run, best epoch %d%s\n",
                result.curves.train_loss.size(), result.curves.best_epoch + 1,
                result.curves.early_stopped ? " (early stop)" : "");
}

// ----------------------------------------------------------------------- score

struct ScoreOpts {
    std::string detector, manifest, out;
    std::string split = "test";
    double threshold = 0.5;
};

void cmd_score(const ScoreOpts& o) {
    const fs::path out(o.out);
    log_run_config(out, "score",
                   {{"detector", o.detector},
                    {"manifest", o.manifest},
                    {"split", o.split},
                    {"threshold", o.threshold},
                    {"out", o.out}});

    const DetectorModel model = load_detector(o.detector);
    const fs::path manifest_path(o.manifest);
    const Manifest manifest = load_manifest(manifest_path);
    const ScoredSplit scored =
        predict_batch(model, manifest, o.split, manifest_path.parent_path());
    const std::vector<const ManifestRecord*> records = split_records(manifest, o.split);
    if (records.empty()) throw std::runtime_error("split has no records: " + o.split);

    std::string tsv = "sample_id\tattack_kind\tlabel\tscore\n";
    for (std::size_t i = 0; i < records.size(); ++i)
        tsv += records[i]->sample_id + "\t" + records[i]->attack_kind + "\t" +
               std::to_string(scored.labels[i]) + "\t" + fmt_g17(scored.scores[i]) + "\n";
    write_text_file(out / "scores.tsv", tsv);

    const ConfusionMetrics c = confusion_metrics(scored.scores, scored.labels, o.threshold);
    std::vector<std::vector<std::string>> rows{{"metric", "value"},
                                               {"accuracy", format_fixed(c.accuracy, 4)},
                                               {"precision", format_fixed(c.precision, 4)},
                                               {"recall", format_fixed(c.recall, 4)},
                                               {"f1", format_fixed(c.f1, 4)}};
    const bool both = c.tp + c.fn > 0 && c.fp + c.tn > 0;
    if (both) {
        rows.push_back({"roc_auc", format_fixed(roc_auc(scored.scores, scored.labels), 4)});
        rows.push_back({"pr_auc", format_fixed(pr_auc(scored.scores, scored.labels), 4)});
    }
    const std::string table = format_table(rows);
    write_text_file(out / "metrics.txt", table);
    std::printf("%s", table.c_str());
}

// -------------------------------------------------------------------- evaluate

struct EvaluateOpts {
    std::string manifest, out;
    std::string protocol = "intra";
    std::vector<std::string> train_attacks, test_attacks;
    TrainDetectorOpts detector;  // reuses the detector flag block (manifest/out unused)
};

void cmd_evaluate(const EvaluateOpts& o) {
    const fs::path out(o.out);
    json settings = detector_settings(o.detector);
    settings["manifest"] = o.manifest;
    settings["out"] = o.out;
    settings["protocol"] = o.protocol;
    settings["train_attacks"] = o.train_attacks;
    settings["test_attacks"] = o.test_attacks;
    log_run_config(out, "evaluate", settings);

    ProtocolSpec spec;
    spec.protocol = parse_protocol(o.protocol);
    spec.train_attacks = o.train_attacks;
    spec.test_attacks = o.test_attacks.empty() ? o.train_attacks : o.test_attacks;
    spec.seed = o.detector.seed;

    const fs::path manifest_path(o.manifest);
    const Manifest manifest = load_manifest(manifest_path);
    const ProtocolResult result =
        run_protocol(spec, manifest, manifest_path.parent_path(), detector_config(o.detector));

    save_detector(out / "detector.ipgt", result.training.model);
    write_text_file(out / "report.txt", protocol_table(result));
    write_text_file(out / "report.tsv", protocol_tsv(result));
    std::printf("%s", protocol_table(result).c_str());
}

// -------------------------------------------------------------------- overhead

struct OverheadOpts {
    std::string model, data, out;
    int inputs = 32;
    double tau = 0.0;
    std::uint64_t seed = 1;
};

void cmd_overhead(const OverheadOpts& o) {
    const fs::path out(o.out);
    log_run_config(out, "overhead",
                   {{"model", o.model},
                    {"data", o.data},
                    {"inputs", o.inputs},
                    {"tau", o.tau},
                    {"seed", o.seed},
                    {"out", o.out}});

    const TargetModel model = load_target_model(o.model);
    std::vector<Tensor> inputs;
    if (!o.data.empty()) {
        LabeledDataset data = load_labeled_dataset(o.data);
        inputs = std::move(data.inputs);
    } else {
        Rng rng(mix_seed(o.seed, "overhead-inputs"));
        for (int i = 0; i < o.inputs; ++i) {
            Tensor x(model.input_shape);
            for (double& v : x.values()) v = rng.uniform(0.0, 1.0);
            inputs.push_back(std::move(x));
        }
    }

    ExtractionConfig cfg;
    cfg.tau = o.tau;
    const OverheadReport report = measure_overhead(model, inputs, cfg);

    std::vector<double> xs, ys;
    for (const OverheadSample& s : report.samples) {
        xs.push_back(s.size);
        ys.push_back(s.seconds);
    }
    std::string text = overhead_table(report);
    if (xs.size() >= 2 && xs.front() != xs.back()) {
        const LinearFit fit = linear_fit(xs, ys);
        text += "fit: seconds = " + fmt_g17(fit.slope) + " * size + " + fmt_g17(fit.intercept) +
                " (r2 " + format_fixed(fit.r2, 4) + ")\n";
    }
    write_text_file(out / "overhead.txt", text);
    write_text_file(out / "overhead_samples.tsv", overhead_tsv(report));
    std::printf("%s", text.c_str());
}

// -------------------------------------------------------------- reproduce-desk

struct DeskOpts {
    std::string out;
    std::uint64_t seed = 1;
    int pool = 600;
    int corpus = 400;
    int features = 20;
    double flip_rate = 0.15;
    double epsilon = 0.5;
    int det_dim = 32;
    int det_epochs = 20;
};

void cmd_reproduce_desk(const DeskOpts& o) {
    const fs::path out(o.out);
    log_run_config(out, "reproduce-desk",
                   {{"seed", o.seed},
                    {"pool", o.pool},
                    {"corpus", o.corpus},
                    {"features", o.features},
                    {"flip_rate", o.flip_rate},
                    {"epsilon", o.epsilon},
                    {"detector_dim", o.det_dim},
                    {"detector_epochs", o.det_epochs},
                    {"out", o.out}});

    DeskConfig cfg;
    cfg.out_dir = out;
    cfg.seed = o.seed;
    cfg.pool_samples = o.pool;
    cfg.corpus_inputs = o.corpus;
    cfg.feature_dim = o.features;
    cfg.flip_rate = o.flip_rate;
    cfg.epsilon = o.epsilon;
    cfg.detector.hidden_dim = o.det_dim;
    cfg.detector.epochs = o.det_epochs;
    const DeskResult result = run_desk(cfg);

    std::printf("clean accuracy %.4f over held-out samples\n\n", result.clean_accuracy);
    for (const auto& [name, pr] : result.protocols)
        std::printf("[%s]\n%s\n", name.c_str(), protocol_table(pr).c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"inference provenance pipeline"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "config file whose [subcommand] sections override flag defaults");
    int threads = 1;
    app.add_option("--threads", threads, "worker threads for per-sample stages")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    auto tt = std::make_shared<TrainTargetOpts>();
    CLI::App* train_target_cmd =
        app.add_subcommand("train-target", "train a small classifier on synthetic data");
    train_target_cmd->add_option("--out", tt->out, "output directory")->required();
    train_target_cmd->add_option("--arch", tt->arch, "model family")
        ->check(CLI::IsMember({"mlp", "cnn"}))
        ->capture_default_str();
    train_target_cmd->add_option("--data", tt->data_kind, "feature generator for mlp targets")
        ->check(CLI::IsMember({"binary", "blobs"}))
        ->capture_default_str();
    train_target_cmd->add_option("--model-id", tt->model_id, "identity stored in the model file");
    train_target_cmd->add_option("--features", tt->features, "input width (mlp)")
        ->capture_default_str();
    train_target_cmd->add_option("--classes", tt->classes, "class count")->capture_default_str();
    train_target_cmd->add_option("--hidden", tt->hidden, "mlp hidden widths")
        ->delimiter(',')
        ->capture_default_str();
    train_target_cmd->add_option("--channels", tt->channels, "cnn channel plan")
        ->delimiter(',')
        ->capture_default_str();
    train_target_cmd->add_option("--image-shape", tt->image_shape, "cnn input shape C,H,W")
        ->delimiter(',')
        ->capture_default_str();
    train_target_cmd->add_option("--noise", tt->noise, "bit flip rate / blob spread")
        ->capture_default_str();
    train_target_cmd->add_option("--samples", tt->samples, "training samples")
        ->capture_default_str();
    train_target_cmd->add_option("--val-samples", tt->val_samples, "validation samples")
        ->capture_default_str();
    train_target_cmd
        ->add_option("--pool-samples", tt->pool_samples, "extra attack-pool samples to save")
        ->capture_default_str();
    train_target_cmd->add_option("--epochs", tt->epochs, "training epochs")->capture_default_str();
    train_target_cmd->add_option("--batch", tt->batch, "batch size")->capture_default_str();
    train_target_cmd->add_option("--lr", tt->lr, "learning rate")->capture_default_str();
    train_target_cmd->add_option("--seed", tt->seed, "run seed")->capture_default_str();
    train_target_cmd->callback([tt] { cmd_train_target(*tt); });

    auto at = std::make_shared<AttackOpts>();
    CLI::App* attack_cmd =
        app.add_subcommand("attack", "generate adversarial examples against a model");
    attack_cmd->add_option("--model", at->model, "target model file")->required();
    attack_cmd->add_option("--data", at->data, "dataset file of inputs to attack")->required();
    attack_cmd->add_option("--out", at->out, "output directory")->required();
    attack_cmd->add_option("--kind", at->kind, "attack kind")
        ->check(CLI::IsMember({"fgsm", "pgd", "spsa", "square", "bitflip"}))
        ->capture_default_str();
    attack_cmd->add_option("--epsilon", at->epsilon, "l-inf budget")->capture_default_str();
    attack_cmd->add_option("--steps", at->steps, "pgd steps")->capture_default_str();
    attack_cmd->add_option("--alpha", at->alpha, "pgd step size (0 = epsilon/4)")
        ->capture_default_str();
    attack_cmd->add_flag("--no-random-start", at->no_random_start, "pgd: start at the input");
    attack_cmd->add_option("--budget", at->budget, "query budget (spsa/square)")
        ->capture_default_str();
    attack_cmd->add_option("--spsa-samples", at->spsa_samples, "perturbation pairs per step")
        ->capture_default_str();
    attack_cmd->add_option("--spsa-delta", at->spsa_delta, "finite-difference radius")
        ->capture_default_str();
    attack_cmd->add_option("--kmax", at->kmax, "bitflip budget")->capture_default_str();
    attack_cmd->add_option("--seed", at->seed, "run seed")->capture_default_str();
    attack_cmd->add_flag("--keep-all", at->keep_all, "keep non-flipping results too");
    attack_cmd->callback([at] { cmd_attack(*at); });

    auto ex = std::make_shared<ExtractOpts>();
    CLI::App* extract_cmd =
        app.add_subcommand("extract", "extract one provenance graph per input");
    extract_cmd->add_option("--model", ex->model, "target model file")->required();
    extract_cmd->add_option("--data", ex->data, "dataset file")->required();
    extract_cmd->add_option("--out", ex->out, "output directory (graphs/ created inside)")
        ->required();
    extract_cmd->add_option("--tau", ex->tau, "activation-norm threshold")->capture_default_str();
    extract_cmd->add_flag("--no-input-nodes", ex->no_input_nodes, "drop input nodes");
    extract_cmd->add_option("--seed", ex->seed, "stamped into the extraction config")
        ->capture_default_str();
    extract_cmd->callback([ex, &threads] { cmd_extract(*ex, threads); });

    auto bd = std::make_shared<BuildDatasetOpts>();
    CLI::App* build_cmd =
        app.add_subcommand("build-dataset", "assemble a split manifest from extracted graphs");
    build_cmd->add_option("--out", bd->out, "directory holding the graph subdirectory")
        ->required();
    build_cmd->add_option("--graphs", bd->graphs, "graph subdirectory name")
        ->capture_default_str();
    build_cmd->add_option("--ratios", bd->ratios, "train,val,test or train,test ratios")
        ->delimiter(',')
        ->capture_default_str();
    build_cmd->add_option("--seed", bd->seed, "split-assignment seed")->capture_default_str();
    build_cmd->add_flag("--no-stats", bd->no_stats, "skip the corpus statistics pass");
    build_cmd->callback([bd] { cmd_build_dataset(*bd); });

    auto st = std::make_shared<StatsOpts>();
    CLI::App* stats_cmd = app.add_subcommand("stats", "corpus statistics for a manifest");
    stats_cmd->add_option("--manifest", st->manifest, "manifest file")->required();
    stats_cmd->add_flag("--write", st->write, "write the stats line back into the manifest");
    stats_cmd->callback([st] { cmd_stats(*st); });

    auto va = std::make_shared<ValidateOpts>();
    CLI::App* validate_cmd =
        app.add_subcommand("validate", "check a manifest for split leaks and missing files");
    validate_cmd->add_option("--manifest", va->manifest, "manifest file")->required();
    validate_cmd->callback([va] { cmd_validate(*va); });

    auto td = std::make_shared<TrainDetectorOpts>();
    CLI::App* train_det_cmd =
        app.add_subcommand("train-detector", "train the graph detector from a manifest");
    train_det_cmd->add_option("--manifest", td->manifest, "manifest file")->required();
    train_det_cmd->add_option("--out", td->out, "output directory")->required();
    train_det_cmd->add_option("--dim", td->dim, "hidden width")->capture_default_str();
    train_det_cmd->add_option("--layers", td->layers, "message-passing layers")
        ->capture_default_str();
    train_det_cmd->add_option("--batch", td->batch, "batch size")->capture_default_str();
    train_det_cmd->add_option("--epochs", td->epochs, "max epochs")->capture_default_str();
    train_det_cmd->add_option("--patience", td->patience, "early-stopping patience")
        ->capture_default_str();
    train_det_cmd->add_option("--lr", td->lr, "learning rate")->capture_default_str();
    train_det_cmd->add_option("--threshold", td->threshold, "decision threshold")
        ->capture_default_str();
    train_det_cmd->add_option("--seed", td->seed, "run seed")->capture_default_str();
    train_det_cmd->callback([td] { cmd_train_detector(*td); });

    auto sc = std::make_shared<ScoreOpts>();
    CLI::App* score_cmd = app.add_subcommand("score", "score one manifest split with a detector");
    score_cmd->add_option("--detector", sc->detector, "detector file")->required();
    score_cmd->add_option("--manifest", sc->manifest, "manifest file")->required();
    score_cmd->add_option("--out", sc->out, "output directory")->required();
    score_cmd->add_option("--split", sc->split, "split to score")
        ->check(CLI::IsMember({"train", "val", "test"}))
        ->capture_default_str();
    score_cmd->add_option("--threshold", sc->threshold, "decision threshold")
        ->capture_default_str();
    score_cmd->callback([sc] { cmd_score(*sc); });

    auto ev = std::make_shared<EvaluateOpts>();
    CLI::App* eval_cmd =
        app.add_subcommand("evaluate", "train and evaluate a detector under a protocol");
    eval_cmd->add_option("--manifest", ev->manifest, "manifest file")->required();
    eval_cmd->add_option("--out", ev->out, "output directory")->required();
    eval_cmd->add_option("--protocol", ev->protocol, "evaluation protocol")
        ->check(CLI::IsMember({"intra", "multi", "cross_threat"}))
        ->capture_default_str();
    eval_cmd->add_option("--train-attacks", ev->train_attacks, "attack kinds trained on")
        ->delimiter(',')
        ->required();
    eval_cmd
        ->add_option("--test-attacks", ev->test_attacks,
                     "attack kinds tested (default: training kinds)")
        ->delimiter(',');
    eval_cmd->add_option("--dim", ev->detector.dim, "hidden width")->capture_default_str();
    eval_cmd->add_option("--layers", ev->detector.layers, "message-passing layers")
        ->capture_default_str();
    eval_cmd->add_option("--batch", ev->detector.batch, "batch size")->capture_default_str();
    eval_cmd->add_option("--epochs", ev->detector.epochs, "max epochs")->capture_default_str();
    eval_cmd->add_option("--patience", ev->detector.patience, "early-stopping patience")
        ->capture_default_str();
    eval_cmd->add_option("--lr", ev->detector.lr, "learning rate")->capture_default_str();
    eval_cmd->add_option("--threshold", ev->detector.threshold, "decision threshold")
        ->capture_default_str();
    eval_cmd->add_option("--seed", ev->detector.seed, "run seed")->capture_default_str();
    eval_cmd->callback([ev] { cmd_evaluate(*ev); });

    auto ov = std::make_shared<OverheadOpts>();
    CLI::App* overhead_cmd =
        app.add_subcommand("overhead", "measure extraction time and storage per graph");
    overhead_cmd->add_option("--model", ov->model, "target model file")->required();
    overhead_cmd->add_option("--data", ov->data, "dataset file (default: random inputs)");
    overhead_cmd->add_option("--out", ov->out, "output directory")->required();
    overhead_cmd->add_option("--inputs", ov->inputs, "generated input count")
        ->check(CLI::Range(10, 1000000))
        ->capture_default_str();
    overhead_cmd->add_option("--tau", ov->tau, "activation-norm threshold")
        ->capture_default_str();
    overhead_cmd->add_option("--seed", ov->seed, "input-generation seed")->capture_default_str();
    overhead_cmd->callback([ov] { cmd_overhead(*ov); });

    auto dk = std::make_shared<DeskOpts>();
    CLI::App* desk_cmd = app.add_subcommand(
        "reproduce-desk", "run the full pipeline end to end with deterministic outputs");
    desk_cmd->add_option("--out", dk->out, "output directory")->required();
    desk_cmd->add_option("--seed", dk->seed, "run seed")->capture_default_str();
    desk_cmd->add_option("--pool", dk->pool, "candidate input pool size")->capture_default_str();
    desk_cmd->add_option("--corpus", dk->corpus, "base inputs kept in the corpus")
        ->capture_default_str();
    desk_cmd->add_option("--features", dk->features, "target input width")->capture_default_str();
    desk_cmd->add_option("--flip-rate", dk->flip_rate, "feature noise rate")
        ->capture_default_str();
    desk_cmd->add_option("--epsilon", dk->epsilon, "attack l-inf budget")->capture_default_str();
    desk_cmd->add_option("--detector-dim", dk->det_dim, "detector hidden width")
        ->capture_default_str();
    desk_cmd->add_option("--detector-epochs", dk->det_epochs, "detector epochs")
        ->capture_default_str();
    desk_cmd->callback([dk] { cmd_reproduce_desk(*dk); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
