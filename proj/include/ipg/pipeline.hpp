#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ipg/detector.hpp"
#include "ipg/eval.hpp"
#include "ipg/provenance.hpp"
#include "ipg/store.hpp"
#include "ipg/targets.hpp"

namespace ipg {

// One self-contained detection study: train a small binary-feature MLP,
// attack a pool of its inputs with every attack kind, extract provenance
// graphs for the inputs where all three core attacks (fgsm, pgd, spsa)
// succeed, split at the input level, and train/evaluate detectors under the
// intra, multi, and cross-threat protocols. Every file under out_dir is a
// pure function of this config; timing goes to stderr only.
struct DeskConfig {
    std::filesystem::path out_dir;
    std::uint64_t seed = 1;

    // Target model and synthetic data.
    int feature_dim = 20;
    int class_count = 2;
    std::vector<int> hidden_dims = {16};
    double flip_rate = 0.15;  // per-bit label noise in the feature generator
    int train_samples = 2000;
    int eval_samples = 500;  // held out for the clean-accuracy figure
    int pool_samples = 600;  // candidate inputs for the graph corpus
    int corpus_inputs = 400; // base inputs kept (needs enough joint successes)
    TrainConfig target_train;

    // Wide enough that every attack kind flips nearly every pool input of the
    // binary-feature target; the attack module's own default stays narrower.
    double epsilon = 0.5;

    ExtractionConfig extraction;
    std::vector<double> split_ratios = {0.8, 0.2};

    // Sized well below the module defaults so six trainings stay fast.
    DetectorConfig detector{.hidden_dim = 32, .epochs = 20};
};

struct AttackSummary {
    std::string kind;
    int attempted = 0;  // correctly-classified pool inputs attacked
    int successes = 0;  // label flips within budget
    int in_corpus = 0;  // adversarial graphs contributed to the corpus
};

struct DeskResult {
    double clean_accuracy = 0.0;  // on the held-out evaluation samples
    int benign_graphs = 0;
    std::vector<AttackSummary> attacks;
    Manifest manifest;
    std::vector<std::pair<std::string, ProtocolResult>> protocols;
    std::filesystem::path out_dir;
};

// The six studies run on the corpus: intra per core attack, the three-attack
// mixture, and cross-threat in both directions. Seeds derive from `seed`.
std::vector<std::pair<std::string, ProtocolSpec>> desk_protocols(std::uint64_t seed);

DeskResult run_desk(const DeskConfig& cfg);

// Metrics for one (protocol, attack) pair of a finished run; null if absent.
const MetricReport* find_metrics(const DeskResult& result, const std::string& protocol,
                                 const std::string& attack);

}  // namespace ipg
