#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ipg/detector.hpp"
#include "ipg/metrics.hpp"
#include "ipg/nn.hpp"
#include "ipg/provenance.hpp"
#include "ipg/store.hpp"
#include "ipg/tensor.hpp"

namespace ipg {

enum class Protocol { intra, multi, cross_threat };

const char* protocol_name(Protocol p);
Protocol parse_protocol(const std::string& name);  // throws on unknown name

// One detector training + evaluation run. Train and test attack sets name
// attack kinds present in the manifest; intra requires a single attack used
// for both, cross_threat requires the two sets to be disjoint and to come
// from different threat classes (gradient-based vs query-based).
struct ProtocolSpec {
    Protocol protocol = Protocol::intra;
    std::vector<std::string> train_attacks;
    std::vector<std::string> test_attacks;
    std::uint64_t seed = 1;
};

struct AttackReport {
    std::string attack;
    MetricReport metrics;  // test-split benign vs this attack's graphs
};

struct ProtocolResult {
    ProtocolSpec spec;
    DetectorTrainResult training;
    std::vector<AttackReport> per_attack;  // sorted by attack kind
};

// Trains a detector on the manifest's train split (benign + train_attacks
// graphs, validating on the val split with the same composition), then scores
// each test attack against the test-split benign graphs. Aborts when the
// manifest leaks an input across splits or a requested attack has no graphs.
ProtocolResult run_protocol(const ProtocolSpec& spec, const Manifest& manifest,
                            const std::filesystem::path& base_dir, DetectorConfig cfg);

struct OverheadSample {
    double size = 0.0;     // |V| + |E| of the extracted graph
    double seconds = 0.0;  // extraction + serialization, monotonic clock
};

struct OverheadReport {
    double t_overhead_s = 0.0;  // mean seconds per graph
    double avg_nodes = 0.0;
    double avg_edges = 0.0;
    int node_feature_dim = 0;
    int edge_attr_dim = 0;
    double s_ipg_mb = 0.0;  // mean serialized bytes / 2^20
    std::vector<OverheadSample> samples;
};

// Extracts and serializes a graph per input, timing each end to end.
// Requires at least 10 inputs so the means are worth reporting.
OverheadReport measure_overhead(const TargetModel& model, const std::vector<Tensor>& inputs,
                                const ExtractionConfig& cfg);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

// Ordinary least squares of y on x; needs >= 2 points and non-constant x.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

// Aligned-column text rendering; rows[0] is the header, underlined with
// dashes. Every row must have the same number of cells.
std::string format_table(const std::vector<std::vector<std::string>>& rows);

std::string format_fixed(double v, int decimals = 4);

// One metrics row per attack, as an aligned text table / tab-separated
// records (full precision) for downstream tooling.
std::string protocol_table(const ProtocolResult& result);
std::string protocol_tsv(const ProtocolResult& result);

std::string overhead_table(const OverheadReport& report);
std::string overhead_tsv(const OverheadReport& report);

}  // namespace ipg
