#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ipg/provenance.hpp"
#include "ipg/targets.hpp"

namespace ipg {

// Raised by deserializers; offset is the byte (or line, for text formats)
// where the input stopped making sense.
class ParseError : public std::runtime_error {
  public:
    ParseError(std::size_t offset, const std::string& what)
        : std::runtime_error("at offset " + std::to_string(offset) + ": " + what),
          offset_(offset) {}
    std::size_t offset() const { return offset_; }

  private:
    std::size_t offset_;
};

// Canonical binary graph container: magic "IPGB", version byte, metadata
// strings, u8/i32 labels, then node and edge tables sorted by node_id and
// (source, target, type). Numbers are little-endian; reals IEEE-754 binary64.
// Output is a pure function of the graph; valid containers are exactly the
// canonical ones, so serialize(deserialize(b)) == b.
std::string serialize_ipg(const InferenceProvenanceGraph& ipg);
InferenceProvenanceGraph deserialize_ipg(std::string_view bytes);

void save_graph(const std::filesystem::path& path, const InferenceProvenanceGraph& ipg);
InferenceProvenanceGraph load_graph(const std::filesystem::path& path);

// Stable on-disk name for a sample's graph: "::" becomes "__", plus ".ipg".
std::string graph_file_name(const std::string& sample_id);

// Named-tensor container ("IPGT"): a free-form JSON metadata string plus an
// ordered list of (name, tensor) entries. Backs model and dataset files.
struct TensorTable {
    std::string meta;  // JSON text; consumers parse what they need
    std::vector<std::pair<std::string, Tensor>> entries;
};

std::string serialize_tensor_table(const TensorTable& table);
TensorTable deserialize_tensor_table(std::string_view bytes);
void save_tensor_table(const std::filesystem::path& path, const TensorTable& table);
TensorTable load_tensor_table(const std::filesystem::path& path);

void save_target_model(const std::filesystem::path& path, const TargetModel& model);
TargetModel load_target_model(const std::filesystem::path& path);

void save_labeled_dataset(const std::filesystem::path& path, const LabeledDataset& data);
LabeledDataset load_labeled_dataset(const std::filesystem::path& path);

struct ManifestRecord {
    std::string path;  // graph file, relative to the manifest's directory
    std::string model_id;
    std::string sample_id;    // benign: base id; adversarial: base + "::" + attack
    int input_label = -1;
    int graph_label = 0;      // 1 = adversarial
    std::string attack_kind = "benign";
    std::string split;        // train / val / test
    std::string config_hash;

    bool operator==(const ManifestRecord&) const = default;
};

struct DatasetStats {
    std::int64_t graph_count = 0;
    double avg_nodes = 0.0;
    double avg_edges = 0.0;
    double avg_sparsity = 0.0;  // mean over graphs of mean node sparsity
    std::int64_t min_bytes = 0;
    std::int64_t median_bytes = 0;
    std::int64_t max_bytes = 0;
    int node_feature_dim = 5;
    int edge_attr_dim = 1;

    bool operator==(const DatasetStats&) const = default;
};

struct Manifest {
    std::uint64_t seed = 0;
    std::optional<DatasetStats> stats;
    std::vector<ManifestRecord> records;  // sorted by (sample_id, attack_kind)
};

// Groups records by their underlying input (attack suffixes stripped), then
// deals whole groups into splits by seeded shuffle. Ratios must sum to 1:
// two entries mean train/test, three mean train/val/test. Incoming split
// fields are ignored. Duplicate (sample_id, attack_kind) pairs are an error.
Manifest build_dataset(std::vector<ManifestRecord> records, const std::vector<double>& ratios,
                       std::uint64_t seed);

// Every underlying input id that appears in more than one split.
std::vector<std::string> validate_splits(const Manifest& manifest);

// Reads every graph file (paths resolved against base_dir); throws listing
// all missing paths.
DatasetStats compute_stats(const Manifest& manifest, const std::filesystem::path& base_dir);

// Line-oriented text format; see README. Deterministic byte output.
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest load_manifest(const std::filesystem::path& path);  // ParseError offsets are line numbers

std::vector<const ManifestRecord*> split_records(const Manifest& manifest,
                                                 const std::string& split);

}  // namespace ipg
