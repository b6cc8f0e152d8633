#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ipg/provenance.hpp"
#include "ipg/store.hpp"
#include "ipg/tensor.hpp"

namespace ipg {

struct DetectorConfig {
    int hidden_dim = 128;
    int layers = 3;
    int batch_size = 32;
    double learning_rate = 1e-3;
    int epochs = 50;
    int patience = 10;        // epochs without val-loss improvement before stopping
    double threshold = 0.5;   // decision boundary on p
    std::uint64_t seed = 1;
};

// Graph-level binary classifier: per-type linear projections of raw node
// features, `layers` rounds of relational mean aggregation with ReLU, global
// mean pooling, and an affine head squashed to a probability.
//
// Parameter layout in `params`: one projection (d x 5) per node type, then per
// round a self transform and one transform per edge type (all d x d), then the
// head weight (d) and bias (1).
struct DetectorModel {
    static constexpr int kNodeTypes = 4;
    static constexpr int kEdgeTypes = 3;
    static constexpr int kRawFeatureDim = 5;  // mean, l2, sparsity, mask, depth

    DetectorConfig config;
    std::vector<Tensor> params;

    int proj_index(int node_type) const { return node_type; }
    int self_index(int layer) const { return kNodeTypes + layer * (1 + kEdgeTypes); }
    int rel_index(int layer, int edge_type) const { return self_index(layer) + 1 + edge_type; }
    int head_w_index() const { return kNodeTypes + config.layers * (1 + kEdgeTypes); }
    int head_b_index() const { return head_w_index() + 1; }
    int expected_params() const { return head_b_index() + 1; }
};

DetectorModel init_detector(const DetectorConfig& cfg);

// Graph unpacked for the detector: raw 5-vectors, type tags, and per-edge-type
// in-adjacency (source index, edge attribute). The depth feature is the node's
// layer_index divided by the graph's maximum layer_index.
struct PreparedGraph {
    int node_count = 0;
    std::vector<double> raw;        // node_count x 5, row-major
    std::vector<int> node_type;     // 0..3 per node
    std::vector<std::vector<std::pair<int, double>>> in_edges[DetectorModel::kEdgeTypes];
    int label = 0;
    std::string sample_id;
};

PreparedGraph prepare_graph(const InferenceProvenanceGraph& ipg);

// Projected input embeddings h0 (node_count x d, row-major).
std::vector<double> standardize_features(const DetectorModel& model, const PreparedGraph& g);

// One aggregation round: h'_v = ReLU(W_self h_v + sum_r W_r mean_{u in N_r(v)} a_uv h_u).
// Neighbor contributions are summed in a canonical content order, so the
// result is bitwise independent of node numbering.
std::vector<double> sage_layer(const DetectorModel& model, const PreparedGraph& g, int layer,
                               const std::vector<double>& h_in);

// Global mean pooling over node embeddings, content-ordered for the same
// bitwise invariance. Throws on an empty graph.
std::vector<double> readout(const std::vector<double>& h, int node_count, int dim);

double detector_score(const DetectorModel& model, const PreparedGraph& g);
double detector_forward(const DetectorModel& model, const InferenceProvenanceGraph& ipg);

// -[y ln p + (1-y) ln(1-p)] with p clamped away from {0,1}.
double bce(double p, int y);

// Mean BCE over the batch; the _and_grad variant also accumulates exact
// reverse-mode parameter gradients (same shapes as model.params).
double detector_loss(const DetectorModel& model, const std::vector<PreparedGraph>& batch);
double detector_loss_and_grad(const DetectorModel& model, const std::vector<PreparedGraph>& batch,
                              std::vector<Tensor>& grads);

struct TrainingCurves {
    std::vector<double> train_loss;
    std::vector<double> train_accuracy;
    std::vector<double> val_loss;      // empty when no validation graphs given
    std::vector<double> val_accuracy;
    int best_epoch = -1;               // epoch whose parameters were kept
    bool early_stopped = false;
};

struct DetectorTrainResult {
    DetectorModel model;
    TrainingCurves curves;
};

// Adam over shuffled mini-batches; early-stops on val loss when val graphs are
// present (keeping the best-epoch parameters). Empty training graphs are
// rejected; NaN loss is a hard error.
DetectorTrainResult train_detector(const std::vector<InferenceProvenanceGraph>& train,
                                   const std::vector<InferenceProvenanceGraph>& val,
                                   const DetectorConfig& cfg);

// Same, reading the manifest's train/val splits (paths against base_dir).
// Aborts if the manifest leaks inputs across splits.
DetectorTrainResult train_detector(const Manifest& manifest,
                                   const std::filesystem::path& base_dir,
                                   const DetectorConfig& cfg);

struct ScoredSplit {
    std::vector<double> scores;  // manifest order
    std::vector<int> labels;
};

// One score per graph, in order. Empty graphs score 0.5 with a warning on
// stderr; everything else goes through the full forward pass.
std::vector<double> score_graphs(const DetectorModel& model,
                                 const std::vector<InferenceProvenanceGraph>& graphs);

// One score per graph of the split, in manifest order. Empty graphs score 0.5
// with a warning on stderr.
ScoredSplit predict_batch(const DetectorModel& model, const Manifest& manifest,
                          const std::string& split, const std::filesystem::path& base_dir);

void save_detector(const std::filesystem::path& path, const DetectorModel& model);
DetectorModel load_detector(const std::filesystem::path& path);

}  // namespace ipg
