#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ipg/nn.hpp"
#include "ipg/tensor.hpp"

namespace ipg {

enum class NodeType : std::uint8_t { input = 0, dense_neuron = 1, conv_channel = 2, pooled_channel = 3 };
enum class EdgeType : std::uint8_t { dense_weight = 0, conv_channel_weight = 1, structural = 2 };

const char* node_type_name(NodeType t);
const char* edge_type_name(EdgeType t);

struct ExtractionConfig {
    double tau = 0.0;                // keep node u iff l2(u) >= tau; inputs exempt
    bool include_input_nodes = true;
    std::uint64_t seed = 0;

    std::string config_hash() const;  // 16 hex chars, pure function of the fields
};

struct NodeSummary {
    double mean = 0.0;
    double l2_norm = 0.0;
    double sparsity = 0.0;  // fraction of exact zeros
};

NodeSummary node_summary(const double* begin, std::int64_t count);
NodeSummary node_summary(const Tensor& slice);

struct IPGNode {
    std::uint32_t node_id = 0;
    NodeType type = NodeType::input;
    std::int32_t layer_index = 0;  // 0 = input group, model layer i -> i+1
    double mean = 0.0;
    double l2_norm = 0.0;
    double sparsity = 0.0;
    bool mask = false;  // l2_norm >= tau

    bool operator==(const IPGNode&) const = default;
};

struct IPGEdge {
    std::uint32_t source = 0;
    std::uint32_t target = 0;
    EdgeType type = EdgeType::dense_weight;
    double attribute = 0.0;  // structural edges carry exactly 1.0

    bool operator==(const IPGEdge&) const = default;
};

struct GraphMeta {
    std::string sample_id;
    std::string model_id;
    std::string attack_kind = "benign";
    std::string config_hash;
    int graph_label = 0;       // 1 = adversarial input
    int input_label = -1;
    int predicted_label = -1;  // model's argmax on this input

    bool operator==(const GraphMeta&) const = default;
};

struct InferenceProvenanceGraph {
    GraphMeta meta;
    std::vector<IPGNode> nodes;  // ascending node_id
    std::vector<IPGEdge> edges;

    bool operator==(const InferenceProvenanceGraph&) const = default;
};

// One forward capture: a layer's kind, position, and output tensor.
struct Capture {
    LayerKind kind = LayerKind::relu;
    int layer_index = 0;
    const Tensor* output = nullptr;
};

// Holds per-inference capture state for one model; create one engine per
// concurrent extraction. Running it never perturbs the forward computation.
class ProvenanceEngine {
  public:
    const TargetModel& model() const { return *model_; }
    std::size_t capture_points() const { return model_->layers.size(); }

    // Forward pass recording every layer output; returns the trace.
    const ActivationTrace& run(const Tensor& input);
    const ActivationTrace& last_trace() const { return trace_; }
    std::vector<Capture> captures() const;  // views into the last run

  private:
    friend ProvenanceEngine register_hooks(const TargetModel& model);
    explicit ProvenanceEngine(const TargetModel& model);

    const TargetModel* model_;
    ActivationTrace trace_;
    bool ran_ = false;
};

ProvenanceEngine register_hooks(const TargetModel& model);

// Runs one hooked forward pass and builds the activation-induced dependency
// graph: per-neuron nodes for dense layers, per-channel nodes for conv/pool
// layers (plus input nodes when configured), each with summary features and a
// threshold mask. Non-input nodes with mask 0 are dropped with their edges.
// Caller supplies identity metadata; config_hash and predicted_label are
// stamped here. Node ids are stable across tau for the same (model, input).
InferenceProvenanceGraph extract_ipg(ProvenanceEngine& engine, const Tensor& input,
                                     const ExtractionConfig& cfg, GraphMeta meta);

// True iff node ids are unique, every edge endpoint exists, and every edge
// runs strictly forward by layer_index.
bool verify_dag(const InferenceProvenanceGraph& ipg);

}  // namespace ipg
