#include "ipg/provenance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "ipg/rng.hpp"

namespace ipg {

const char* node_type_name(NodeType t) {
    switch (t) {
        case NodeType::input: return "input";
        case NodeType::dense_neuron: return "dense_neuron";
        case NodeType::conv_channel: return "conv_channel";
        case NodeType::pooled_channel: return "pooled_channel";
    }
    return "?";
}

const char* edge_type_name(EdgeType t) {
    switch (t) {
        case EdgeType::dense_weight: return "dense_weight";
        case EdgeType::conv_channel_weight: return "conv_channel_weight";
        case EdgeType::structural: return "structural";
    }
    return "?";
}

std::string ExtractionConfig::config_hash() const {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "tau=%.17g;inputs=%d;seed=%llu;features=mean,l2,sparsity",
                  tau, include_input_nodes ? 1 : 0, static_cast<unsigned long long>(seed));
    return hex64(fnv1a64(buf));
}

NodeSummary node_summary(const double* begin, std::int64_t count) {
    if (count <= 0) throw std::invalid_argument("node_summary: empty activation slice");
    NodeSummary s;
    double sq = 0.0;
    std::int64_t zeros = 0;
    for (std::int64_t i = 0; i < count; ++i) {
        s.mean += begin[i];
        sq += begin[i] * begin[i];
        if (begin[i] == 0.0) ++zeros;
    }
    s.mean /= static_cast<double>(count);
    s.l2_norm = std::sqrt(sq);
    s.sparsity = static_cast<double>(zeros) / static_cast<double>(count);
    return s;
}

NodeSummary node_summary(const Tensor& slice) { return node_summary(slice.data(), slice.size()); }

ProvenanceEngine::ProvenanceEngine(const TargetModel& model) : model_(&model) {
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const char* name = layer_kind_name(model.layers[i].kind);
        if (name[0] == '?')
            throw std::invalid_argument("cannot hook layer " + std::to_string(i) +
                                        ": unknown kind");
    }
}

ProvenanceEngine register_hooks(const TargetModel& model) { return ProvenanceEngine(model); }

const ActivationTrace& ProvenanceEngine::run(const Tensor& input) {
    trace_ = forward(*model_, input);
    ran_ = true;
    return trace_;
}

std::vector<Capture> ProvenanceEngine::captures() const {
    if (!ran_) throw std::logic_error("no forward pass has been captured yet");
    std::vector<Capture> out;
    out.reserve(trace_.outputs.size());
    for (std::size_t i = 0; i < trace_.outputs.size(); ++i)
        out.push_back({model_->layers[i].kind, static_cast<int>(i), &trace_.outputs[i]});
    return out;
}

namespace {

// A run of nodes drawn from one tensor: rank-1 tensors give one node per
// element, rank-3 tensors one node per channel plane.
struct NodeGroup {
    NodeType type;
    int produced_by;  // model layer index; -1 for the input group
    int last_layer;   // layer whose output currently represents the group
    int count;
    bool channel_style;
    std::uint32_t first_id;
};

const Tensor& group_tensor(const NodeGroup& g, const Tensor& input, const ActivationTrace& trace) {
    return g.produced_by < 0 && g.last_layer < 0 ? input : trace.outputs[g.last_layer];
}

std::int64_t plane_size(const Tensor& t) {
    if (t.rank() != 3) throw std::logic_error("expected rank-3 tensor for channel nodes");
    return static_cast<std::int64_t>(t.shape()[1]) * t.shape()[2];
}

}  // namespace

InferenceProvenanceGraph extract_ipg(ProvenanceEngine& engine, const Tensor& input,
                                     const ExtractionConfig& cfg, GraphMeta meta) {
    if (cfg.tau < 0.0) throw std::invalid_argument("extraction threshold must be >= 0");
    const TargetModel& model = engine.model();
    const ActivationTrace& trace = engine.run(input);

    // Lay out node groups in execution order; ids cover the full unfiltered
    // node set so they stay stable as tau grows.
    std::vector<NodeGroup> groups;
    std::uint32_t next_id = 0;
    auto add_group = [&](NodeType type, int layer, int count, bool channel_style) {
        groups.push_back({type, layer, layer, count, channel_style, next_id});
        next_id += static_cast<std::uint32_t>(count);
    };

    if (cfg.include_input_nodes) {
        if (input.rank() == 1)
            add_group(NodeType::input, -1, static_cast<int>(input.size()), false);
        else if (input.rank() == 3)
            add_group(NodeType::input, -1, input.shape()[0], true);
        else
            throw std::invalid_argument("unsupported input rank " + std::to_string(input.rank()));
    }

    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const LayerSpec& l = model.layers[i];
        const int idx = static_cast<int>(i);
        switch (l.kind) {
            case LayerKind::dense:
                add_group(NodeType::dense_neuron, idx, l.out_features, false);
                break;
            case LayerKind::conv2d:
                add_group(NodeType::conv_channel, idx, l.out_channels, true);
                break;
            case LayerKind::maxpool2d:
                add_group(NodeType::pooled_channel, idx, trace.outputs[i].shape()[0], true);
                break;
            case LayerKind::relu:
                // Re-attribute the preceding parametric group's activation to
                // the rectified tensor; a leading relu attributes nothing.
                if (!groups.empty() && groups.back().produced_by >= 0 &&
                    groups.back().last_layer == idx - 1)
                    groups.back().last_layer = idx;
                break;
            case LayerKind::flatten:
                break;
        }
    }

    // Summaries and masks for every node, then the survivor set.
    const std::uint32_t total = next_id;
    std::vector<NodeSummary> summaries(total);
    std::vector<bool> mask(total), survives(total);
    for (const NodeGroup& g : groups) {
        const Tensor& t = group_tensor(g, input, trace);
        const std::int64_t plane = g.channel_style ? plane_size(t) : 1;
        for (int j = 0; j < g.count; ++j) {
            const std::uint32_t id = g.first_id + j;
            summaries[id] = node_summary(t.data() + j * plane, plane);
            mask[id] = summaries[id].l2_norm >= cfg.tau;
            survives[id] = g.type == NodeType::input ? true : mask[id];
        }
    }

    InferenceProvenanceGraph ipg;
    for (const NodeGroup& g : groups)
        for (int j = 0; j < g.count; ++j) {
            const std::uint32_t id = g.first_id + j;
            if (!survives[id]) continue;
            ipg.nodes.push_back({id, g.type, g.produced_by + 1, summaries[id].mean,
                                 summaries[id].l2_norm, summaries[id].sparsity, mask[id]});
        }

    // Edges between consecutive surviving groups, typed by the connecting layer.
    for (std::size_t a = 0; a + 1 < groups.size(); ++a) {
        const NodeGroup& src = groups[a];
        const NodeGroup& dst = groups[a + 1];
        const LayerSpec& layer = model.layers[dst.produced_by];
        switch (layer.kind) {
            case LayerKind::dense: {
                const Tensor& w = model.params[model.param_index[dst.produced_by]];
                // Channel-style sources reach dense neurons through flatten;
                // fold |W| over each channel's block of flattened positions.
                std::int64_t block = 1;
                if (src.channel_style) block = plane_size(group_tensor(src, input, trace));
                for (int v = 0; v < dst.count; ++v) {
                    if (!survives[dst.first_id + v]) continue;
                    const double* row = w.data() + static_cast<std::int64_t>(v) * layer.in_features;
                    for (int u = 0; u < src.count; ++u) {
                        if (!survives[src.first_id + u]) continue;
                        double attr;
                        if (src.channel_style) {
                            double acc = 0.0;
                            for (std::int64_t p = 0; p < block; ++p)
                                acc += std::abs(row[u * block + p]);
                            attr = acc / static_cast<double>(block);
                        } else {
                            attr = row[u];
                        }
                        ipg.edges.push_back({src.first_id + u, dst.first_id + v,
                                             EdgeType::dense_weight, attr});
                    }
                }
                break;
            }
            case LayerKind::conv2d: {
                const Tensor& k = model.params[model.param_index[dst.produced_by]];
                const std::int64_t ksq =
                    static_cast<std::int64_t>(layer.kernel) * layer.kernel;
                for (int v = 0; v < dst.count; ++v) {
                    if (!survives[dst.first_id + v]) continue;
                    for (int u = 0; u < src.count; ++u) {
                        if (!survives[src.first_id + u]) continue;
                        const double* kernel =
                            k.data() + (static_cast<std::int64_t>(v) * layer.in_channels + u) * ksq;
                        double acc = 0.0;
                        for (std::int64_t p = 0; p < ksq; ++p) acc += std::abs(kernel[p]);
                        ipg.edges.push_back({src.first_id + u, dst.first_id + v,
                                             EdgeType::conv_channel_weight,
                                             acc / static_cast<double>(ksq)});
                    }
                }
                break;
            }
            case LayerKind::maxpool2d: {
                for (int u = 0; u < src.count; ++u)
                    if (survives[src.first_id + u] && survives[dst.first_id + u])
                        ipg.edges.push_back(
                            {src.first_id + u, dst.first_id + u, EdgeType::structural, 1.0});
                break;
            }
            default:
                throw std::logic_error("group produced by non-parametric layer");
        }
    }

    // Emit edges in the container's canonical order so a stored graph loads
    // back equal, not merely equivalent.
    std::sort(ipg.edges.begin(), ipg.edges.end(), [](const IPGEdge& a, const IPGEdge& b) {
        return std::tie(a.source, a.target, a.type) < std::tie(b.source, b.target, b.type);
    });

    meta.model_id = model.model_id;
    meta.config_hash = cfg.config_hash();
    const Tensor& logits = trace.logits();
    meta.predicted_label = static_cast<int>(
        std::max_element(logits.data(), logits.data() + logits.size()) - logits.data());
    ipg.meta = std::move(meta);
    return ipg;
}

bool verify_dag(const InferenceProvenanceGraph& ipg) {
    std::unordered_map<std::uint32_t, std::int32_t> layer_of;
    layer_of.reserve(ipg.nodes.size());
    for (const IPGNode& n : ipg.nodes)
        if (!layer_of.emplace(n.node_id, n.layer_index).second) return false;
    for (const IPGEdge& e : ipg.edges) {
        auto s = layer_of.find(e.source);
        auto t = layer_of.find(e.target);
        if (s == layer_of.end() || t == layer_of.end()) return false;
        if (s->second >= t->second) return false;
    }
    return true;
}

}  // namespace ipg
