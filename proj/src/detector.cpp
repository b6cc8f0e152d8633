#include "ipg/detector.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

#include "ipg/rng.hpp"

namespace ipg {

namespace {

constexpr int kRel = DetectorModel::kEdgeTypes;
constexpr int kRaw = DetectorModel::kRawFeatureDim;

// Strict weak order on doubles whose equivalence classes are single bit
// patterns (finite inputs): -0 sorts before +0.
bool double_less(double a, double b) {
    if (a < b) return true;
    if (b < a) return false;
    return std::signbit(a) && !std::signbit(b);
}

bool lex_less(const double* a, const double* b, int d) {
    for (int k = 0; k < d; ++k) {
        if (double_less(a[k], b[k])) return true;
        if (double_less(b[k], a[k])) return false;
    }
    return false;
}

void matvec_acc(const double* m, int rows, int cols, const double* x, double* y) {
    for (int i = 0; i < rows; ++i) {
        const double* row = m + static_cast<std::size_t>(i) * cols;
        double acc = 0.0;
        for (int j = 0; j < cols; ++j) acc += row[j] * x[j];
        y[i] += acc;
    }
}

void matvec_t_acc(const double* m, int rows, int cols, const double* x, double* y) {
    for (int i = 0; i < rows; ++i) {
        const double* row = m + static_cast<std::size_t>(i) * cols;
        const double xi = x[i];
        for (int j = 0; j < cols; ++j) y[j] += row[j] * xi;
    }
}

void outer_acc(double* m, int rows, int cols, const double* a, const double* b) {
    for (int i = 0; i < rows; ++i) {
        double* row = m + static_cast<std::size_t>(i) * cols;
        const double ai = a[i];
        for (int j = 0; j < cols; ++j) row[j] += ai * b[j];
    }
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Mean of attribute-scaled neighbor embeddings per node, accumulated in a
// canonical content order so the value ignores node numbering entirely.
void mean_messages(const PreparedGraph& g, int rel, const std::vector<double>& h, int d,
                   std::vector<double>& out, std::vector<double>& scratch,
                   std::vector<int>& order) {
    for (int v = 0; v < g.node_count; ++v) {
        const auto& nbrs = g.in_edges[rel][v];
        if (nbrs.empty()) continue;
        const int deg = static_cast<int>(nbrs.size());
        scratch.resize(static_cast<std::size_t>(deg) * d);
        for (int i = 0; i < deg; ++i) {
            const double* hu = h.data() + static_cast<std::size_t>(nbrs[i].first) * d;
            const double a = nbrs[i].second;
            double* row = scratch.data() + static_cast<std::size_t>(i) * d;
            for (int k = 0; k < d; ++k) row[k] = a * hu[k];
        }
        order.resize(deg);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int i, int j) {
            return lex_less(scratch.data() + static_cast<std::size_t>(i) * d,
                            scratch.data() + static_cast<std::size_t>(j) * d, d);
        });
        double* mv = out.data() + static_cast<std::size_t>(v) * d;
        for (int i : order) {
            const double* row = scratch.data() + static_cast<std::size_t>(i) * d;
            for (int k = 0; k < d; ++k) mv[k] += row[k];
        }
        const double inv = 1.0 / static_cast<double>(deg);
        for (int k = 0; k < d; ++k) mv[k] *= inv;
    }
}

void check_graph(const DetectorModel& model, const PreparedGraph& g) {
    if (model.params.size() != static_cast<std::size_t>(model.expected_params()))
        throw std::invalid_argument("detector parameter list has wrong length");
    for (int t : g.node_type)
        if (t < 0 || t >= DetectorModel::kNodeTypes)
            throw std::invalid_argument("unknown node type tag " + std::to_string(t));
}

struct GraphForward {
    std::vector<std::vector<double>> h;  // layers+1 embeddings, node_count x d each
    std::vector<std::array<std::vector<double>, kRel>> msg;  // pre-transform mean messages
    std::vector<double> pooled;
    double p = 0.5;
};

GraphForward run_forward(const DetectorModel& model, const PreparedGraph& g) {
    check_graph(model, g);
    const int d = model.config.hidden_dim;
    const int n = g.node_count;
    const int layers = model.config.layers;
    if (n == 0) throw std::invalid_argument("cannot score an empty graph");

    GraphForward f;
    f.h.resize(layers + 1);
    f.h[0] = standardize_features(model, g);
    f.msg.resize(layers);
    std::vector<double> scratch;
    std::vector<int> order;
    for (int l = 0; l < layers; ++l) {
        for (int r = 0; r < kRel; ++r) {
            f.msg[l][r].assign(static_cast<std::size_t>(n) * d, 0.0);
            mean_messages(g, r, f.h[l], d, f.msg[l][r], scratch, order);
        }
        f.h[l + 1].assign(static_cast<std::size_t>(n) * d, 0.0);
        const Tensor& w_self = model.params[model.self_index(l)];
        for (int v = 0; v < n; ++v) {
            double* z = f.h[l + 1].data() + static_cast<std::size_t>(v) * d;
            matvec_acc(w_self.data(), d, d, f.h[l].data() + static_cast<std::size_t>(v) * d, z);
            for (int r = 0; r < kRel; ++r)
                matvec_acc(model.params[model.rel_index(l, r)].data(), d, d,
                           f.msg[l][r].data() + static_cast<std::size_t>(v) * d, z);
            for (int k = 0; k < d; ++k)
                if (z[k] < 0.0) z[k] = 0.0;
        }
    }
    f.pooled = readout(f.h[layers], n, d);

    const Tensor& w = model.params[model.head_w_index()];
    double logit = model.params[model.head_b_index()][0];
    for (int k = 0; k < d; ++k) logit += w[k] * f.pooled[k];
    if (!std::isfinite(logit)) throw std::runtime_error("non-finite detector output");
    f.p = sigmoid(logit);
    return f;
}

void accumulate_graph_grad(const DetectorModel& model, const PreparedGraph& g,
                           const GraphForward& f, double dlogit, std::vector<Tensor>& grads) {
    const int d = model.config.hidden_dim;
    const int n = g.node_count;
    const int layers = model.config.layers;

    grads[model.head_b_index()][0] += dlogit;
    Tensor& dw_head = grads[model.head_w_index()];
    for (int k = 0; k < d; ++k) dw_head[k] += dlogit * f.pooled[k];

    const Tensor& w_head = model.params[model.head_w_index()];
    std::vector<double> dh(static_cast<std::size_t>(n) * d);
    const double per_node = dlogit / static_cast<double>(n);
    for (int v = 0; v < n; ++v)
        for (int k = 0; k < d; ++k) dh[static_cast<std::size_t>(v) * d + k] = per_node * w_head[k];

    std::vector<double> dz(static_cast<std::size_t>(n) * d);
    std::vector<double> dh_prev;
    std::vector<double> dmsg(d);
    for (int l = layers - 1; l >= 0; --l) {
        const std::vector<double>& h_out = f.h[l + 1];
        for (std::size_t i = 0; i < dz.size(); ++i) dz[i] = h_out[i] > 0.0 ? dh[i] : 0.0;

        dh_prev.assign(static_cast<std::size_t>(n) * d, 0.0);
        Tensor& dw_self = grads[model.self_index(l)];
        const Tensor& w_self = model.params[model.self_index(l)];
        for (int v = 0; v < n; ++v) {
            const double* dzv = dz.data() + static_cast<std::size_t>(v) * d;
            outer_acc(dw_self.data(), d, d, dzv, f.h[l].data() + static_cast<std::size_t>(v) * d);
            matvec_t_acc(w_self.data(), d, d, dzv,
                         dh_prev.data() + static_cast<std::size_t>(v) * d);
            for (int r = 0; r < kRel; ++r) {
                const auto& nbrs = g.in_edges[r][v];
                if (nbrs.empty()) continue;
                outer_acc(grads[model.rel_index(l, r)].data(), d, d, dzv,
                          f.msg[l][r].data() + static_cast<std::size_t>(v) * d);
                std::fill(dmsg.begin(), dmsg.end(), 0.0);
                matvec_t_acc(model.params[model.rel_index(l, r)].data(), d, d, dzv, dmsg.data());
                const double inv = 1.0 / static_cast<double>(nbrs.size());
                for (const auto& [u, a] : nbrs) {
                    double* dhu = dh_prev.data() + static_cast<std::size_t>(u) * d;
                    const double scale = a * inv;
                    for (int k = 0; k < d; ++k) dhu[k] += scale * dmsg[k];
                }
            }
        }
        dh.swap(dh_prev);
    }

    for (int v = 0; v < n; ++v)
        outer_acc(grads[model.proj_index(g.node_type[v])].data(), d, kRaw,
                  dh.data() + static_cast<std::size_t>(v) * d,
                  g.raw.data() + static_cast<std::size_t>(v) * kRaw);
}

double batch_loss(const DetectorModel& model, const PreparedGraph* const* batch, std::size_t count,
                  std::vector<Tensor>* grads) {
    if (count == 0) throw std::invalid_argument("empty detector batch");
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const PreparedGraph& g = *batch[i];
        GraphForward f = run_forward(model, g);
        loss_sum += bce(f.p, g.label);
        if (grads) {
            const double dlogit =
                (f.p - static_cast<double>(g.label)) / static_cast<double>(count);
            accumulate_graph_grad(model, g, f, dlogit, *grads);
        }
    }
    return loss_sum / static_cast<double>(count);
}

}  // namespace

DetectorModel init_detector(const DetectorConfig& cfg) {
    if (cfg.hidden_dim <= 0 || cfg.layers <= 0 || cfg.batch_size <= 0 ||
        cfg.learning_rate <= 0.0 || cfg.epochs < 0 || cfg.patience <= 0 ||
        cfg.threshold <= 0.0 || cfg.threshold >= 1.0)
        throw std::invalid_argument("bad detector config");

    DetectorModel m;
    m.config = cfg;
    Rng rng(mix_seed(cfg.seed, "detector-init"));
    const int d = cfg.hidden_dim;
    auto uniform_tensor = [&](std::vector<int> shape, int fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Tensor t(shape);
        for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
        return t;
    };
    for (int t = 0; t < DetectorModel::kNodeTypes; ++t)
        m.params.push_back(uniform_tensor({d, kRaw}, kRaw));
    for (int l = 0; l < cfg.layers; ++l) {
        m.params.push_back(uniform_tensor({d, d}, d));
        for (int r = 0; r < kRel; ++r) m.params.push_back(uniform_tensor({d, d}, d));
    }
    m.params.push_back(uniform_tensor({d}, d));
    m.params.push_back(uniform_tensor({1}, d));
    return m;
}

PreparedGraph prepare_graph(const InferenceProvenanceGraph& ipg) {
    PreparedGraph g;
    g.node_count = static_cast<int>(ipg.nodes.size());
    g.label = ipg.meta.graph_label;
    g.sample_id = ipg.meta.sample_id;

    std::int32_t max_layer = 0;
    for (const IPGNode& n : ipg.nodes) max_layer = std::max(max_layer, n.layer_index);
    const double depth_scale = max_layer > 0 ? 1.0 / static_cast<double>(max_layer) : 0.0;

    std::unordered_map<std::uint32_t, int> index;
    index.reserve(ipg.nodes.size());
    g.raw.resize(static_cast<std::size_t>(g.node_count) * kRaw);
    g.node_type.resize(g.node_count);
    for (int i = 0; i < g.node_count; ++i) {
        const IPGNode& n = ipg.nodes[i];
        if (!index.emplace(n.node_id, i).second)
            throw std::invalid_argument("duplicate node id " + std::to_string(n.node_id));
        double* row = g.raw.data() + static_cast<std::size_t>(i) * kRaw;
        row[0] = n.mean;
        row[1] = n.l2_norm;
        row[2] = n.sparsity;
        row[3] = n.mask ? 1.0 : 0.0;
        row[4] = static_cast<double>(n.layer_index) * depth_scale;
        g.node_type[i] = static_cast<int>(n.type);
    }
    for (int r = 0; r < kRel; ++r) g.in_edges[r].resize(g.node_count);
    for (const IPGEdge& e : ipg.edges) {
        auto s = index.find(e.source);
        auto t = index.find(e.target);
        if (s == index.end() || t == index.end())
            throw std::invalid_argument("edge endpoint not among nodes: " +
                                        std::to_string(e.source) + " -> " +
                                        std::to_string(e.target));
        g.in_edges[static_cast<int>(e.type)][t->second].emplace_back(s->second, e.attribute);
    }
    return g;
}

std::vector<double> standardize_features(const DetectorModel& model, const PreparedGraph& g) {
    check_graph(model, g);
    const int d = model.config.hidden_dim;
    std::vector<double> h(static_cast<std::size_t>(g.node_count) * d, 0.0);
    for (int v = 0; v < g.node_count; ++v) {
        const Tensor& proj = model.params[model.proj_index(g.node_type[v])];
        matvec_acc(proj.data(), d, kRaw, g.raw.data() + static_cast<std::size_t>(v) * kRaw,
                   h.data() + static_cast<std::size_t>(v) * d);
    }
    return h;
}

std::vector<double> sage_layer(const DetectorModel& model, const PreparedGraph& g, int layer,
                               const std::vector<double>& h_in) {
    check_graph(model, g);
    const int d = model.config.hidden_dim;
    const int n = g.node_count;
    if (layer < 0 || layer >= model.config.layers)
        throw std::invalid_argument("layer index out of range");
    if (h_in.size() != static_cast<std::size_t>(n) * d)
        throw std::invalid_argument("embedding buffer has wrong size");

    std::vector<double> scratch;
    std::vector<int> order;
    std::array<std::vector<double>, kRel> msg;
    for (int r = 0; r < kRel; ++r) {
        msg[r].assign(static_cast<std::size_t>(n) * d, 0.0);
        mean_messages(g, r, h_in, d, msg[r], scratch, order);
    }
    std::vector<double> h_out(static_cast<std::size_t>(n) * d, 0.0);
    const Tensor& w_self = model.params[model.self_index(layer)];
    for (int v = 0; v < n; ++v) {
        double* z = h_out.data() + static_cast<std::size_t>(v) * d;
        matvec_acc(w_self.data(), d, d, h_in.data() + static_cast<std::size_t>(v) * d, z);
        for (int r = 0; r < kRel; ++r)
            matvec_acc(model.params[model.rel_index(layer, r)].data(), d, d,
                       msg[r].data() + static_cast<std::size_t>(v) * d, z);
        for (int k = 0; k < d; ++k)
            if (z[k] < 0.0) z[k] = 0.0;
    }
    return h_out;
}

std::vector<double> readout(const std::vector<double>& h, int node_count, int dim) {
    if (node_count <= 0) throw std::invalid_argument("readout: empty graph");
    if (h.size() != static_cast<std::size_t>(node_count) * dim)
        throw std::invalid_argument("readout: embedding buffer has wrong size");
    std::vector<int> order(node_count);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
        return lex_less(h.data() + static_cast<std::size_t>(i) * dim,
                        h.data() + static_cast<std::size_t>(j) * dim, dim);
    });
    std::vector<double> out(dim, 0.0);
    for (int v : order) {
        const double* row = h.data() + static_cast<std::size_t>(v) * dim;
        for (int k = 0; k < dim; ++k) out[k] += row[k];
    }
    const double inv = 1.0 / static_cast<double>(node_count);
    for (int k = 0; k < dim; ++k) out[k] *= inv;
    return out;
}

double detector_score(const DetectorModel& model, const PreparedGraph& g) {
    return run_forward(model, g).p;
}

double detector_forward(const DetectorModel& model, const InferenceProvenanceGraph& ipg) {
    return detector_score(model, prepare_graph(ipg));
}

double bce(double p, int y) {
    if (y != 0 && y != 1) throw std::invalid_argument("bce: label must be 0 or 1");
    constexpr double kEps = 1e-15;
    const double pc = std::clamp(p, kEps, 1.0 - kEps);
    return y == 1 ? -std::log(pc) : -std::log(1.0 - pc);
}

double detector_loss(const DetectorModel& model, const std::vector<PreparedGraph>& batch) {
    std::vector<const PreparedGraph*> view;
    view.reserve(batch.size());
    for (const PreparedGraph& g : batch) view.push_back(&g);
    return batch_loss(model, view.data(), view.size(), nullptr);
}

double detector_loss_and_grad(const DetectorModel& model, const std::vector<PreparedGraph>& batch,
                              std::vector<Tensor>& grads) {
    grads.clear();
    grads.reserve(model.params.size());
    for (const Tensor& p : model.params) grads.emplace_back(p.shape());
    std::vector<const PreparedGraph*> view;
    view.reserve(batch.size());
    for (const PreparedGraph& g : batch) view.push_back(&g);
    return batch_loss(model, view.data(), view.size(), &grads);
}

DetectorTrainResult train_detector(const std::vector<InferenceProvenanceGraph>& train,
                                   const std::vector<InferenceProvenanceGraph>& val,
                                   const DetectorConfig& cfg) {
    if (train.empty()) throw std::invalid_argument("train_detector: no training graphs");

    std::vector<PreparedGraph> train_prep, val_prep;
    train_prep.reserve(train.size());
    for (const auto& ipg : train) {
        if (ipg.nodes.empty())
            throw std::invalid_argument("training graph has no nodes: " + ipg.meta.sample_id);
        train_prep.push_back(prepare_graph(ipg));
    }
    val_prep.reserve(val.size());
    for (const auto& ipg : val) {
        if (ipg.nodes.empty())
            throw std::invalid_argument("validation graph has no nodes: " + ipg.meta.sample_id);
        val_prep.push_back(prepare_graph(ipg));
    }

    DetectorTrainResult out;
    out.model = init_detector(cfg);
    DetectorModel& model = out.model;
    TrainingCurves& curves = out.curves;

    AdamState adam = AdamState::init(model.params);
    Rng shuffle_rng(mix_seed(cfg.seed, "detector-shuffle"));
    std::vector<const PreparedGraph*> order;
    order.reserve(train_prep.size());
    for (const PreparedGraph& g : train_prep) order.push_back(&g);

    auto split_metrics = [&](const std::vector<PreparedGraph>& graphs, double& loss, double& acc) {
        double loss_sum = 0.0;
        std::size_t hits = 0;
        for (const PreparedGraph& g : graphs) {
            const double p = detector_score(model, g);
            loss_sum += bce(p, g.label);
            if ((p >= cfg.threshold ? 1 : 0) == g.label) ++hits;
        }
        loss = loss_sum / static_cast<double>(graphs.size());
        acc = static_cast<double>(hits) / static_cast<double>(graphs.size());
    };

    std::vector<Tensor> grads;
    grads.reserve(model.params.size());
    for (const Tensor& p : model.params) grads.emplace_back(p.shape());

    double best_val = std::numeric_limits<double>::infinity();
    std::vector<Tensor> best_params;
    int stall = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            for (Tensor& g : grads) g.fill(0.0);
            const double loss = batch_loss(model, order.data() + start, stop - start, &grads);
            if (!std::isfinite(loss))
                throw std::runtime_error("detector loss diverged at epoch " +
                                         std::to_string(epoch));
            adam_step(model.params, grads, adam, cfg.learning_rate);
        }

        double train_loss, train_acc;
        split_metrics(train_prep, train_loss, train_acc);
        if (!std::isfinite(train_loss))
            throw std::runtime_error("detector loss diverged at epoch " + std::to_string(epoch));
        curves.train_loss.push_back(train_loss);
        curves.train_accuracy.push_back(train_acc);

        if (!val_prep.empty()) {
            double val_loss, val_acc;
            split_metrics(val_prep, val_loss, val_acc);
            curves.val_loss.push_back(val_loss);
            curves.val_accuracy.push_back(val_acc);
            if (val_loss < best_val) {
                best_val = val_loss;
                best_params = model.params;
                curves.best_epoch = epoch;
                stall = 0;
            } else if (++stall >= cfg.patience) {
                curves.early_stopped = true;
                break;
            }
        } else {
            curves.best_epoch = epoch;
        }
    }
    if (!best_params.empty()) model.params = std::move(best_params);
    return out;
}

DetectorTrainResult train_detector(const Manifest& manifest,
                                   const std::filesystem::path& base_dir,
                                   const DetectorConfig& cfg) {
    const std::vector<std::string> leaks = validate_splits(manifest);
    if (!leaks.empty()) {
        std::string msg = "manifest leaks inputs across splits:";
        for (const std::string& id : leaks) msg += " " + id;
        throw std::runtime_error(msg);
    }
    std::vector<InferenceProvenanceGraph> train, val;
    for (const ManifestRecord* r : split_records(manifest, "train"))
        train.push_back(load_graph(base_dir / r->path));
    for (const ManifestRecord* r : split_records(manifest, "val"))
        val.push_back(load_graph(base_dir / r->path));
    return train_detector(train, val, cfg);
}

std::vector<double> score_graphs(const DetectorModel& model,
                                 const std::vector<InferenceProvenanceGraph>& graphs) {
    std::vector<double> scores;
    scores.reserve(graphs.size());
    for (const InferenceProvenanceGraph& ipg : graphs) {
        if (ipg.nodes.empty()) {
            std::fprintf(stderr, "warning: empty graph %s scored 0.5\n",
                         ipg.meta.sample_id.c_str());
            scores.push_back(0.5);
        } else {
            scores.push_back(detector_forward(model, ipg));
        }
    }
    return scores;
}

ScoredSplit predict_batch(const DetectorModel& model, const Manifest& manifest,
                          const std::string& split, const std::filesystem::path& base_dir) {
    std::vector<InferenceProvenanceGraph> graphs;
    ScoredSplit out;
    for (const ManifestRecord* r : split_records(manifest, split)) {
        InferenceProvenanceGraph ipg = load_graph(base_dir / r->path);
        if (ipg.meta.graph_label != r->graph_label)
            throw std::runtime_error("graph label disagrees with manifest for " + r->sample_id);
        out.labels.push_back(r->graph_label);
        graphs.push_back(std::move(ipg));
    }
    out.scores = score_graphs(model, graphs);
    return out;
}

namespace {

std::vector<std::string> detector_param_names(const DetectorConfig& cfg) {
    std::vector<std::string> names;
    for (int t = 0; t < DetectorModel::kNodeTypes; ++t)
        names.push_back(std::string("proj.") + node_type_name(static_cast<NodeType>(t)));
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string base = "sage" + std::to_string(l + 1);
        names.push_back(base + ".self");
        for (int r = 0; r < kRel; ++r)
            names.push_back(base + ".rel." + edge_type_name(static_cast<EdgeType>(r)));
    }
    names.push_back("head.w");
    names.push_back("head.b");
    return names;
}

}  // namespace

void save_detector(const std::filesystem::path& path, const DetectorModel& model) {
    if (model.params.size() != static_cast<std::size_t>(model.expected_params()))
        throw std::invalid_argument("detector parameter list has wrong length");
    nlohmann::json meta;
    meta["kind"] = "detector";
    meta["hidden_dim"] = model.config.hidden_dim;
    meta["layers"] = model.config.layers;
    meta["batch_size"] = model.config.batch_size;
    meta["learning_rate"] = model.config.learning_rate;
    meta["epochs"] = model.config.epochs;
    meta["patience"] = model.config.patience;
    meta["threshold"] = model.config.threshold;
    meta["seed"] = model.config.seed;

    TensorTable table;
    table.meta = meta.dump();
    const std::vector<std::string> names = detector_param_names(model.config);
    for (std::size_t i = 0; i < names.size(); ++i)
        table.entries.emplace_back(names[i], model.params[i]);
    save_tensor_table(path, table);
}

DetectorModel load_detector(const std::filesystem::path& path) {
    TensorTable table = load_tensor_table(path);
    DetectorModel model;
    try {
        nlohmann::json meta = nlohmann::json::parse(table.meta);
        if (meta.at("kind") != "detector") throw std::runtime_error("not a detector file");
        model.config.hidden_dim = meta.at("hidden_dim").get<int>();
        model.config.layers = meta.at("layers").get<int>();
        model.config.batch_size = meta.at("batch_size").get<int>();
        model.config.learning_rate = meta.at("learning_rate").get<double>();
        model.config.epochs = meta.at("epochs").get<int>();
        model.config.patience = meta.at("patience").get<int>();
        model.config.threshold = meta.at("threshold").get<double>();
        model.config.seed = meta.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": bad detector metadata: " + e.what());
    }

    const std::vector<std::string> names = detector_param_names(model.config);
    if (table.entries.size() != names.size())
        throw std::runtime_error(path.string() + ": expected " + std::to_string(names.size()) +
                                 " parameter tensors, found " +
                                 std::to_string(table.entries.size()));
    const int d = model.config.hidden_dim;
    for (std::size_t i = 0; i < names.size(); ++i) {
        auto& [name, tensor] = table.entries[i];
        if (name != names[i])
            throw std::runtime_error(path.string() + ": unexpected tensor '" + name +
                                     "', wanted '" + names[i] + "'");
        std::vector<int> want;
        if (name.rfind("proj.", 0) == 0) want = {d, kRaw};
        else if (name == "head.w") want = {d};
        else if (name == "head.b") want = {1};
        else want = {d, d};
        if (tensor.shape() != want)
            throw std::runtime_error(path.string() + ": tensor '" + name + "' has shape " +
                                     shape_to_string(tensor.shape()));
        model.params.push_back(std::move(tensor));
    }
    return model;
}

}  // namespace ipg
