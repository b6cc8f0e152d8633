#include "ipg/store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "ipg/attacks.hpp"
#include "ipg/rng.hpp"

namespace ipg {

namespace {

constexpr char kGraphMagic[4] = {'I', 'P', 'G', 'B'};
constexpr char kTableMagic[4] = {'I', 'P', 'G', 'T'};
constexpr std::uint8_t kFormatVersion = 1;

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_i32(std::string& out, std::int32_t v) { put_u32(out, static_cast<std::uint32_t>(v)); }

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_string(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

struct Cursor {
    const unsigned char* data;
    std::size_t size;
    std::size_t off = 0;

    void need(std::size_t k, const char* what) {
        if (off + k > size)
            throw ParseError(off, std::string("input truncated while reading ") + what);
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return data[off++];
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[off + i]) << (8 * i);
        off += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[off + i]) << (8 * i);
        off += 8;
        return v;
    }
    std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
    std::string str(const char* what) {
        const std::size_t at = off;
        const std::uint32_t len = u32(what);
        if (off + len > size)
            throw ParseError(at, std::string(what) + " length overruns input");
        std::string s(reinterpret_cast<const char*>(data + off), len);
        off += len;
        return s;
    }
};

void check_magic(Cursor& c, const char (&magic)[4]) {
    for (int i = 0; i < 4; ++i) {
        c.need(1, "magic");
        if (static_cast<char>(c.data[c.off]) != magic[i])
            throw ParseError(c.off, "bad magic byte");
        ++c.off;
    }
}

void check_version(Cursor& c) {
    const std::size_t at = c.off;
    const std::uint8_t v = c.u8("version");
    if (v != kFormatVersion)
        throw ParseError(at, "unsupported version " + std::to_string(v));
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (!in.good() && !in.eof()) throw std::runtime_error("read failed: " + path.string());
    return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot create " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out.good()) throw std::runtime_error("write failed: " + path.string());
}

void check_graph_invariants(const InferenceProvenanceGraph& ipg) {
    std::unordered_set<std::uint32_t> ids;
    ids.reserve(ipg.nodes.size());
    for (const IPGNode& n : ipg.nodes) {
        if (!ids.insert(n.node_id).second)
            throw std::invalid_argument("duplicate node id " + std::to_string(n.node_id));
        if (!std::isfinite(n.mean) || !std::isfinite(n.l2_norm) || !std::isfinite(n.sparsity))
            throw std::invalid_argument("non-finite feature on node " + std::to_string(n.node_id));
        if (n.l2_norm < 0.0 || n.sparsity < 0.0 || n.sparsity > 1.0)
            throw std::invalid_argument("feature out of range on node " + std::to_string(n.node_id));
    }
    for (const IPGEdge& e : ipg.edges) {
        if (!ids.count(e.source) || !ids.count(e.target))
            throw std::invalid_argument("edge endpoint missing: " + std::to_string(e.source) +
                                        " -> " + std::to_string(e.target));
        if (!std::isfinite(e.attribute))
            throw std::invalid_argument("non-finite edge attribute");
        if (e.type == EdgeType::structural && e.attribute != 1.0)
            throw std::invalid_argument("structural edge attribute must be exactly 1.0");
    }
    if (ipg.meta.graph_label != 0 && ipg.meta.graph_label != 1)
        throw std::invalid_argument("graph label must be 0 or 1");
    if (!verify_dag(ipg)) throw std::invalid_argument("graph is not a forward DAG");
}

}  // namespace

std::string serialize_ipg(const InferenceProvenanceGraph& ipg) {
    check_graph_invariants(ipg);

    std::vector<IPGNode> nodes = ipg.nodes;
    std::sort(nodes.begin(), nodes.end(),
              [](const IPGNode& a, const IPGNode& b) { return a.node_id < b.node_id; });
    std::vector<IPGEdge> edges = ipg.edges;
    auto edge_key = [](const IPGEdge& e) {
        return std::tuple(e.source, e.target, static_cast<std::uint8_t>(e.type));
    };
    std::sort(edges.begin(), edges.end(),
              [&](const IPGEdge& a, const IPGEdge& b) { return edge_key(a) < edge_key(b); });
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (edge_key(edges[i - 1]) == edge_key(edges[i]))
            throw std::invalid_argument("duplicate edge " + std::to_string(edges[i].source) +
                                        " -> " + std::to_string(edges[i].target));

    std::string out;
    out.append(kGraphMagic, 4);
    put_u8(out, kFormatVersion);
    put_string(out, ipg.meta.sample_id);
    put_string(out, ipg.meta.model_id);
    put_string(out, ipg.meta.attack_kind);
    put_string(out, ipg.meta.config_hash);
    put_u8(out, static_cast<std::uint8_t>(ipg.meta.graph_label));
    put_i32(out, ipg.meta.input_label);
    put_i32(out, ipg.meta.predicted_label);
    put_u64(out, nodes.size());
    put_u64(out, edges.size());
    for (const IPGNode& n : nodes) {
        put_u32(out, n.node_id);
        put_u8(out, static_cast<std::uint8_t>(n.type));
        put_i32(out, n.layer_index);
        put_f64(out, n.mean);
        put_f64(out, n.l2_norm);
        put_f64(out, n.sparsity);
        put_u8(out, n.mask ? 1 : 0);
    }
    for (const IPGEdge& e : edges) {
        put_u32(out, e.source);
        put_u32(out, e.target);
        put_u8(out, static_cast<std::uint8_t>(e.type));
        put_f64(out, e.attribute);
    }
    return out;
}

InferenceProvenanceGraph deserialize_ipg(std::string_view bytes) {
    Cursor c{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};
    check_magic(c, kGraphMagic);
    check_version(c);

    InferenceProvenanceGraph ipg;
    ipg.meta.sample_id = c.str("sample_id");
    ipg.meta.model_id = c.str("model_id");
    ipg.meta.attack_kind = c.str("attack_kind");
    ipg.meta.config_hash = c.str("config_hash");
    {
        const std::size_t at = c.off;
        const std::uint8_t y = c.u8("graph_label");
        if (y > 1) throw ParseError(at, "graph label must be 0 or 1");
        ipg.meta.graph_label = y;
    }
    ipg.meta.input_label = c.i32("input_label");
    ipg.meta.predicted_label = c.i32("predicted_label");

    const std::uint64_t node_count = c.u64("node count");
    const std::uint64_t edge_count = c.u64("edge count");

    std::unordered_map<std::uint32_t, std::int32_t> layer_of;
    layer_of.reserve(node_count);
    ipg.nodes.reserve(node_count);
    for (std::uint64_t i = 0; i < node_count; ++i) {
        const std::size_t at = c.off;
        IPGNode n;
        n.node_id = c.u32("node id");
        const std::uint8_t type = c.u8("node type");
        if (type > 3) throw ParseError(at, "unknown node type " + std::to_string(type));
        n.type = static_cast<NodeType>(type);
        n.layer_index = c.i32("layer index");
        n.mean = c.f64("node mean");
        n.l2_norm = c.f64("node l2 norm");
        n.sparsity = c.f64("node sparsity");
        const std::uint8_t m = c.u8("node mask");
        if (m > 1) throw ParseError(at, "mask must be 0 or 1");
        n.mask = m == 1;
        if (!std::isfinite(n.mean) || !std::isfinite(n.l2_norm) || !std::isfinite(n.sparsity))
            throw ParseError(at, "non-finite node feature");
        if (n.l2_norm < 0.0 || n.sparsity < 0.0 || n.sparsity > 1.0)
            throw ParseError(at, "node feature out of range");
        if (!ipg.nodes.empty() && ipg.nodes.back().node_id >= n.node_id)
            throw ParseError(at, "node table not sorted by node_id");
        layer_of.emplace(n.node_id, n.layer_index);
        ipg.nodes.push_back(n);
    }

    ipg.edges.reserve(edge_count);
    auto edge_key = [](const IPGEdge& e) {
        return std::tuple(e.source, e.target, static_cast<std::uint8_t>(e.type));
    };
    for (std::uint64_t i = 0; i < edge_count; ++i) {
        const std::size_t at = c.off;
        IPGEdge e;
        e.source = c.u32("edge source");
        e.target = c.u32("edge target");
        const std::uint8_t type = c.u8("edge type");
        if (type > 2) throw ParseError(at, "unknown edge type " + std::to_string(type));
        e.type = static_cast<EdgeType>(type);
        e.attribute = c.f64("edge attribute");
        if (!std::isfinite(e.attribute)) throw ParseError(at, "non-finite edge attribute");
        if (e.type == EdgeType::structural && e.attribute != 1.0)
            throw ParseError(at, "structural edge attribute must be exactly 1.0");
        auto s = layer_of.find(e.source);
        auto t = layer_of.find(e.target);
        if (s == layer_of.end() || t == layer_of.end())
            throw ParseError(at, "edge endpoint not in node table");
        if (s->second >= t->second) throw ParseError(at, "edge does not run forward");
        if (!ipg.edges.empty() && edge_key(ipg.edges.back()) >= edge_key(e))
            throw ParseError(at, "edge table not sorted by (source, target, type)");
        ipg.edges.push_back(e);
    }

    if (c.off != c.size) throw ParseError(c.off, "trailing bytes after edge table");
    return ipg;
}

void save_graph(const std::filesystem::path& path, const InferenceProvenanceGraph& ipg) {
    write_file(path, serialize_ipg(ipg));
}

InferenceProvenanceGraph load_graph(const std::filesystem::path& path) {
    try {
        return deserialize_ipg(read_file(path));
    } catch (const ParseError& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

std::string graph_file_name(const std::string& sample_id) {
    std::string out = sample_id;
    for (std::size_t pos = 0; (pos = out.find("::", pos)) != std::string::npos; pos += 2)
        out.replace(pos, 2, "__");
    return out + ".ipg";
}

std::string serialize_tensor_table(const TensorTable& table) {
    std::string out;
    out.append(kTableMagic, 4);
    put_u8(out, kFormatVersion);
    put_string(out, table.meta);
    put_u32(out, static_cast<std::uint32_t>(table.entries.size()));
    for (const auto& [name, tensor] : table.entries) {
        put_string(out, name);
        put_u8(out, static_cast<std::uint8_t>(tensor.rank()));
        for (int d : tensor.shape()) put_i32(out, d);
        for (std::int64_t i = 0; i < tensor.size(); ++i) {
            if (!std::isfinite(tensor[i]))
                throw std::invalid_argument("non-finite value in tensor " + name);
            put_f64(out, tensor[i]);
        }
    }
    return out;
}

TensorTable deserialize_tensor_table(std::string_view bytes) {
    Cursor c{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};
    check_magic(c, kTableMagic);
    check_version(c);

    TensorTable table;
    table.meta = c.str("metadata");
    const std::uint32_t count = c.u32("entry count");
    table.entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = c.str("entry name");
        const std::size_t at = c.off;
        const std::uint8_t rank = c.u8("rank");
        if (rank == 0 || rank > 8) throw ParseError(at, "tensor rank out of range");
        std::vector<int> shape(rank);
        std::int64_t numel = 1;
        for (int d = 0; d < rank; ++d) {
            shape[d] = c.i32("dimension");
            if (shape[d] <= 0) throw ParseError(at, "non-positive tensor dimension");
            numel *= shape[d];
            if (numel > (std::int64_t{1} << 32)) throw ParseError(at, "tensor too large");
        }
        std::vector<double> data(numel);
        for (std::int64_t t = 0; t < numel; ++t) {
            data[t] = c.f64("tensor data");
            if (!std::isfinite(data[t])) throw ParseError(at, "non-finite value in tensor " + name);
        }
        table.entries.emplace_back(std::move(name), Tensor(shape, std::move(data)));
    }
    if (c.off != c.size) throw ParseError(c.off, "trailing bytes after tensor table");
    return table;
}

void save_tensor_table(const std::filesystem::path& path, const TensorTable& table) {
    write_file(path, serialize_tensor_table(table));
}

TensorTable load_tensor_table(const std::filesystem::path& path) {
    try {
        return deserialize_tensor_table(read_file(path));
    } catch (const ParseError& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

namespace {

nlohmann::json layer_to_json(const LayerSpec& l) {
    nlohmann::json j;
    j["kind"] = layer_kind_name(l.kind);
    switch (l.kind) {
        case LayerKind::dense:
            j["in"] = l.in_features;
            j["out"] = l.out_features;
            break;
        case LayerKind::conv2d:
            j["in_c"] = l.in_channels;
            j["out_c"] = l.out_channels;
            j["kernel"] = l.kernel;
            j["stride"] = l.stride;
            j["padding"] = l.padding;
            break;
        case LayerKind::maxpool2d:
            j["pool"] = l.pool;
            j["stride"] = l.pool_stride;
            break;
        case LayerKind::relu:
        case LayerKind::flatten:
            break;
    }
    return j;
}

LayerSpec layer_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "dense") return LayerSpec::make_dense(j.at("in"), j.at("out"));
    if (kind == "conv2d")
        return LayerSpec::make_conv2d(j.at("in_c"), j.at("out_c"), j.at("kernel"), j.at("stride"),
                                      j.at("padding"));
    if (kind == "maxpool2d") return LayerSpec::make_maxpool2d(j.at("pool"), j.at("stride"));
    if (kind == "relu") return LayerSpec::make_relu();
    if (kind == "flatten") return LayerSpec::make_flatten();
    throw std::invalid_argument("unknown layer kind in model file: " + kind);
}

}  // namespace

void save_target_model(const std::filesystem::path& path, const TargetModel& model) {
    nlohmann::json meta;
    meta["kind"] = "target_model";
    meta["model_id"] = model.model_id;
    meta["input_shape"] = model.input_shape;
    meta["class_count"] = model.class_count;
    nlohmann::json layers = nlohmann::json::array();
    for (const LayerSpec& l : model.layers) layers.push_back(layer_to_json(l));
    meta["layers"] = std::move(layers);

    TensorTable table;
    table.meta = meta.dump();
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        if (!model.layers[i].has_params()) continue;
        const int slot = model.param_index[i];
        table.entries.emplace_back("layer" + std::to_string(i) + ".w", model.params[slot]);
        table.entries.emplace_back("layer" + std::to_string(i) + ".b", model.params[slot + 1]);
    }
    save_tensor_table(path, table);
}

TargetModel load_target_model(const std::filesystem::path& path) {
    TensorTable table = load_tensor_table(path);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(table.meta);
        if (meta.at("kind") != "target_model")
            throw std::runtime_error("not a target model file");
        TargetModel model;
        model.model_id = meta.at("model_id").get<std::string>();
        model.input_shape = meta.at("input_shape").get<std::vector<int>>();
        model.class_count = meta.at("class_count").get<int>();
        for (const auto& j : meta.at("layers")) model.layers.push_back(layer_from_json(j));
        for (auto& [name, tensor] : table.entries) model.params.push_back(std::move(tensor));
        model.rebuild_param_index();
        layer_output_shapes(model);
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": bad model metadata: " + e.what());
    }
}

void save_labeled_dataset(const std::filesystem::path& path, const LabeledDataset& data) {
    if (data.inputs.size() != data.labels.size() || data.inputs.size() != data.sample_ids.size())
        throw std::invalid_argument("dataset field lengths disagree");
    nlohmann::json meta;
    meta["kind"] = "labeled_dataset";
    meta["labels"] = data.labels;

    TensorTable table;
    table.meta = meta.dump();
    for (std::size_t i = 0; i < data.size(); ++i)
        table.entries.emplace_back(data.sample_ids[i], data.inputs[i]);
    save_tensor_table(path, table);
}

LabeledDataset load_labeled_dataset(const std::filesystem::path& path) {
    TensorTable table = load_tensor_table(path);
    try {
        nlohmann::json meta = nlohmann::json::parse(table.meta);
        if (meta.at("kind") != "labeled_dataset")
            throw std::runtime_error("not a dataset file");
        LabeledDataset data;
        data.labels = meta.at("labels").get<std::vector<int>>();
        if (data.labels.size() != table.entries.size())
            throw std::runtime_error("label count does not match tensor count");
        for (auto& [name, tensor] : table.entries) {
            data.sample_ids.push_back(name);
            data.inputs.push_back(std::move(tensor));
        }
        return data;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": bad dataset metadata: " + e.what());
    }
}

namespace {

const char* kManifestHeader = "#ipg-manifest v1";
const char* kManifestFields =
    "#fields path model_id sample_id input_label graph_label attack_kind split config_hash";

bool known_split(const std::string& s) { return s == "train" || s == "val" || s == "test"; }

void check_manifest_field(const std::string& value, const char* what) {
    if (value.empty()) throw std::invalid_argument(std::string("empty manifest field: ") + what);
    if (value.find_first_of("\t\r\n") != std::string::npos)
        throw std::invalid_argument(std::string("manifest field contains control characters: ") +
                                    what);
}

std::pair<std::string, std::string> split_kv(const std::string& token, std::size_t line) {
    const std::size_t eq = token.find('=');
    if (eq == std::string::npos) throw ParseError(line, "expected key=value, got " + token);
    return {token.substr(0, eq), token.substr(eq + 1)};
}

}  // namespace

Manifest build_dataset(std::vector<ManifestRecord> records, const std::vector<double>& ratios,
                       std::uint64_t seed) {
    if (records.empty()) throw std::invalid_argument("no records to split");
    if (ratios.size() != 2 && ratios.size() != 3)
        throw std::invalid_argument("ratios must have 2 (train/test) or 3 (train/val/test) parts");
    double sum = 0.0;
    for (double r : ratios) {
        if (r < 0.0) throw std::invalid_argument("negative split ratio");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split ratios must sum to 1");

    std::set<std::pair<std::string, std::string>> keys;
    std::set<std::string> bases;
    for (const ManifestRecord& r : records) {
        if (!keys.emplace(r.sample_id, r.attack_kind).second)
            throw std::invalid_argument("duplicate graph record: sample " + r.sample_id +
                                        ", attack " + r.attack_kind);
        bases.insert(base_sample_id(r.sample_id));
    }

    std::vector<std::string> ids(bases.begin(), bases.end());
    Rng rng(mix_seed(seed, "split-assign"));
    rng.shuffle(ids);

    const std::vector<std::string> names =
        ratios.size() == 2 ? std::vector<std::string>{"train", "test"}
                           : std::vector<std::string>{"train", "val", "test"};
    std::unordered_map<std::string, std::string> split_of;
    split_of.reserve(ids.size());
    std::size_t begin = 0;
    double cum = 0.0;
    for (std::size_t k = 0; k < names.size(); ++k) {
        cum += ratios[k];
        std::size_t end = k + 1 == names.size()
                              ? ids.size()
                              : static_cast<std::size_t>(
                                    std::llround(cum * static_cast<double>(ids.size())));
        end = std::min(end, ids.size());
        for (std::size_t i = begin; i < end; ++i) split_of[ids[i]] = names[k];
        begin = end;
    }

    for (ManifestRecord& r : records) r.split = split_of.at(base_sample_id(r.sample_id));
    std::sort(records.begin(), records.end(), [](const ManifestRecord& a, const ManifestRecord& b) {
        return std::tie(a.sample_id, a.attack_kind) < std::tie(b.sample_id, b.attack_kind);
    });

    Manifest m;
    m.seed = seed;
    m.records = std::move(records);
    return m;
}

std::vector<std::string> validate_splits(const Manifest& manifest) {
    std::map<std::string, std::set<std::string>> splits_of;
    for (const ManifestRecord& r : manifest.records)
        splits_of[base_sample_id(r.sample_id)].insert(r.split);
    std::vector<std::string> violations;
    for (const auto& [base, splits] : splits_of)
        if (splits.size() > 1) violations.push_back(base);
    return violations;
}

DatasetStats compute_stats(const Manifest& manifest, const std::filesystem::path& base_dir) {
    if (manifest.records.empty()) throw std::invalid_argument("manifest has no graphs");

    std::vector<std::string> missing;
    for (const ManifestRecord& r : manifest.records) {
        if (!std::filesystem::exists(base_dir / r.path)) missing.push_back(r.path);
    }
    if (!missing.empty()) {
        std::string msg = "missing graph files:";
        for (const std::string& p : missing) msg += " " + p;
        throw std::runtime_error(msg);
    }

    DatasetStats stats;
    stats.graph_count = static_cast<std::int64_t>(manifest.records.size());
    std::vector<std::int64_t> sizes;
    sizes.reserve(manifest.records.size());
    for (const ManifestRecord& r : manifest.records) {
        const std::string bytes = read_file(base_dir / r.path);
        InferenceProvenanceGraph g;
        try {
            g = deserialize_ipg(bytes);
        } catch (const ParseError& e) {
            throw std::runtime_error(r.path + ": " + e.what());
        }
        sizes.push_back(static_cast<std::int64_t>(bytes.size()));
        stats.avg_nodes += static_cast<double>(g.nodes.size());
        stats.avg_edges += static_cast<double>(g.edges.size());
        double sparsity = 0.0;
        for (const IPGNode& n : g.nodes) sparsity += n.sparsity;
        if (!g.nodes.empty()) sparsity /= static_cast<double>(g.nodes.size());
        stats.avg_sparsity += sparsity;
    }
    const double n = static_cast<double>(stats.graph_count);
    stats.avg_nodes /= n;
    stats.avg_edges /= n;
    stats.avg_sparsity /= n;
    std::sort(sizes.begin(), sizes.end());
    stats.min_bytes = sizes.front();
    stats.max_bytes = sizes.back();
    stats.median_bytes = sizes.size() % 2 == 1
                             ? sizes[sizes.size() / 2]
                             : (sizes[sizes.size() / 2 - 1] + sizes[sizes.size() / 2]) / 2;
    return stats;
}

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
    std::string out;
    out += kManifestHeader;
    out += "\n#seed " + std::to_string(manifest.seed) + "\n";
    if (manifest.stats) {
        const DatasetStats& s = *manifest.stats;
        out += "#stats graphs=" + std::to_string(s.graph_count) +
               " avg_nodes=" + format_double(s.avg_nodes) +
               " avg_edges=" + format_double(s.avg_edges) +
               " avg_sparsity=" + format_double(s.avg_sparsity) +
               " min_bytes=" + std::to_string(s.min_bytes) +
               " median_bytes=" + std::to_string(s.median_bytes) +
               " max_bytes=" + std::to_string(s.max_bytes) +
               " node_feature_dim=" + std::to_string(s.node_feature_dim) +
               " edge_attr_dim=" + std::to_string(s.edge_attr_dim) + "\n";
    }
    out += kManifestFields;
    out += "\n";

    std::vector<const ManifestRecord*> ordered;
    ordered.reserve(manifest.records.size());
    for (const ManifestRecord& r : manifest.records) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(), [](const ManifestRecord* a, const ManifestRecord* b) {
        return std::tie(a->sample_id, a->attack_kind) < std::tie(b->sample_id, b->attack_kind);
    });

    for (const ManifestRecord* r : ordered) {
        check_manifest_field(r->path, "path");
        if (std::filesystem::path(r->path).is_absolute())
            throw std::invalid_argument("manifest paths must be relative: " + r->path);
        check_manifest_field(r->model_id, "model_id");
        check_manifest_field(r->sample_id, "sample_id");
        check_manifest_field(r->attack_kind, "attack_kind");
        check_manifest_field(r->config_hash, "config_hash");
        if (!known_split(r->split))
            throw std::invalid_argument("unknown split '" + r->split + "' for " + r->sample_id);
        out += r->path;
        out += '\t';
        out += r->model_id;
        out += '\t';
        out += r->sample_id;
        out += '\t';
        out += std::to_string(r->input_label);
        out += '\t';
        out += std::to_string(r->graph_label);
        out += '\t';
        out += r->attack_kind;
        out += '\t';
        out += r->split;
        out += '\t';
        out += r->config_hash;
        out += '\n';
    }
    write_file(path, out);
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    Manifest manifest;
    std::string line;
    std::size_t lineno = 0;

    auto next_line = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++lineno;
        return true;
    };

    if (!next_line() || line != kManifestHeader)
        throw ParseError(1, "expected manifest header '" + std::string(kManifestHeader) + "'");
    if (!next_line() || line.rfind("#seed ", 0) != 0)
        throw ParseError(lineno ? lineno : 2, "expected '#seed N' line");
    try {
        manifest.seed = std::stoull(line.substr(6));
    } catch (const std::exception&) {
        throw ParseError(lineno, "bad seed value");
    }

    if (!next_line()) throw ParseError(lineno, "manifest ends before field declaration");
    if (line.rfind("#stats ", 0) == 0) {
        DatasetStats s;
        std::istringstream tokens(line.substr(7));
        std::string token;
        while (tokens >> token) {
            auto [key, value] = split_kv(token, lineno);
            try {
                if (key == "graphs") s.graph_count = std::stoll(value);
                else if (key == "avg_nodes") s.avg_nodes = std::stod(value);
                else if (key == "avg_edges") s.avg_edges = std::stod(value);
                else if (key == "avg_sparsity") s.avg_sparsity = std::stod(value);
                else if (key == "min_bytes") s.min_bytes = std::stoll(value);
                else if (key == "median_bytes") s.median_bytes = std::stoll(value);
                else if (key == "max_bytes") s.max_bytes = std::stoll(value);
                else if (key == "node_feature_dim") s.node_feature_dim = std::stoi(value);
                else if (key == "edge_attr_dim") s.edge_attr_dim = std::stoi(value);
                else throw ParseError(lineno, "unknown stats key " + key);
            } catch (const ParseError&) {
                throw;
            } catch (const std::exception&) {
                throw ParseError(lineno, "bad stats value for " + key);
            }
        }
        manifest.stats = s;
        if (!next_line()) throw ParseError(lineno, "manifest ends before field declaration");
    }
    if (line != kManifestFields)
        throw ParseError(lineno, "expected field declaration '" + std::string(kManifestFields) + "'");

    while (next_line()) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (fields.size() != 8)
            throw ParseError(lineno, "expected 8 tab-separated fields, got " +
                                         std::to_string(fields.size()));
        ManifestRecord r;
        r.path = fields[0];
        r.model_id = fields[1];
        r.sample_id = fields[2];
        try {
            r.input_label = std::stoi(fields[3]);
            r.graph_label = std::stoi(fields[4]);
        } catch (const std::exception&) {
            throw ParseError(lineno, "bad label field");
        }
        if (r.graph_label != 0 && r.graph_label != 1)
            throw ParseError(lineno, "graph label must be 0 or 1");
        r.attack_kind = fields[5];
        r.split = fields[6];
        if (!known_split(r.split)) throw ParseError(lineno, "unknown split '" + r.split + "'");
        r.config_hash = fields[7];
        manifest.records.push_back(std::move(r));
    }
    return manifest;
}

std::vector<const ManifestRecord*> split_records(const Manifest& manifest,
                                                 const std::string& split) {
    if (!known_split(split))
        throw std::invalid_argument("unknown split '" + split + "' (train/val/test)");
    std::vector<const ManifestRecord*> out;
    for (const ManifestRecord& r : manifest.records)
        if (r.split == split) out.push_back(&r);
    return out;
}

}  // namespace ipg
