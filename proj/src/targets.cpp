#include "ipg/targets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "ipg/rng.hpp"

namespace ipg {

void check_dataset(const LabeledDataset& data, int class_count) {
    if (data.inputs.size() != data.labels.size() || data.inputs.size() != data.sample_ids.size())
        throw std::invalid_argument("dataset field lengths disagree");
    std::unordered_set<std::string> seen;
    seen.reserve(data.sample_ids.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!seen.insert(data.sample_ids[i]).second)
            throw std::invalid_argument("duplicate sample_id: " + data.sample_ids[i]);
        if (data.labels[i] < 0 || data.labels[i] >= class_count)
            throw std::invalid_argument("label " + std::to_string(data.labels[i]) +
                                        " out of range at sample " + data.sample_ids[i]);
        const Tensor& x = data.inputs[i];
        for (std::int64_t t = 0; t < x.size(); ++t)
            if (!(x[t] >= 0.0 && x[t] <= 1.0))
                throw std::invalid_argument("input value " + std::to_string(x[t]) +
                                            " outside [0,1] at sample " + data.sample_ids[i]);
    }
}

bool is_binary_dataset(const LabeledDataset& data) {
    for (const Tensor& x : data.inputs)
        for (std::int64_t t = 0; t < x.size(); ++t)
            if (x[t] != 0.0 && x[t] != 1.0) return false;
    return true;
}

namespace {

Tensor init_tensor(const std::vector<int>& shape, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t(shape);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

}  // namespace

TargetModel build_mlp(const std::string& model_id, int input_dim,
                      const std::vector<int>& hidden_dims, int class_count, std::uint64_t seed) {
    if (input_dim <= 0 || class_count <= 0)
        throw std::invalid_argument("build_mlp: dims must be positive");
    for (int h : hidden_dims)
        if (h <= 0) throw std::invalid_argument("build_mlp: hidden dims must be positive");

    TargetModel m;
    m.model_id = model_id;
    m.input_shape = {input_dim};
    m.class_count = class_count;

    Rng rng(mix_seed(seed, "init:" + model_id));
    int width = input_dim;
    for (int h : hidden_dims) {
        m.layers.push_back(LayerSpec::make_dense(width, h));
        m.params.push_back(init_tensor({h, width}, width, rng));
        m.params.push_back(init_tensor({h}, width, rng));
        m.layers.push_back(LayerSpec::make_relu());
        width = h;
    }
    m.layers.push_back(LayerSpec::make_dense(width, class_count));
    m.params.push_back(init_tensor({class_count, width}, width, rng));
    m.params.push_back(init_tensor({class_count}, width, rng));
    m.rebuild_param_index();
    layer_output_shapes(m);
    return m;
}

TargetModel build_cnn(const std::string& model_id, const std::vector<int>& input_shape,
                      const std::vector<int>& channel_plan, int class_count, std::uint64_t seed) {
    if (input_shape.size() != 3)
        throw std::invalid_argument("build_cnn: input shape must be (channels, height, width)");
    if (class_count <= 0) throw std::invalid_argument("build_cnn: class count must be positive");
    if (channel_plan.empty()) throw std::invalid_argument("build_cnn: channel plan empty");

    TargetModel m;
    m.model_id = model_id;
    m.input_shape = input_shape;
    m.class_count = class_count;

    constexpr int kKernel = 3;
    Rng rng(mix_seed(seed, "init:" + model_id));
    int channels = input_shape[0];
    for (int out_c : channel_plan) {
        if (out_c <= 0) throw std::invalid_argument("build_cnn: channel counts must be positive");
        m.layers.push_back(LayerSpec::make_conv2d(channels, out_c, kKernel, 1, 0));
        const int fan_in = channels * kKernel * kKernel;
        m.params.push_back(init_tensor({out_c, channels, kKernel, kKernel}, fan_in, rng));
        m.params.push_back(init_tensor({out_c}, fan_in, rng));
        m.layers.push_back(LayerSpec::make_relu());
        m.layers.push_back(LayerSpec::make_maxpool2d(2, 2));
        channels = out_c;
    }
    m.layers.push_back(LayerSpec::make_flatten());
    m.rebuild_param_index();

    // Validates every spatial reduction and yields the flatten width for the head.
    TargetModel probe = m;
    std::vector<std::vector<int>> shapes = layer_output_shapes(probe);
    const int flat = shapes.back()[0];

    m.layers.push_back(LayerSpec::make_dense(flat, class_count));
    m.params.push_back(init_tensor({class_count, flat}, flat, rng));
    m.params.push_back(init_tensor({class_count}, flat, rng));
    m.rebuild_param_index();
    layer_output_shapes(m);
    return m;
}

Prediction predict(const TargetModel& model, const Tensor& input) {
    ActivationTrace trace = forward(model, input);
    Prediction p;
    p.probabilities = softmax(trace.logits());
    // max_element returns the first maximum, so ties break toward the lowest class.
    const double* begin = p.probabilities.data();
    p.label = static_cast<int>(std::max_element(begin, begin + p.probabilities.size()) - begin);
    return p;
}

double accuracy(const TargetModel& model, const LabeledDataset& data) {
    if (data.empty()) throw std::invalid_argument("accuracy: empty dataset");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (predict(model, data.inputs[i]).label == data.labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainHistory train_target(TargetModel& model, const LabeledDataset& train,
                          const LabeledDataset& val, const TrainConfig& cfg) {
    check_dataset(train, model.class_count);
    check_dataset(val, model.class_count);
    if (train.empty() || val.empty())
        throw std::invalid_argument("train_target: datasets must be non-empty");
    if (cfg.epochs < 0 || cfg.batch_size <= 0 || cfg.learning_rate <= 0.0)
        throw std::invalid_argument("train_target: bad config");

    TrainHistory history;
    AdamState adam = AdamState::init(model.params);
    Rng shuffle_rng(mix_seed(cfg.seed, "train_target:shuffle"));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::vector<Tensor> grads;
            grads.reserve(model.params.size());
            for (const Tensor& p : model.params) grads.emplace_back(p.shape());

            for (std::size_t i = start; i < stop; ++i) {
                const Tensor& x = train.inputs[order[i]];
                const int y = train.labels[order[i]];
                ActivationTrace trace = forward(model, x);
                loss_sum += cross_entropy(trace.logits(), y);
                Tensor dlogits = softmax(trace.logits());
                dlogits[y] -= 1.0;
                BackwardResult back = backward(model, x, trace, dlogits);
                for (std::size_t g = 0; g < grads.size(); ++g)
                    for (std::int64_t t = 0; t < grads[g].size(); ++t)
                        grads[g][t] += back.dparams[g][t];
            }
            const double scale = 1.0 / static_cast<double>(stop - start);
            for (Tensor& g : grads)
                for (std::int64_t t = 0; t < g.size(); ++t) g[t] *= scale;
            adam_step(model.params, grads, adam, cfg.learning_rate);
        }

        const double epoch_loss = loss_sum / static_cast<double>(train.size());
        if (!std::isfinite(epoch_loss))
            throw std::runtime_error("train_target: loss diverged at epoch " +
                                     std::to_string(epoch));
        history.train_loss.push_back(epoch_loss);
        history.train_accuracy.push_back(accuracy(model, train));
        history.val_accuracy.push_back(accuracy(model, val));
    }
    return history;
}

namespace {

std::string indexed_id(const std::string& prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "-%05d", i);
    return prefix + buf;
}

LabeledDataset blob_samples(int count, const std::vector<int>& shape, int class_count,
                            double spread, std::uint64_t seed, const std::string& id_prefix) {
    if (count <= 0 || class_count <= 0) throw std::invalid_argument("bad blob dataset request");
    Rng rng(mix_seed(seed, "blobs:" + id_prefix));
    const std::int64_t dim = Tensor::numel(shape);

    std::vector<std::vector<double>> centers(class_count, std::vector<double>(dim));
    for (auto& c : centers)
        for (double& v : c) v = rng.uniform(0.2, 0.8);

    LabeledDataset data;
    data.inputs.reserve(count);
    for (int i = 0; i < count; ++i) {
        const int y = i % class_count;
        Tensor x(shape);
        for (std::int64_t t = 0; t < dim; ++t)
            x[t] = std::clamp(centers[y][t] + spread * rng.gaussian(), 0.0, 1.0);
        data.inputs.push_back(std::move(x));
        data.labels.push_back(y);
        data.sample_ids.push_back(indexed_id(id_prefix, i));
    }
    return data;
}

}  // namespace

LabeledDataset make_blobs(int count, int features, int class_count, double spread,
                          std::uint64_t seed, const std::string& id_prefix) {
    return blob_samples(count, {features}, class_count, spread, seed, id_prefix);
}

LabeledDataset make_blob_images(int count, int channels, int height, int width, int class_count,
                                double spread, std::uint64_t seed, const std::string& id_prefix) {
    return blob_samples(count, {channels, height, width}, class_count, spread, seed, id_prefix);
}

LabeledDataset make_binary_features(int count, int features, int class_count, double flip_rate,
                                    std::uint64_t seed, const std::string& id_prefix) {
    if (count <= 0 || features <= 0 || class_count <= 0)
        throw std::invalid_argument("bad binary dataset request");
    if (flip_rate < 0.0 || flip_rate > 1.0)
        throw std::invalid_argument("flip_rate must lie in [0,1]");
    Rng rng(mix_seed(seed, "binary:" + id_prefix));

    std::vector<std::vector<double>> prototypes(class_count, std::vector<double>(features));
    for (auto& proto : prototypes)
        for (double& v : proto) v = rng.bernoulli(0.5) ? 1.0 : 0.0;

    LabeledDataset data;
    data.inputs.reserve(count);
    for (int i = 0; i < count; ++i) {
        const int y = i % class_count;
        Tensor x({features});
        for (int t = 0; t < features; ++t) {
            const bool flip = rng.bernoulli(flip_rate);
            x[t] = flip ? 1.0 - prototypes[y][t] : prototypes[y][t];
        }
        data.inputs.push_back(std::move(x));
        data.labels.push_back(y);
        data.sample_ids.push_back(indexed_id(id_prefix, i));
    }
    return data;
}

LabeledDataset slice_dataset(const LabeledDataset& data, std::size_t begin, std::size_t end) {
    if (begin > end || end > data.size())
        throw std::invalid_argument("dataset slice out of range");
    LabeledDataset out;
    out.inputs.assign(data.inputs.begin() + static_cast<std::ptrdiff_t>(begin),
                      data.inputs.begin() + static_cast<std::ptrdiff_t>(end));
    out.labels.assign(data.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                      data.labels.begin() + static_cast<std::ptrdiff_t>(end));
    out.sample_ids.assign(data.sample_ids.begin() + static_cast<std::ptrdiff_t>(begin),
                          data.sample_ids.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

}  // namespace ipg
