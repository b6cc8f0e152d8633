#include "ipg/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ipg {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool2d: return "maxpool2d";
        case LayerKind::flatten: return "flatten";
    }
    return "?";
}

LayerSpec LayerSpec::make_dense(int in, int out) {
    if (in <= 0 || out <= 0) throw std::invalid_argument("dense dims must be positive");
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.in_features = in;
    s.out_features = out;
    return s;
}

LayerSpec LayerSpec::make_conv2d(int in_c, int out_c, int kernel, int stride, int padding) {
    if (in_c <= 0 || out_c <= 0) throw std::invalid_argument("conv2d channels must be positive");
    if (kernel < 1) throw std::invalid_argument("conv2d kernel must be >= 1");
    if (stride < 1) throw std::invalid_argument("conv2d stride must be >= 1");
    if (padding < 0) throw std::invalid_argument("conv2d padding must be >= 0");
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.in_channels = in_c;
    s.out_channels = out_c;
    s.kernel = kernel;
    s.stride = stride;
    s.padding = padding;
    return s;
}

LayerSpec LayerSpec::make_relu() {
    LayerSpec s;
    s.kind = LayerKind::relu;
    return s;
}

LayerSpec LayerSpec::make_maxpool2d(int pool, int stride) {
    if (pool < 1) throw std::invalid_argument("maxpool2d window must be >= 1");
    if (stride < 0) throw std::invalid_argument("maxpool2d stride must be >= 0");
    LayerSpec s;
    s.kind = LayerKind::maxpool2d;
    s.pool = pool;
    s.pool_stride = stride == 0 ? pool : stride;
    return s;
}

LayerSpec LayerSpec::make_flatten() {
    LayerSpec s;
    s.kind = LayerKind::flatten;
    return s;
}

std::int64_t TargetModel::param_count() const {
    std::int64_t n = 0;
    for (const Tensor& p : params) n += p.size();
    return n;
}

void TargetModel::rebuild_param_index() {
    param_index.assign(layers.size(), -1);
    int slot = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].has_params()) {
            param_index[i] = slot;
            slot += 2;
        }
    }
    if (slot != static_cast<int>(params.size())) {
        throw std::invalid_argument("model has " + std::to_string(params.size()) +
                                    " parameter tensors, expected " + std::to_string(slot));
    }
}

namespace {

[[noreturn]] void layer_error(std::size_t index, const LayerSpec& layer, const std::string& what) {
    throw std::invalid_argument("layer " + std::to_string(index) + " (" +
                                layer_kind_name(layer.kind) + "): " + what);
}

std::vector<int> output_shape_of(std::size_t index, const LayerSpec& layer,
                                 const std::vector<int>& in) {
    switch (layer.kind) {
        case LayerKind::dense: {
            if (in.size() != 1 || in[0] != layer.in_features)
                layer_error(index, layer, "expected input shape (" + std::to_string(layer.in_features) +
                                              "), got " + shape_to_string(in));
            return {layer.out_features};
        }
        case LayerKind::conv2d: {
            if (in.size() != 3 || in[0] != layer.in_channels)
                layer_error(index, layer, "expected (channels=" + std::to_string(layer.in_channels) +
                                              ",H,W) input, got " + shape_to_string(in));
            const int h = (in[1] + 2 * layer.padding - layer.kernel) / layer.stride + 1;
            const int w = (in[2] + 2 * layer.padding - layer.kernel) / layer.stride + 1;
            if (in[1] + 2 * layer.padding < layer.kernel || in[2] + 2 * layer.padding < layer.kernel ||
                h < 1 || w < 1)
                layer_error(index, layer, "spatial dims exhausted: input " + shape_to_string(in));
            return {layer.out_channels, h, w};
        }
        case LayerKind::relu:
            return in;
        case LayerKind::maxpool2d: {
            if (in.size() != 3)
                layer_error(index, layer, "expected (C,H,W) input, got " + shape_to_string(in));
            const int h = (in[1] - layer.pool) / layer.pool_stride + 1;
            const int w = (in[2] - layer.pool) / layer.pool_stride + 1;
            if (in[1] < layer.pool || in[2] < layer.pool || h < 1 || w < 1)
                layer_error(index, layer, "spatial dims exhausted: input " + shape_to_string(in));
            return {in[0], h, w};
        }
        case LayerKind::flatten: {
            std::int64_t n = Tensor::numel(in);
            return {static_cast<int>(n)};
        }
    }
    throw std::logic_error("unknown layer kind");
}

void dense_forward(const LayerSpec& l, const Tensor& w, const Tensor& b, const Tensor& x,
                   Tensor& y) {
    const int in = l.in_features, out = l.out_features;
    for (int o = 0; o < out; ++o) {
        double acc = b[o];
        const double* wr = w.data() + static_cast<std::int64_t>(o) * in;
        const double* xr = x.data();
        for (int i = 0; i < in; ++i) acc += wr[i] * xr[i];
        y[o] = acc;
    }
}

void conv2d_forward(const LayerSpec& l, const Tensor& w, const Tensor& b, const Tensor& x,
                    Tensor& y) {
    const int ic = l.in_channels, oc = l.out_channels, k = l.kernel, s = l.stride, p = l.padding;
    const int ih = x.shape()[1], iw = x.shape()[2];
    const int oh = y.shape()[1], ow = y.shape()[2];
    for (int o = 0; o < oc; ++o) {
        for (int i = 0; i < oh; ++i) {
            for (int j = 0; j < ow; ++j) {
                double acc = b[o];
                for (int c = 0; c < ic; ++c) {
                    const double* wr = w.data() + ((static_cast<std::int64_t>(o) * ic + c) * k) * k;
                    const double* xr = x.data() + static_cast<std::int64_t>(c) * ih * iw;
                    for (int u = 0; u < k; ++u) {
                        const int r = i * s + u - p;
                        if (r < 0 || r >= ih) continue;
                        for (int v = 0; v < k; ++v) {
                            const int cidx = j * s + v - p;
                            if (cidx < 0 || cidx >= iw) continue;
                            acc += wr[u * k + v] * xr[r * iw + cidx];
                        }
                    }
                }
                y[(static_cast<std::int64_t>(o) * oh + i) * ow + j] = acc;
            }
        }
    }
}

void maxpool_forward(const LayerSpec& l, const Tensor& x, Tensor& y) {
    const int c = x.shape()[0], ih = x.shape()[1], iw = x.shape()[2];
    const int oh = y.shape()[1], ow = y.shape()[2];
    const int k = l.pool, s = l.pool_stride;
    for (int ch = 0; ch < c; ++ch) {
        const double* xr = x.data() + static_cast<std::int64_t>(ch) * ih * iw;
        for (int i = 0; i < oh; ++i) {
            for (int j = 0; j < ow; ++j) {
                double best = xr[(i * s) * iw + (j * s)];
                for (int u = 0; u < k; ++u)
                    for (int v = 0; v < k; ++v) {
                        double val = xr[(i * s + u) * iw + (j * s + v)];
                        if (val > best) best = val;
                    }
                y[(static_cast<std::int64_t>(ch) * oh + i) * ow + j] = best;
            }
        }
    }
}

}  // namespace

std::vector<std::vector<int>> layer_output_shapes(const TargetModel& m) {
    std::vector<std::vector<int>> shapes;
    shapes.reserve(m.layers.size());
    std::vector<int> cur = m.input_shape;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        cur = output_shape_of(i, m.layers[i], cur);
        shapes.push_back(cur);
    }
    return shapes;
}

ActivationTrace forward(const TargetModel& m, const Tensor& input) {
    if (input.shape() != m.input_shape)
        throw std::invalid_argument("model " + m.model_id + ": input shape " +
                                    shape_to_string(input.shape()) + " does not match declared " +
                                    shape_to_string(m.input_shape));
    if (m.layers.empty()) throw std::invalid_argument("model has no layers");
    ensure_finite(input, "forward input");

    ActivationTrace trace;
    trace.outputs.reserve(m.layers.size());
    const Tensor* cur = &input;
    std::vector<int> cur_shape = m.input_shape;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const LayerSpec& l = m.layers[i];
        std::vector<int> out_shape = output_shape_of(i, l, cur_shape);
        Tensor y(out_shape);
        switch (l.kind) {
            case LayerKind::dense:
                dense_forward(l, m.params[m.param_index[i]], m.params[m.param_index[i] + 1], *cur, y);
                break;
            case LayerKind::conv2d:
                conv2d_forward(l, m.params[m.param_index[i]], m.params[m.param_index[i] + 1], *cur, y);
                break;
            case LayerKind::relu:
                for (std::int64_t t = 0; t < cur->size(); ++t) y[t] = (*cur)[t] > 0.0 ? (*cur)[t] : 0.0;
                break;
            case LayerKind::maxpool2d:
                maxpool_forward(l, *cur, y);
                break;
            case LayerKind::flatten:
                y = Tensor(out_shape, cur->values());
                break;
        }
        if (!y.all_finite())
            throw std::runtime_error("non-finite activation at layer " + std::to_string(i) + " (" +
                                     layer_kind_name(l.kind) + ")");
        trace.outputs.push_back(std::move(y));
        cur = &trace.outputs.back();
        cur_shape = out_shape;
    }
    if (trace.logits().size() != m.class_count)
        throw std::invalid_argument("final layer width " + std::to_string(trace.logits().size()) +
                                    " does not match class count " + std::to_string(m.class_count));
    return trace;
}

Tensor softmax(const Tensor& logits) {
    Tensor out(logits.shape());
    double mx = logits[0];
    for (std::int64_t i = 1; i < logits.size(); ++i) mx = std::max(mx, logits[i]);
    double sum = 0.0;
    for (std::int64_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (std::int64_t i = 0; i < logits.size(); ++i) out[i] /= sum;
    return out;
}

double cross_entropy(const Tensor& logits, int label) {
    if (label < 0 || label >= logits.size())
        throw std::invalid_argument("label " + std::to_string(label) + " out of range for " +
                                    std::to_string(logits.size()) + " classes");
    ensure_finite(logits, "cross_entropy logits");
    double mx = logits[0];
    for (std::int64_t i = 1; i < logits.size(); ++i) mx = std::max(mx, logits[i]);
    double sum = 0.0;
    for (std::int64_t i = 0; i < logits.size(); ++i) sum += std::exp(logits[i] - mx);
    double loss = mx + std::log(sum) - logits[label];
    ensure_finite(loss, "cross_entropy");
    return loss < 0.0 ? 0.0 : loss;
}

namespace {

void dense_backward(const LayerSpec& l, const Tensor& w, const Tensor& x, const Tensor& dy,
                    Tensor& dx, Tensor& dw, Tensor& db) {
    const int in = l.in_features, out = l.out_features;
    for (int o = 0; o < out; ++o) {
        const double g = dy[o];
        db[o] += g;
        const double* wr = w.data() + static_cast<std::int64_t>(o) * in;
        double* dwr = dw.data() + static_cast<std::int64_t>(o) * in;
        for (int i = 0; i < in; ++i) {
            dx[i] += wr[i] * g;
            dwr[i] += x[i] * g;
        }
    }
}

void conv2d_backward(const LayerSpec& l, const Tensor& w, const Tensor& x, const Tensor& dy,
                     Tensor& dx, Tensor& dw, Tensor& db) {
    const int ic = l.in_channels, oc = l.out_channels, k = l.kernel, s = l.stride, p = l.padding;
    const int ih = x.shape()[1], iw = x.shape()[2];
    const int oh = dy.shape()[1], ow = dy.shape()[2];
    for (int o = 0; o < oc; ++o) {
        for (int i = 0; i < oh; ++i) {
            for (int j = 0; j < ow; ++j) {
                const double g = dy[(static_cast<std::int64_t>(o) * oh + i) * ow + j];
                db[o] += g;
                for (int c = 0; c < ic; ++c) {
                    const double* wr = w.data() + ((static_cast<std::int64_t>(o) * ic + c) * k) * k;
                    double* dwr = dw.data() + ((static_cast<std::int64_t>(o) * ic + c) * k) * k;
                    const double* xr = x.data() + static_cast<std::int64_t>(c) * ih * iw;
                    double* dxr = dx.data() + static_cast<std::int64_t>(c) * ih * iw;
                    for (int u = 0; u < k; ++u) {
                        const int r = i * s + u - p;
                        if (r < 0 || r >= ih) continue;
                        for (int v = 0; v < k; ++v) {
                            const int cidx = j * s + v - p;
                            if (cidx < 0 || cidx >= iw) continue;
                            dxr[r * iw + cidx] += wr[u * k + v] * g;
                            dwr[u * k + v] += xr[r * iw + cidx] * g;
                        }
                    }
                }
            }
        }
    }
}

// Gradient routes to the first maximum in row-major window order.
void maxpool_backward(const LayerSpec& l, const Tensor& x, const Tensor& dy, Tensor& dx) {
    const int c = x.shape()[0], ih = x.shape()[1], iw = x.shape()[2];
    const int oh = dy.shape()[1], ow = dy.shape()[2];
    const int k = l.pool, s = l.pool_stride;
    for (int ch = 0; ch < c; ++ch) {
        const double* xr = x.data() + static_cast<std::int64_t>(ch) * ih * iw;
        double* dxr = dx.data() + static_cast<std::int64_t>(ch) * ih * iw;
        for (int i = 0; i < oh; ++i) {
            for (int j = 0; j < ow; ++j) {
                int best_u = 0, best_v = 0;
                double best = xr[(i * s) * iw + (j * s)];
                for (int u = 0; u < k; ++u)
                    for (int v = 0; v < k; ++v) {
                        double val = xr[(i * s + u) * iw + (j * s + v)];
                        if (val > best) {
                            best = val;
                            best_u = u;
                            best_v = v;
                        }
                    }
                dxr[(i * s + best_u) * iw + (j * s + best_v)] +=
                    dy[(static_cast<std::int64_t>(ch) * oh + i) * ow + j];
            }
        }
    }
}

}  // namespace

BackwardResult backward(const TargetModel& m, const Tensor& input, const ActivationTrace& trace,
                        const Tensor& dlogits) {
    BackwardResult res;
    res.dparams.reserve(m.params.size());
    for (const Tensor& p : m.params) res.dparams.emplace_back(p.shape());

    Tensor grad = dlogits;
    for (int i = static_cast<int>(m.layers.size()) - 1; i >= 0; --i) {
        const LayerSpec& l = m.layers[i];
        const Tensor& layer_in = i == 0 ? input : trace.outputs[i - 1];
        Tensor dprev(layer_in.shape());
        switch (l.kind) {
            case LayerKind::dense:
                dense_backward(l, m.params[m.param_index[i]], layer_in, grad, dprev,
                               res.dparams[m.param_index[i]], res.dparams[m.param_index[i] + 1]);
                break;
            case LayerKind::conv2d:
                conv2d_backward(l, m.params[m.param_index[i]], layer_in, grad, dprev,
                                res.dparams[m.param_index[i]], res.dparams[m.param_index[i] + 1]);
                break;
            case LayerKind::relu:
                for (std::int64_t t = 0; t < grad.size(); ++t)
                    dprev[t] = layer_in[t] > 0.0 ? grad[t] : 0.0;
                break;
            case LayerKind::maxpool2d:
                maxpool_backward(l, layer_in, grad, dprev);
                break;
            case LayerKind::flatten:
                dprev = Tensor(layer_in.shape(), grad.values());
                break;
        }
        grad = std::move(dprev);
    }
    ensure_finite(grad, "backward input gradient");
    res.dinput = std::move(grad);
    return res;
}

Tensor grad_input(const TargetModel& m, const Tensor& input, int label) {
    ActivationTrace trace = forward(m, input);
    Tensor dlogits = softmax(trace.logits());
    if (label < 0 || label >= dlogits.size())
        throw std::invalid_argument("label " + std::to_string(label) + " out of range");
    dlogits[label] -= 1.0;
    return backward(m, input, trace, dlogits).dinput;
}

std::vector<Tensor> grad_params(const TargetModel& m,
                                const std::vector<std::pair<Tensor, int>>& batch) {
    if (batch.empty()) throw std::invalid_argument("grad_params: empty batch");
    std::vector<Tensor> acc;
    acc.reserve(m.params.size());
    for (const Tensor& p : m.params) acc.emplace_back(p.shape());
    for (const auto& [x, y] : batch) {
        ActivationTrace trace = forward(m, x);
        Tensor dlogits = softmax(trace.logits());
        if (y < 0 || y >= dlogits.size())
            throw std::invalid_argument("label " + std::to_string(y) + " out of range");
        dlogits[y] -= 1.0;
        BackwardResult res = backward(m, x, trace, dlogits);
        for (std::size_t i = 0; i < acc.size(); ++i)
            for (std::int64_t t = 0; t < acc[i].size(); ++t) acc[i][t] += res.dparams[i][t];
    }
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (Tensor& g : acc) {
        for (std::int64_t t = 0; t < g.size(); ++t) g[t] *= scale;
        ensure_finite(g, "grad_params");
    }
    return acc;
}

AdamState AdamState::init(const std::vector<Tensor>& params) {
    AdamState st;
    st.m.reserve(params.size());
    st.v.reserve(params.size());
    for (const Tensor& p : params) {
        st.m.emplace_back(p.shape());
        st.v.emplace_back(p.shape());
    }
    return st;
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               double lr) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: tensor list sizes disagree");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (!params[i].same_shape(grads[i]) || !params[i].same_shape(state.m[i]))
            throw std::invalid_argument("adam_step: shape mismatch at tensor " + std::to_string(i));

    state.step += 1;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        const Tensor& g = grads[i];
        Tensor& mi = state.m[i];
        Tensor& vi = state.v[i];
        for (std::int64_t t = 0; t < p.size(); ++t) {
            mi[t] = kAdamBeta1 * mi[t] + (1.0 - kAdamBeta1) * g[t];
            vi[t] = kAdamBeta2 * vi[t] + (1.0 - kAdamBeta2) * g[t] * g[t];
            const double mhat = mi[t] / bc1;
            const double vhat = vi[t] / bc2;
            p[t] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
        }
        ensure_finite(p, "adam_step parameters");
    }
}

}  // namespace ipg
