#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ipg/tensor.hpp"

namespace ipg {

enum class LayerKind { dense, conv2d, relu, maxpool2d, flatten };

const char* layer_kind_name(LayerKind k);

struct LayerSpec {
    LayerKind kind = LayerKind::relu;

    // dense
    int in_features = 0;
    int out_features = 0;

    // conv2d
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 0;
    int stride = 1;
    int padding = 0;

    // maxpool2d; pool_stride == 0 means pool_stride = pool
    int pool = 0;
    int pool_stride = 0;

    bool has_params() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }

    static LayerSpec make_dense(int in, int out);
    static LayerSpec make_conv2d(int in_c, int out_c, int kernel, int stride = 1, int padding = 0);
    static LayerSpec make_relu();
    static LayerSpec make_maxpool2d(int pool, int stride = 0);
    static LayerSpec make_flatten();
};

// Ordered layer list plus flat parameter storage. Parametric layer i owns
// params[param_index[i]] (weights) and params[param_index[i] + 1] (bias).
struct TargetModel {
    std::string model_id;
    std::vector<int> input_shape;
    int class_count = 0;
    std::vector<LayerSpec> layers;
    std::vector<Tensor> params;
    std::vector<int> param_index;

    std::int64_t param_count() const;
    void rebuild_param_index();
};

struct ActivationTrace {
    std::vector<Tensor> outputs;  // one entry per layer, execution order
    const Tensor& logits() const { return outputs.back(); }
};

// Output shape of every layer for the model's declared input shape.
// Throws on inconsistent wiring, naming the offending layer.
std::vector<std::vector<int>> layer_output_shapes(const TargetModel& m);

ActivationTrace forward(const TargetModel& m, const Tensor& input);

Tensor softmax(const Tensor& logits);
double cross_entropy(const Tensor& logits, int label);

// d cross_entropy / d input, same shape as input
Tensor grad_input(const TargetModel& m, const Tensor& input, int label);

// Mean-over-batch gradient of cross-entropy w.r.t. every parameter tensor.
std::vector<Tensor> grad_params(const TargetModel& m,
                                const std::vector<std::pair<Tensor, int>>& batch);

struct BackwardResult {
    Tensor dinput;
    std::vector<Tensor> dparams;
};

// Reverse pass from a logits gradient; hand-derived per layer kind.
BackwardResult backward(const TargetModel& m, const Tensor& input,
                        const ActivationTrace& trace, const Tensor& dlogits);

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    long step = 0;

    static AdamState init(const std::vector<Tensor>& params);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
               AdamState& state, double lr);

}  // namespace ipg
