#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "ipg/nn.hpp"
#include "ipg/rng.hpp"
#include "ipg/tensor.hpp"

using namespace ipg;

namespace {

TargetModel make_model(std::vector<int> input_shape, int class_count,
                       std::vector<LayerSpec> layers, std::vector<Tensor> params) {
    TargetModel m;
    m.model_id = "test";
    m.input_shape = std::move(input_shape);
    m.class_count = class_count;
    m.layers = std::move(layers);
    m.params = std::move(params);
    m.rebuild_param_index();
    layer_output_shapes(m);  // wiring check
    return m;
}

TargetModel random_mlp(const std::vector<int>& widths, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<LayerSpec> layers;
    std::vector<Tensor> params;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        layers.push_back(LayerSpec::make_dense(widths[i], widths[i + 1]));
        Tensor w({widths[i + 1], widths[i]}), b({widths[i + 1]});
        for (double& v : w.values()) v = rng.uniform(-1.0, 1.0);
        for (double& v : b.values()) v = rng.uniform(-0.5, 0.5);
        params.push_back(std::move(w));
        params.push_back(std::move(b));
        if (i + 2 < widths.size()) layers.push_back(LayerSpec::make_relu());
    }
    return make_model({widths.front()}, widths.back(), std::move(layers), std::move(params));
}

double fd_grad_input(const TargetModel& m, Tensor x, int label, std::int64_t i,
                     double h = 1e-4) {
    x[i] += h;
    const double up = cross_entropy(forward(m, x).logits(), label);
    x[i] -= 2.0 * h;
    const double dn = cross_entropy(forward(m, x).logits(), label);
    return (up - dn) / (2.0 * h);
}

void check_close(double got, double want) {
    if (std::abs(want) > 1e-6)
        CHECK(std::abs(got - want) <= 1e-4 * std::abs(want));
    else
        CHECK(std::abs(got - want) <= 1e-6);
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rank() == 2);
    CHECK_THROWS(Tensor({2, 0}));
    CHECK_THROWS(Tensor({2}, {1.0, 2.0, 3.0}));
    CHECK_THROWS(ensure_finite(std::nan(""), "test"));
}

TEST_CASE("identity dense layer passes input through") {
    Tensor w({2, 2}, {1.0, 0.0, 0.0, 1.0});
    Tensor b({2}, {0.0, 0.0});
    TargetModel m = make_model({2}, 2, {LayerSpec::make_dense(2, 2)}, {w, b});
    const ActivationTrace trace = forward(m, Tensor({2}, {1.5, -2.0}));
    CHECK(trace.logits()[0] == 1.5);
    CHECK(trace.logits()[1] == -2.0);
}

TEST_CASE("relu clamps negatives to zero") {
    TargetModel m = make_model({3}, 3, {LayerSpec::make_relu()}, {});
    const ActivationTrace trace = forward(m, Tensor({3}, {-1.0, 0.0, 2.0}));
    CHECK(trace.logits()[0] == 0.0);
    CHECK(trace.logits()[1] == 0.0);
    CHECK(trace.logits()[2] == 2.0);
    for (double v : trace.logits().values()) CHECK(v >= 0.0);
}

TEST_CASE("two-layer mlp matches straight-line arithmetic") {
    // W1 = [[0.5, -1.0], [0.25, 0.75]], b1 = [0.1, -0.2]
    // W2 = [[1.0, 2.0], [-0.5, 0.5]],  b2 = [0.0, 0.3], x = [0.4, 0.8]
    Tensor w1({2, 2}, {0.5, -1.0, 0.25, 0.75});
    Tensor b1({2}, {0.1, -0.2});
    Tensor w2({2, 2}, {1.0, 2.0, -0.5, 0.5});
    Tensor b2({2}, {0.0, 0.3});
    TargetModel m = make_model(
        {2}, 2,
        {LayerSpec::make_dense(2, 2), LayerSpec::make_relu(), LayerSpec::make_dense(2, 2)},
        {w1, b1, w2, b2});

    // h = relu(W1 x + b1): pre = (0.5*0.4 - 1.0*0.8 + 0.1, 0.25*0.4 + 0.75*0.8 - 0.2)
    //                          = (-0.5, 0.5) -> h = (0, 0.5)
    // logits = W2 h + b2 = (1.0*0 + 2.0*0.5 + 0.0, -0.5*0 + 0.5*0.5 + 0.3) = (1.0, 0.55)
    const ActivationTrace trace = forward(m, Tensor({2}, {0.4, 0.8}));
    CHECK(trace.logits()[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(trace.logits()[1] == doctest::Approx(0.55).epsilon(1e-12));
}

TEST_CASE("forward is pure") {
    TargetModel m = random_mlp({3, 5, 2}, 99);
    const Tensor x({3}, {0.2, -0.7, 1.1});
    const ActivationTrace a = forward(m, x);
    const ActivationTrace b = forward(m, x);
    for (std::size_t i = 0; i < a.outputs.size(); ++i) CHECK(a.outputs[i] == b.outputs[i]);
}

TEST_CASE("forward errors name the offending layer") {
    TargetModel m = random_mlp({3, 4, 2}, 7);
    CHECK_THROWS_WITH_AS(forward(m, Tensor({4}, {1, 2, 3, 4})),
                         doctest::Contains("input"), std::invalid_argument);
    // NaN fed into the network is a hard error, not silent propagation.
    CHECK_THROWS(forward(m, Tensor({3}, {0.1, std::nan(""), 0.2})));
}

TEST_CASE("cross entropy worked values") {
    CHECK(cross_entropy(Tensor({2}, {0.0, 0.0}), 0) ==
          doctest::Approx(0.69314718055994531).epsilon(1e-12));
    CHECK(cross_entropy(Tensor({2}, {10.0, -10.0}), 0) ==
          doctest::Approx(2.0611536224385579e-9).epsilon(1e-6));
    // logits [1,2,3], label 2: -ln(e^3 / (e^1 + e^2 + e^3)) = ln(1 + e^-1 + e^-2)
    const double want = std::log(1.0 + std::exp(-1.0) + std::exp(-2.0));
    CHECK(cross_entropy(Tensor({3}, {1.0, 2.0, 3.0}), 2) ==
          doctest::Approx(want).epsilon(1e-12));
    CHECK(cross_entropy(Tensor({3}, {1.0, 2.0, 3.0}), 2) >= 0.0);
    CHECK_THROWS(cross_entropy(Tensor({2}, {0.0, 0.0}), 2));
    CHECK_THROWS(cross_entropy(Tensor({2}, {0.0, 0.0}), -1));
}

TEST_CASE("cross entropy is shift invariant") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor logits({4});
        for (double& v : logits.values()) v = rng.uniform(-5.0, 5.0);
        const double c = rng.uniform(-10.0, 10.0);
        Tensor shifted = logits;
        for (double& v : shifted.values()) v += c;
        const int label = rng.below(4);
        CHECK(std::abs(cross_entropy(shifted, label) - cross_entropy(logits, label)) <= 1e-10);
    }
}

TEST_CASE("zero first-layer weights give zero input gradient") {
    Tensor w({2, 3}, std::vector<double>(6, 0.0));
    Tensor b({2}, {0.3, -0.3});
    TargetModel m = make_model({3}, 2, {LayerSpec::make_dense(3, 2)}, {w, b});
    const Tensor g = grad_input(m, Tensor({3}, {0.5, 0.1, -0.4}), 0);
    for (double v : g.values()) CHECK(v == 0.0);
}

TEST_CASE("single dense layer input gradient matches the softmax closed form") {
    // L = -log softmax(Wx + b)[y]; dL/dx = W^T (softmax - onehot)
    Tensor w({2, 2}, {0.8, -0.3, 0.2, 0.6});
    Tensor b({2}, {0.05, -0.1});
    TargetModel m = make_model({2}, 2, {LayerSpec::make_dense(2, 2)}, {w, b});
    const Tensor x({2}, {0.7, -0.2});
    const int y = 1;

    const double z0 = 0.8 * 0.7 + -0.3 * -0.2 + 0.05;
    const double z1 = 0.2 * 0.7 + 0.6 * -0.2 + -0.1;
    const double e0 = std::exp(z0), e1 = std::exp(z1);
    const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
    const double d0 = p0, d1 = p1 - 1.0;  // softmax - onehot(y=1)
    const double want0 = 0.8 * d0 + 0.2 * d1;
    const double want1 = -0.3 * d0 + 0.6 * d1;

    const Tensor g = grad_input(m, x, y);
    CHECK(g[0] == doctest::Approx(want0).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(want1).epsilon(1e-12));
}

TEST_CASE("input gradients match central finite differences") {
    Rng rng(42);
    for (int trial = 0; trial < 5; ++trial) {
        TargetModel m = random_mlp({4, 6, 3}, 100 + trial);
        Tensor x({4});
        for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);
        const int label = rng.below(3);
        const Tensor g = grad_input(m, x, label);
        for (std::int64_t i = 0; i < x.size(); ++i)
            check_close(g[i], fd_grad_input(m, x, label, i));
    }
}

TEST_CASE("parameter gradients match finite differences on a four-parameter model") {
    Tensor w({2, 1}, {0.4, -0.9});
    Tensor b({2}, {0.2, 0.1});
    TargetModel m = make_model({1}, 2, {LayerSpec::make_dense(1, 2)}, {w, b});
    const std::vector<std::pair<Tensor, int>> batch = {{Tensor({1}, {0.6}), 0},
                                                       {Tensor({1}, {-0.3}), 1}};
    const std::vector<Tensor> grads = grad_params(m, batch);
    REQUIRE(grads.size() == 2);

    for (std::size_t p = 0; p < m.params.size(); ++p) {
        for (std::int64_t i = 0; i < m.params[p].size(); ++i) {
            const double h = 1e-4;
            TargetModel probe = m;
            probe.params[p][i] += h;
            double up = 0.0, dn = 0.0;
            for (const auto& [x, y] : batch) up += cross_entropy(forward(probe, x).logits(), y);
            probe.params[p][i] -= 2.0 * h;
            for (const auto& [x, y] : batch) dn += cross_entropy(forward(probe, x).logits(), y);
            const double want = (up - dn) / (2.0 * h * static_cast<double>(batch.size()));
            check_close(grads[p][i], want);
        }
    }
}

TEST_CASE("duplicating a batch sample leaves the mean gradient unchanged") {
    TargetModel m = random_mlp({3, 4, 2}, 55);
    const Tensor x({3}, {0.1, 0.5, -0.2});
    const std::vector<Tensor> once = grad_params(m, {{x, 1}});
    const std::vector<Tensor> twice = grad_params(m, {{x, 1}, {x, 1}});
    for (std::size_t p = 0; p < once.size(); ++p)
        for (std::int64_t i = 0; i < once[p].size(); ++i)
            CHECK(once[p][i] == doctest::Approx(twice[p][i]).epsilon(1e-12));
    CHECK_THROWS(grad_params(m, {}));
}

TEST_CASE("zero-weight output layer puts softmax-minus-onehot in the bias gradient") {
    Tensor w({2, 3}, std::vector<double>(6, 0.0));
    Tensor b({2}, {0.0, 0.0});
    TargetModel m = make_model({3}, 2, {LayerSpec::make_dense(3, 2)}, {w, b});
    const std::vector<Tensor> grads = grad_params(m, {{Tensor({3}, {1.0, -2.0, 0.5}), 0}});
    // Balanced logits -> softmax (0.5, 0.5); label 0 -> (softmax - onehot) = (-0.5, 0.5).
    CHECK(grads[1][0] == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(grads[1][1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("conv and pool gradients match finite differences") {
    Rng rng(77);
    LayerSpec conv = LayerSpec::make_conv2d(1, 2, 2);
    Tensor k({2, 1, 2, 2});
    Tensor kb({2});
    for (double& v : k.values()) v = rng.uniform(-1.0, 1.0);
    for (double& v : kb.values()) v = rng.uniform(-0.2, 0.2);
    // 1x4x4 -> conv 2x3x3 -> relu -> pool 2x1x1... pool(2) on 3x3 -> 2x1x1, flatten 2
    TargetModel m = make_model(
        {1, 4, 4}, 2,
        {conv, LayerSpec::make_relu(), LayerSpec::make_maxpool2d(2), LayerSpec::make_flatten()},
        {k, kb});
    Tensor x({1, 4, 4});
    for (double& v : x.values()) v = rng.uniform(0.0, 1.0);

    const Tensor g = grad_input(m, x, 1);
    for (std::int64_t i = 0; i < x.size(); ++i) check_close(g[i], fd_grad_input(m, x, 1, i));

    const std::vector<Tensor> pg = grad_params(m, {{x, 1}});
    for (std::size_t p = 0; p < m.params.size(); ++p) {
        for (std::int64_t i = 0; i < m.params[p].size(); ++i) {
            const double h = 1e-4;
            TargetModel probe = m;
            probe.params[p][i] += h;
            const double up = cross_entropy(forward(probe, x).logits(), 1);
            probe.params[p][i] -= 2.0 * h;
            const double dn = cross_entropy(forward(probe, x).logits(), 1);
            check_close(pg[p][i], (up - dn) / (2.0 * h));
        }
    }
}

TEST_CASE("maxpool outputs come from their windows") {
    Rng rng(13);
    TargetModel m = make_model({1, 4, 4}, 4,
                               {LayerSpec::make_maxpool2d(2), LayerSpec::make_flatten()}, {});
    Tensor x({1, 4, 4});
    for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);
    const ActivationTrace trace = forward(m, x);
    const Tensor& pooled = trace.outputs[0];
    REQUIRE(pooled.shape() == std::vector<int>{1, 2, 2});
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const double got = pooled[i * 2 + j];
            bool found = false;
            double window_max = -1e300;
            for (int di = 0; di < 2; ++di)
                for (int dj = 0; dj < 2; ++dj) {
                    const double v = x[(2 * i + di) * 4 + (2 * j + dj)];
                    window_max = std::max(window_max, v);
                    if (v == got) found = true;
                }
            CHECK(found);
            CHECK(got == window_max);
        }
}

TEST_CASE("adam first step matches the scalar hand computation") {
    std::vector<Tensor> params = {Tensor({1}, {0.5})};
    const double g = 0.3;
    AdamState state = AdamState::init(params);
    adam_step(params, {Tensor({1}, {g})}, state, 1e-3);
    // m1 = 0.1g, v1 = 0.001g^2; bias-corrected: mhat = g, vhat = g^2
    // update = -lr * g / (|g| + 1e-8)
    const double want = 0.5 - 1e-3 * g / (std::sqrt(g * g) + 1e-8);
    CHECK(params[0][0] == doctest::Approx(want).epsilon(1e-12));
    CHECK(state.step == 1);
}

TEST_CASE("adam from a fresh state takes no step on a zero gradient") {
    std::vector<Tensor> params = {Tensor({2}, {1.0, -2.0})};
    AdamState state = AdamState::init(params);
    adam_step(params, {Tensor({2}, {0.0, 0.0})}, state, 1e-3);
    CHECK(params[0][0] == 1.0);
    CHECK(params[0][1] == -2.0);
    CHECK(state.step == 1);

    // After a real step, momentum persists: a zero gradient still decays moments.
    adam_step(params, {Tensor({2}, {0.5, -0.5})}, state, 1e-3);
    const double m_after = state.m[0][0];
    adam_step(params, {Tensor({2}, {0.0, 0.0})}, state, 1e-3);
    CHECK(std::abs(state.m[0][0]) < std::abs(m_after));
    CHECK(state.step == 3);
}

TEST_CASE("adam moves monotonically against a constant gradient") {
    std::vector<Tensor> params = {Tensor({1}, {1.0})};
    AdamState state = AdamState::init(params);
    double prev = params[0][0];
    for (int i = 0; i < 5; ++i) {
        adam_step(params, {Tensor({1}, {2.0})}, state, 1e-3);
        CHECK(params[0][0] < prev);
        prev = params[0][0];
    }
    CHECK_THROWS(adam_step(params, {Tensor({2}, {0.0, 0.0})}, state, 1e-3));
}
