#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "ipg/targets.hpp"

using namespace ipg;

TEST_CASE("mlp builder wires dense-relu stacks with the right parameter count") {
    const TargetModel m = build_mlp("m", 8, {4}, 2, 1);
    CHECK(m.input_shape == std::vector<int>{8});
    CHECK(m.class_count == 2);
    // dense 8->4 (36 params), relu, dense 4->2 (10 params)
    REQUIRE(m.layers.size() == 3);
    CHECK(m.layers[0].kind == LayerKind::dense);
    CHECK(m.layers[1].kind == LayerKind::relu);
    CHECK(m.layers[2].kind == LayerKind::dense);
    CHECK(m.param_count() == 46);
    CHECK(layer_output_shapes(m).back() == std::vector<int>{2});

    const TargetModel deep = build_mlp("d", 10, {8, 6}, 3, 1);
    CHECK(deep.param_count() == (10 * 8 + 8) + (8 * 6 + 6) + (6 * 3 + 3));
    CHECK(deep.layers.size() == 5);
}

TEST_CASE("mlp init is seed-deterministic and bounded by fan-in") {
    const TargetModel a = build_mlp("m", 6, {5}, 2, 42);
    const TargetModel b = build_mlp("m", 6, {5}, 2, 42);
    const TargetModel c = build_mlp("m", 6, {5}, 2, 43);
    REQUIRE(a.params.size() == b.params.size());
    for (std::size_t i = 0; i < a.params.size(); ++i) CHECK(a.params[i] == b.params[i]);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.params.size(); ++i)
        if (!(a.params[i] == c.params[i])) any_diff = true;
    CHECK(any_diff);
    // First dense layer weights drawn uniform within +/- 1/sqrt(6).
    const double bound = 1.0 / std::sqrt(6.0);
    for (double v : a.params[0].values()) CHECK(std::abs(v) <= bound);
}

TEST_CASE("cnn builder produces conv-relu-pool blocks and a dense head") {
    // 1x8x8 -> conv3 valid -> 4x6x6 -> relu -> pool2 -> 4x3x3 -> flatten 36 -> dense 2
    const TargetModel m = build_cnn("c", {1, 8, 8}, {4}, 2, 1);
    const std::vector<std::vector<int>> shapes = layer_output_shapes(m);
    REQUIRE(m.layers.size() == 5);
    CHECK(m.layers[0].kind == LayerKind::conv2d);
    CHECK(m.layers[3].kind == LayerKind::flatten);
    CHECK(shapes[0] == std::vector<int>{4, 6, 6});
    CHECK(shapes[2] == std::vector<int>{4, 3, 3});
    CHECK(shapes[3] == std::vector<int>{36});
    CHECK(shapes[4] == std::vector<int>{2});
    // conv kernel 4x1x3x3 + bias 4, dense 36->2
    CHECK(m.param_count() == (4 * 1 * 3 * 3 + 4) + (36 * 2 + 2));
}

TEST_CASE("blob generator is deterministic with values in range") {
    const LabeledDataset a = make_blobs(40, 6, 3, 0.1, 9);
    const LabeledDataset b = make_blobs(40, 6, 3, 0.1, 9);
    REQUIRE(a.size() == 40);
    CHECK(a.sample_ids[0] == "blob-00000");
    CHECK(a.sample_ids[39] == "blob-00039");
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.inputs[i] == b.inputs[i]);
        CHECK(a.labels[i] == b.labels[i]);
        CHECK(a.labels[i] >= 0);
        CHECK(a.labels[i] < 3);
        for (double v : a.inputs[i].values()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    check_dataset(a, 3);
    // All classes should appear in a sample of 40.
    std::set<int> seen(a.labels.begin(), a.labels.end());
    CHECK(seen.size() == 3);
}

TEST_CASE("blob image generator shapes inputs for conv models") {
    const LabeledDataset d = make_blob_images(10, 2, 5, 5, 2, 0.05, 3);
    REQUIRE(d.size() == 10);
    for (const Tensor& x : d.inputs) CHECK(x.shape() == std::vector<int>{2, 5, 5});
    check_dataset(d, 2);
}

TEST_CASE("binary feature generator emits exact bits") {
    const LabeledDataset d = make_binary_features(60, 12, 2, 0.15, 5);
    REQUIRE(d.size() == 60);
    CHECK(is_binary_dataset(d));
    for (const Tensor& x : d.inputs)
        for (double v : x.values()) CHECK((v == 0.0 || v == 1.0));
    check_dataset(d, 2);

    // flip_rate 0 reproduces the class prototype exactly: all same-class samples equal.
    const LabeledDataset pure = make_binary_features(30, 8, 2, 0.0, 5);
    const Tensor* proto[2] = {nullptr, nullptr};
    for (std::size_t i = 0; i < pure.size(); ++i) {
        const int y = pure.labels[i];
        if (proto[y] == nullptr)
            proto[y] = &pure.inputs[i];
        else
            CHECK(*proto[y] == pure.inputs[i]);
    }
    REQUIRE(proto[0] != nullptr);
    REQUIRE(proto[1] != nullptr);
    CHECK_FALSE(*proto[0] == *proto[1]);
}

TEST_CASE("generators reject nonsense arguments") {
    CHECK_THROWS(make_blobs(0, 6, 3, 0.1, 1));
    CHECK_THROWS(make_blobs(10, 6, 0, 0.1, 1));
    CHECK_THROWS(make_binary_features(10, 8, 2, 1.5, 1));
    CHECK_THROWS(make_binary_features(10, 8, 2, -0.1, 1));
}

TEST_CASE("dataset validation catches structural faults") {
    LabeledDataset d = make_blobs(5, 4, 2, 0.1, 1);
    check_dataset(d, 2);
    LabeledDataset bad_label = d;
    bad_label.labels[0] = 2;
    CHECK_THROWS(check_dataset(bad_label, 2));
    LabeledDataset dup = d;
    dup.sample_ids[1] = dup.sample_ids[0];
    CHECK_THROWS(check_dataset(dup, 2));
    LabeledDataset ragged = d;
    ragged.labels.pop_back();
    CHECK_THROWS(check_dataset(ragged, 2));
    LabeledDataset out_of_range = d;
    out_of_range.inputs[0][0] = 1.5;
    CHECK_THROWS(check_dataset(out_of_range, 2));
}

TEST_CASE("slice keeps ids and contents of a contiguous middle range") {
    const LabeledDataset d = make_blobs(20, 4, 2, 0.1, 7);
    const LabeledDataset s = slice_dataset(d, 5, 12);
    REQUIRE(s.size() == 7);
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(s.sample_ids[i] == d.sample_ids[5 + i]);
        CHECK(s.inputs[i] == d.inputs[5 + i]);
        CHECK(s.labels[i] == d.labels[5 + i]);
    }
    CHECK(slice_dataset(d, 3, 3).empty());
    CHECK_THROWS(slice_dataset(d, 12, 5));
    CHECK_THROWS(slice_dataset(d, 0, 21));
}

TEST_CASE("training drives loss down and accuracy up on an easy task") {
    const LabeledDataset all = make_binary_features(300, 16, 2, 0.05, 21);
    const LabeledDataset train = slice_dataset(all, 0, 240);
    const LabeledDataset val = slice_dataset(all, 240, 300);
    TargetModel m = build_mlp("t", 16, {12}, 2, 21);
    TrainConfig cfg;
    cfg.epochs = 12;
    cfg.seed = 21;
    const TrainHistory h = train_target(m, train, val, cfg);

    REQUIRE(h.train_loss.size() == 12);
    REQUIRE(h.train_accuracy.size() == 12);
    REQUIRE(h.val_accuracy.size() == 12);
    CHECK(h.train_loss.back() < h.train_loss.front());
    CHECK(h.train_accuracy.back() > 0.9);
    CHECK(h.val_accuracy.back() > 0.9);
    CHECK(accuracy(m, val) == h.val_accuracy.back());
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
    const LabeledDataset all = make_blobs(120, 6, 2, 0.15, 4);
    const LabeledDataset train = slice_dataset(all, 0, 100);
    const LabeledDataset val = slice_dataset(all, 100, 120);
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.seed = 9;

    TargetModel a = build_mlp("r", 6, {5}, 2, 4);
    TargetModel b = build_mlp("r", 6, {5}, 2, 4);
    const TrainHistory ha = train_target(a, train, val, cfg);
    const TrainHistory hb = train_target(b, train, val, cfg);
    for (std::size_t i = 0; i < a.params.size(); ++i) CHECK(a.params[i] == b.params[i]);
    CHECK(ha.train_loss == hb.train_loss);

    // A different shuffle seed changes the optimization path.
    TargetModel c = build_mlp("r", 6, {5}, 2, 4);
    TrainConfig other = cfg;
    other.seed = 10;
    train_target(c, train, val, other);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.params.size(); ++i)
        if (!(a.params[i] == c.params[i])) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("prediction reports argmax with a proper probability vector") {
    const LabeledDataset d = make_blobs(8, 5, 3, 0.1, 2);
    const TargetModel m = build_mlp("p", 5, {4}, 3, 2);
    for (const Tensor& x : d.inputs) {
        const Prediction pred = predict(m, x);
        CHECK(pred.label >= 0);
        CHECK(pred.label < 3);
        REQUIRE(pred.probabilities.size() == 3);
        double sum = 0.0;
        for (double p : pred.probabilities.values()) {
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
            sum += p;
            CHECK(p <= pred.probabilities[pred.label]);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("cnn trains end to end on image blobs") {
    const LabeledDataset all = make_blob_images(150, 1, 8, 8, 2, 0.08, 31);
    const LabeledDataset train = slice_dataset(all, 0, 120);
    const LabeledDataset val = slice_dataset(all, 120, 150);
    TargetModel m = build_cnn("cnn", {1, 8, 8}, {4}, 2, 31);
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.learning_rate = 5e-3;
    cfg.seed = 31;
    const TrainHistory h = train_target(m, train, val, cfg);
    CHECK(h.train_loss.back() < h.train_loss.front());
    CHECK(h.val_accuracy.back() >= 0.8);
}
