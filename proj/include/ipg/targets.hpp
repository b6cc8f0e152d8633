#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ipg/nn.hpp"
#include "ipg/tensor.hpp"

namespace ipg {

// A labeled sample set. Image-like inputs live in [0,1]; binary-feature inputs in {0,1}.
struct LabeledDataset {
    std::vector<Tensor> inputs;
    std::vector<int> labels;
    std::vector<std::string> sample_ids;

    std::size_t size() const { return inputs.size(); }
    bool empty() const { return inputs.empty(); }
};

// Throws if lengths disagree, ids repeat, labels fall outside [0, class_count),
// or any value leaves [0,1].
void check_dataset(const LabeledDataset& data, int class_count);

// True when every value of every input is exactly 0.0 or 1.0.
bool is_binary_dataset(const LabeledDataset& data);

struct TrainConfig {
    int epochs = 20;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
};

struct TrainHistory {
    std::vector<double> train_loss;      // mean per-sample loss per epoch
    std::vector<double> train_accuracy;  // measured after each epoch
    std::vector<double> val_accuracy;
};

// Dense-relu alternation ending in a dense layer of width class_count.
// Parameters drawn uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) from the seed.
TargetModel build_mlp(const std::string& model_id, int input_dim,
                      const std::vector<int>& hidden_dims, int class_count, std::uint64_t seed);

// conv(3x3, valid) - relu - maxpool(2x2) blocks per channel_plan entry,
// then flatten and a dense head to class_count.
TargetModel build_cnn(const std::string& model_id, const std::vector<int>& input_shape,
                      const std::vector<int>& channel_plan, int class_count, std::uint64_t seed);

// Adam on mean cross-entropy over seeded shuffled mini-batches (last partial batch kept).
// Throws on non-finite loss, naming the epoch.
TrainHistory train_target(TargetModel& model, const LabeledDataset& train,
                          const LabeledDataset& val, const TrainConfig& cfg);

struct Prediction {
    int label = 0;         // argmax of probabilities; ties -> lowest index
    Tensor probabilities;  // softmax over logits
};

Prediction predict(const TargetModel& model, const Tensor& input);

double accuracy(const TargetModel& model, const LabeledDataset& data);

// Seeded Gaussian blobs around per-class uniform centers, clamped to [0,1].
LabeledDataset make_blobs(int count, int features, int class_count, double spread,
                          std::uint64_t seed, const std::string& id_prefix = "blob");

// Same distribution shaped (channels, height, width) for conv models.
LabeledDataset make_blob_images(int count, int channels, int height, int width, int class_count,
                                double spread, std::uint64_t seed,
                                const std::string& id_prefix = "img");

// Per-class Bernoulli(0.5) prototype bit patterns; each sample flips every bit
// independently with probability flip_rate.
LabeledDataset make_binary_features(int count, int features, int class_count, double flip_rate,
                                    std::uint64_t seed, const std::string& id_prefix = "bin");

// Contiguous sub-range [begin, end), keeping ids. The generators draw their
// class prototypes from the seed, so disjoint train/val/pool sets of one task
// must be cut from a single generated dataset rather than generated twice.
LabeledDataset slice_dataset(const LabeledDataset& data, std::size_t begin, std::size_t end);

}  // namespace ipg
