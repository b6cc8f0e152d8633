#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ipg/targets.hpp"
#include "ipg/tensor.hpp"

namespace ipg {

enum class AttackKind { fgsm, pgd, spsa, square, bitflip };

const char* attack_kind_name(AttackKind k);
AttackKind parse_attack_kind(const std::string& name);  // throws on unknown name

struct AttackConfig {
    AttackKind kind = AttackKind::fgsm;
    double epsilon = 0.3;     // l-inf budget on [0,1] inputs
    int steps = 10;           // pgd iterations
    double step_size = 0.0;   // 0 -> epsilon / 4
    bool random_start = true; // pgd: uniform start inside the epsilon ball
    int query_budget = 2048;  // spsa / square loss-query cap
    int spsa_samples = 32;    // perturbation pairs per spsa iteration
    double spsa_delta = 0.01;
    int k_max = 8;            // bitflip budget
    std::uint64_t seed = 1;
    bool keep_only_successful = true;

    double alpha() const { return step_size > 0.0 ? step_size : epsilon / 4.0; }
};

struct AttackResult {
    Tensor adversarial;
    std::string sample_id;  // the attacked input's id, unsuffixed
    AttackKind kind = AttackKind::fgsm;
    bool success = false;   // model's label changed vs. the original input
    std::int64_t queries_used = 0;
    int iterations = 0;
};

// Loss-query interface handed to black-box attacks; they never see gradients.
// loss() counts against the query budget, label checks do not.
class QueryView {
  public:
    explicit QueryView(const TargetModel& model) : model_(&model) {}
    double loss(const Tensor& x, int label) {
        ++queries_;
        return cross_entropy(forward(*model_, x).logits(), label);
    }
    int predict_label(const Tensor& x) const { return predict(*model_, x).label; }
    std::int64_t queries() const { return queries_; }

  private:
    const TargetModel* model_;
    std::int64_t queries_ = 0;
};

// Clamp v into [0,1] ∩ B_inf(origin, epsilon), then nudge by ulps until the
// *computed* difference |v - origin| compares <= epsilon, so the budget check
// holds under exact floating-point comparison.
void project_linf(const Tensor& origin, double epsilon, Tensor& v);

// Largest computed |x[i] - y[i]|.
double linf_distance(const Tensor& x, const Tensor& y);

AttackResult fgsm(const TargetModel& model, const Tensor& x, int y, double epsilon);

AttackResult pgd(const TargetModel& model, const Tensor& x, int y, double epsilon, int steps,
                 double alpha, std::uint64_t seed, bool random_start = true);

AttackResult spsa(QueryView& view, const Tensor& x, int y, const AttackConfig& cfg);

// One SPSA two-point estimate averaged over `pairs` Rademacher draws.
Tensor spsa_gradient_estimate(const std::function<double(const Tensor&)>& loss, const Tensor& x,
                              double delta, int pairs, std::uint64_t seed);

// Random contiguous-region +-epsilon proposals with greedy loss acceptance.
// Rank-3 inputs perturb a square patch of one channel; rank-1 inputs a
// contiguous interval.
AttackResult square_search(QueryView& view, const Tensor& x, int y, double epsilon,
                           int query_budget, std::uint64_t seed);

// Greedy single-bit flips maximizing loss gain (ties -> lowest index); stops on
// label change, exhausted budget, or when no flip gains. Input must be binary.
AttackResult bit_flip(QueryView& view, const Tensor& x, int y, int k_max);

std::string attacked_sample_id(const std::string& base, AttackKind kind);
// Inverse of attacked_sample_id; returns `id` unchanged when no suffix matches.
std::string base_sample_id(const std::string& id);

struct AttackSet {
    LabeledDataset examples;            // adversarial inputs, labels = original labels
    std::vector<AttackResult> results;  // aligned with examples
    int attempted = 0;                  // correctly-classified inputs attacked
};

// One attack per correctly-classified input, each on its own seeded stream.
// Retains only label-flipping results when cfg.keep_only_successful.
AttackSet generate_attack_set(const TargetModel& model, const LabeledDataset& data,
                              const AttackConfig& cfg);

}  // namespace ipg
