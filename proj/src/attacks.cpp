#include "ipg/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ipg/rng.hpp"

namespace ipg {

const char* attack_kind_name(AttackKind k) {
    switch (k) {
        case AttackKind::fgsm: return "fgsm";
        case AttackKind::pgd: return "pgd";
        case AttackKind::spsa: return "spsa";
        case AttackKind::square: return "square";
        case AttackKind::bitflip: return "bitflip";
    }
    return "?";
}

AttackKind parse_attack_kind(const std::string& name) {
    for (AttackKind k : {AttackKind::fgsm, AttackKind::pgd, AttackKind::spsa, AttackKind::square,
                         AttackKind::bitflip})
        if (name == attack_kind_name(k)) return k;
    throw std::invalid_argument("unknown attack kind: " + name);
}

double linf_distance(const Tensor& x, const Tensor& y) {
    if (!x.same_shape(y)) throw std::invalid_argument("linf_distance: shape mismatch");
    double worst = 0.0;
    for (std::int64_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
    return worst;
}

void project_linf(const Tensor& origin, double epsilon, Tensor& v) {
    if (!origin.same_shape(v)) throw std::invalid_argument("project_linf: shape mismatch");
    if (epsilon < 0.0) throw std::invalid_argument("project_linf: negative epsilon");
    for (std::int64_t i = 0; i < v.size(); ++i) {
        double val = std::clamp(v[i], 0.0, 1.0);
        val = std::clamp(val, origin[i] - epsilon, origin[i] + epsilon);
        // Rounding in the clamp arithmetic can leave the computed difference a
        // few ulps past epsilon; walk back until the comparison itself holds.
        while (val - origin[i] > epsilon || origin[i] - val > epsilon)
            val = std::nextafter(val, origin[i]);
        v[i] = val;
    }
}

namespace {

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

bool is_binary(const Tensor& x) {
    for (std::int64_t i = 0; i < x.size(); ++i)
        if (x[i] != 0.0 && x[i] != 1.0) return false;
    return true;
}

}  // namespace

AttackResult fgsm(const TargetModel& model, const Tensor& x, int y, double epsilon) {
    const int orig = predict(model, x).label;
    Tensor g = grad_input(model, x, y);
    Tensor adv = x;
    for (std::int64_t i = 0; i < adv.size(); ++i) adv[i] = x[i] + epsilon * sign_of(g[i]);
    project_linf(x, epsilon, adv);

    AttackResult r;
    r.kind = AttackKind::fgsm;
    r.iterations = 1;
    r.success = predict(model, adv).label != orig;
    r.adversarial = std::move(adv);
    return r;
}

AttackResult pgd(const TargetModel& model, const Tensor& x, int y, double epsilon, int steps,
                 double alpha, std::uint64_t seed, bool random_start) {
    const int orig = predict(model, x).label;
    Tensor adv = x;
    if (random_start) {
        Rng rng(seed);
        for (std::int64_t i = 0; i < adv.size(); ++i) adv[i] = x[i] + rng.uniform(-epsilon, epsilon);
        project_linf(x, epsilon, adv);
    }
    for (int s = 0; s < steps; ++s) {
        Tensor g = grad_input(model, adv, y);
        for (std::int64_t i = 0; i < adv.size(); ++i) adv[i] += alpha * sign_of(g[i]);
        project_linf(x, epsilon, adv);
    }

    AttackResult r;
    r.kind = AttackKind::pgd;
    r.iterations = steps;
    r.success = predict(model, adv).label != orig;
    r.adversarial = std::move(adv);
    return r;
}

Tensor spsa_gradient_estimate(const std::function<double(const Tensor&)>& loss, const Tensor& x,
                              double delta, int pairs, std::uint64_t seed) {
    if (pairs <= 0) throw std::invalid_argument("spsa_gradient_estimate: pairs must be positive");
    if (delta <= 0.0) throw std::invalid_argument("spsa_gradient_estimate: delta must be positive");
    Rng rng(seed);
    Tensor estimate(x.shape());
    Tensor probe(x.shape());
    std::vector<double> rademacher(x.size());
    for (int p = 0; p < pairs; ++p) {
        for (std::int64_t i = 0; i < x.size(); ++i) rademacher[i] = rng.sign();
        for (std::int64_t i = 0; i < x.size(); ++i) probe[i] = x[i] + delta * rademacher[i];
        const double lp = loss(probe);
        for (std::int64_t i = 0; i < x.size(); ++i) probe[i] = x[i] - delta * rademacher[i];
        const double lm = loss(probe);
        const double scale = (lp - lm) / (2.0 * delta);
        // Rademacher entries are their own inverses.
        for (std::int64_t i = 0; i < x.size(); ++i) estimate[i] += scale * rademacher[i];
    }
    for (std::int64_t i = 0; i < estimate.size(); ++i)
        estimate[i] /= static_cast<double>(pairs);
    return estimate;
}

AttackResult spsa(QueryView& view, const Tensor& x, int y, const AttackConfig& cfg) {
    if (cfg.spsa_samples <= 0 || cfg.query_budget < 0)
        throw std::invalid_argument("spsa: bad config");
    const int orig = view.predict_label(x);
    const double alpha = cfg.alpha();
    const int max_iterations = cfg.query_budget / (2 * cfg.spsa_samples);
    const std::int64_t base_queries = view.queries();

    Rng rng(mix_seed(cfg.seed, "spsa"));
    Tensor adv = x;
    int iterations = 0;
    for (int it = 0; it < max_iterations; ++it) {
        if (view.predict_label(adv) != orig) break;
        auto query_loss = [&](const Tensor& probe) { return view.loss(probe, y); };
        Tensor g = spsa_gradient_estimate(query_loss, adv, cfg.spsa_delta, cfg.spsa_samples,
                                          rng.next_u64());
        for (std::int64_t i = 0; i < adv.size(); ++i) adv[i] += alpha * sign_of(g[i]);
        project_linf(x, cfg.epsilon, adv);
        ++iterations;
    }

    AttackResult r;
    r.kind = AttackKind::spsa;
    r.iterations = iterations;
    r.queries_used = view.queries() - base_queries;
    r.success = view.predict_label(adv) != orig;
    r.adversarial = std::move(adv);
    return r;
}

AttackResult square_search(QueryView& view, const Tensor& x, int y, double epsilon,
                           int query_budget, std::uint64_t seed) {
    const int orig = view.predict_label(x);
    const std::int64_t base_queries = view.queries();
    AttackResult r;
    r.kind = AttackKind::square;
    r.adversarial = x;
    if (query_budget <= 0) return r;

    Rng rng(mix_seed(seed, "square"));
    double best_loss = view.loss(x, y);
    Tensor candidate(x.shape());
    const bool spatial = x.rank() == 3;
    const int channels = spatial ? x.shape()[0] : 1;
    const int height = spatial ? x.shape()[1] : 1;
    const int width = spatial ? x.shape()[2] : static_cast<int>(x.size());

    while (view.queries() - base_queries < query_budget) {
        candidate = r.adversarial;
        const double bump = rng.sign() * epsilon;
        if (spatial) {
            const int max_side = std::min(height, width);
            const int side = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_side)));
            const int ch = static_cast<int>(rng.below(static_cast<std::uint64_t>(channels)));
            const int row = static_cast<int>(rng.below(static_cast<std::uint64_t>(height - side + 1)));
            const int col = static_cast<int>(rng.below(static_cast<std::uint64_t>(width - side + 1)));
            for (int i = 0; i < side; ++i)
                for (int j = 0; j < side; ++j) {
                    const std::int64_t idx =
                        (static_cast<std::int64_t>(ch) * height + row + i) * width + col + j;
                    candidate[idx] = x[idx] + bump;
                }
        } else {
            const int len = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(width)));
            const int at = static_cast<int>(rng.below(static_cast<std::uint64_t>(width - len + 1)));
            for (int i = 0; i < len; ++i) candidate[at + i] = x[at + i] + bump;
        }
        project_linf(x, epsilon, candidate);
        const double loss = view.loss(candidate, y);
        if (loss > best_loss) {
            best_loss = loss;
            r.adversarial = candidate;
            ++r.iterations;
            if (view.predict_label(r.adversarial) != orig) break;
        }
    }

    r.queries_used = view.queries() - base_queries;
    r.success = view.predict_label(r.adversarial) != orig;
    return r;
}

AttackResult bit_flip(QueryView& view, const Tensor& x, int y, int k_max) {
    if (!is_binary(x)) throw std::invalid_argument("bit_flip: input is not binary");
    if (k_max < 0) throw std::invalid_argument("bit_flip: negative flip budget");
    const int orig = view.predict_label(x);
    const std::int64_t base_queries = view.queries();

    AttackResult r;
    r.kind = AttackKind::bitflip;
    r.adversarial = x;
    double current_loss = k_max > 0 ? view.loss(x, y) : 0.0;

    for (int flip = 0; flip < k_max; ++flip) {
        if (view.predict_label(r.adversarial) != orig) break;
        std::int64_t best_bit = -1;
        double best_loss = current_loss;
        Tensor probe = r.adversarial;
        for (std::int64_t i = 0; i < probe.size(); ++i) {
            probe[i] = 1.0 - probe[i];
            const double loss = view.loss(probe, y);
            if (loss > best_loss) {  // strict: ties keep the earlier (lower) index
                best_loss = loss;
                best_bit = i;
            }
            probe[i] = 1.0 - probe[i];
        }
        if (best_bit < 0) break;  // no flip gains
        r.adversarial[best_bit] = 1.0 - r.adversarial[best_bit];
        current_loss = best_loss;
        ++r.iterations;
    }

    r.queries_used = view.queries() - base_queries;
    r.success = view.predict_label(r.adversarial) != orig;
    return r;
}

std::string attacked_sample_id(const std::string& base, AttackKind kind) {
    return base + "::" + attack_kind_name(kind);
}

std::string base_sample_id(const std::string& id) {
    const std::size_t at = id.rfind("::");
    if (at == std::string::npos) return id;
    const std::string tail = id.substr(at + 2);
    for (AttackKind k : {AttackKind::fgsm, AttackKind::pgd, AttackKind::spsa, AttackKind::square,
                         AttackKind::bitflip})
        if (tail == attack_kind_name(k)) return id.substr(0, at);
    return id;
}

AttackSet generate_attack_set(const TargetModel& model, const LabeledDataset& data,
                              const AttackConfig& cfg) {
    if (data.empty()) throw std::invalid_argument("generate_attack_set: empty dataset");
    if (cfg.epsilon <= 0.0 || cfg.epsilon > 1.0)
        throw std::invalid_argument("generate_attack_set: epsilon must lie in (0,1]");

    AttackSet out;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Tensor& x = data.inputs[i];
        const int y = data.labels[i];
        if (predict(model, x).label != y) continue;
        ++out.attempted;

        const std::uint64_t stream = mix_seed(cfg.seed, data.sample_ids[i]);
        AttackResult result;
        switch (cfg.kind) {
            case AttackKind::fgsm:
                result = fgsm(model, x, y, cfg.epsilon);
                break;
            case AttackKind::pgd:
                result = pgd(model, x, y, cfg.epsilon, cfg.steps, cfg.alpha(), stream,
                             cfg.random_start);
                break;
            case AttackKind::spsa: {
                QueryView view(model);
                AttackConfig per = cfg;
                per.seed = stream;
                result = spsa(view, x, y, per);
                break;
            }
            case AttackKind::square: {
                QueryView view(model);
                result = square_search(view, x, y, cfg.epsilon, cfg.query_budget, stream);
                break;
            }
            case AttackKind::bitflip: {
                QueryView view(model);
                result = bit_flip(view, x, y, cfg.k_max);
                break;
            }
        }
        result.sample_id = data.sample_ids[i];

        if (cfg.keep_only_successful && !result.success) continue;

        if (cfg.kind == AttackKind::bitflip) {
            std::int64_t hamming = 0;
            for (std::int64_t t = 0; t < x.size(); ++t)
                if (result.adversarial[t] != x[t]) ++hamming;
            if (!is_binary(result.adversarial) || hamming > cfg.k_max)
                throw std::runtime_error("bit_flip result violates its flip contract at sample " +
                                         data.sample_ids[i]);
        } else {
            const double dist = linf_distance(result.adversarial, x);
            bool in_range = true;
            for (std::int64_t t = 0; t < result.adversarial.size(); ++t)
                if (result.adversarial[t] < 0.0 || result.adversarial[t] > 1.0) in_range = false;
            if (dist > cfg.epsilon || !in_range)
                throw std::runtime_error("attack result violates its budget at sample " +
                                         data.sample_ids[i]);
        }

        out.examples.inputs.push_back(result.adversarial);
        out.examples.labels.push_back(y);
        out.examples.sample_ids.push_back(attacked_sample_id(data.sample_ids[i], cfg.kind));
        out.results.push_back(std::move(result));
    }
    return out;
}

}  // namespace ipg
