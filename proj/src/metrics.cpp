#include "ipg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ipg {

namespace {

void check_scored(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.empty()) throw std::invalid_argument("no scores given");
    if (scores.size() != labels.size())
        throw std::invalid_argument("scores and labels differ in length");
    for (int y : labels)
        if (y != 0 && y != 1) throw std::invalid_argument("labels must be 0 or 1");
    for (double s : scores)
        if (std::isnan(s)) throw std::invalid_argument("NaN score");
}

std::pair<std::int64_t, std::int64_t> class_counts(const std::vector<int>& labels) {
    std::int64_t pos = 0;
    for (int y : labels) pos += y;
    return {pos, static_cast<std::int64_t>(labels.size()) - pos};
}

void require_both_classes(const std::vector<int>& labels) {
    auto [pos, neg] = class_counts(labels);
    if (pos == 0 || neg == 0)
        throw std::invalid_argument("ranking metrics need both classes present");
}

// Indices sorted by descending score; used by the threshold-sweep metrics.
std::vector<std::size_t> descending_order(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

// (TPR, FPR) at every distinct-score threshold, descending, plus the +inf
// point (0, 0) at the front.
std::vector<std::pair<double, double>> roc_points(const std::vector<double>& scores,
                                                  const std::vector<int>& labels) {
    const auto order = descending_order(scores);
    const auto [pos, neg] = class_counts(labels);
    std::vector<std::pair<double, double>> points{{0.0, 0.0}};
    std::int64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            if (labels[order[i]] == 1) ++tp;
            else ++fp;
            ++i;
        }
        points.emplace_back(static_cast<double>(tp) / static_cast<double>(pos),
                            static_cast<double>(fp) / static_cast<double>(neg));
    }
    return points;
}

}  // namespace

ConfusionMetrics confusion_metrics(const std::vector<double>& scores,
                                   const std::vector<int>& labels, double threshold) {
    check_scored(scores, labels);
    ConfusionMetrics m;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        const bool actual = labels[i] == 1;
        if (predicted && actual) ++m.tp;
        else if (predicted && !actual) ++m.fp;
        else if (!predicted && actual) ++m.fn;
        else ++m.tn;
    }
    const double n = static_cast<double>(scores.size());
    m.accuracy = static_cast<double>(m.tp + m.tn) / n;
    m.precision = m.tp + m.fp > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp)
                                  : 0.0;
    m.recall = m.tp + m.fn > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn)
                               : 0.0;
    m.f1 = m.precision + m.recall > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_scored(scores, labels);
    require_both_classes(labels);

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Average ranks across ties, then the Mann-Whitney U statistic.
    std::vector<double> rank(scores.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) rank[order[k]] = avg;
        i = j;
    }
    const auto [pos, neg] = class_counts(labels);
    double rank_sum = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k)
        if (labels[k] == 1) rank_sum += rank[k];
    const double u = rank_sum - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double pr_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_scored(scores, labels);
    const auto [pos, neg] = class_counts(labels);
    (void)neg;
    if (pos == 0) throw std::invalid_argument("pr_auc needs at least one positive");

    const auto order = descending_order(scores);
    double area = 0.0;
    double prev_recall = 0.0;
    std::int64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            if (labels[order[i]] == 1) ++tp;
            else ++fp;
            ++i;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return area;
}

double tpr_at_fpr(const std::vector<double>& scores, const std::vector<int>& labels,
                  double fpr_budget) {
    check_scored(scores, labels);
    require_both_classes(labels);
    if (fpr_budget < 0.0 || fpr_budget > 1.0)
        throw std::invalid_argument("fpr budget must lie in [0,1]");
    double best = 0.0;
    for (const auto& [tpr, fpr] : roc_points(scores, labels))
        if (fpr <= fpr_budget) best = std::max(best, tpr);
    return best;
}

double fpr_at_tpr(const std::vector<double>& scores, const std::vector<int>& labels,
                  double tpr_target) {
    check_scored(scores, labels);
    require_both_classes(labels);
    if (tpr_target < 0.0 || tpr_target > 1.0)
        throw std::invalid_argument("tpr target must lie in [0,1]");
    double best = 1.0;
    for (const auto& [tpr, fpr] : roc_points(scores, labels))
        if (tpr >= tpr_target) best = std::min(best, fpr);
    return best;
}

MetricReport full_report(const std::vector<double>& scores, const std::vector<int>& labels,
                         double threshold) {
    const ConfusionMetrics c = confusion_metrics(scores, labels, threshold);
    MetricReport r;
    r.accuracy = c.accuracy;
    r.precision = c.precision;
    r.recall = c.recall;
    r.f1 = c.f1;
    r.roc_auc = roc_auc(scores, labels);
    r.pr_auc = pr_auc(scores, labels);
    r.tpr_at_1pct_fpr = tpr_at_fpr(scores, labels, 0.01);
    r.fpr_at_95pct_tpr = fpr_at_tpr(scores, labels, 0.95);
    r.tp = c.tp;
    r.fp = c.fp;
    r.tn = c.tn;
    r.fn = c.fn;
    r.n_scores = static_cast<std::int64_t>(scores.size());
    return r;
}

}  // namespace ipg
