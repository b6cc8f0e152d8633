#pragma once

#include <cstdint>
#include <vector>

namespace ipg {

struct ConfusionMetrics {
    double accuracy = 0.0;
    double precision = 0.0;  // 0 when no predicted positives
    double recall = 0.0;     // 0 when no actual positives
    double f1 = 0.0;
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Positive prediction iff score >= threshold.
ConfusionMetrics confusion_metrics(const std::vector<double>& scores,
                                   const std::vector<int>& labels, double threshold);

// Probability a random positive outranks a random negative; ties count 1/2
// (Mann-Whitney over average ranks). Requires both classes.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Area under the precision-recall curve by descending-score sweep with
// step-wise (right-continuous) interpolation. Requires positives.
double pr_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Max TPR over thresholds whose empirical FPR <= fpr_budget; thresholds are
// the distinct scores plus +inf, no interpolation.
double tpr_at_fpr(const std::vector<double>& scores, const std::vector<int>& labels,
                  double fpr_budget = 0.01);

// Min FPR over thresholds whose TPR >= tpr_target.
double fpr_at_tpr(const std::vector<double>& scores, const std::vector<int>& labels,
                  double tpr_target = 0.95);

struct MetricReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double roc_auc = 0.0;
    double pr_auc = 0.0;
    double tpr_at_1pct_fpr = 0.0;
    double fpr_at_95pct_tpr = 0.0;
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::int64_t n_scores = 0;
};

MetricReport full_report(const std::vector<double>& scores, const std::vector<int>& labels,
                         double threshold = 0.5);

}  // namespace ipg
