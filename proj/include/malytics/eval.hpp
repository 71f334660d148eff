#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "malytics/elm.hpp"

namespace malytics {

/// Malware is the positive class throughout.
struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::size_t total() const { return tp + fp + tn + fn; }
};

/// Confusion-matrix-derived scores plus ROC/AUC. Ratios with a zero
/// denominator are absent, with the reason listed in `undefined`.
struct MetricsReport {
    std::optional<double> recall, fnr, precision, f1, accuracy, fpr, auc;
    std::vector<std::pair<double, double>> roc_points;  // (fpr, tpr)
    std::vector<std::string> undefined;
};

struct SplitPlan {
    enum class Kind { KFold, MbrSubsample, FamilyHoldout };
    Kind kind = Kind::KFold;
    // (train_indices, test_indices) per fold; disjoint within each fold.
    std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> folds;
    std::uint64_t seed = 0;
};

ConfusionMatrix confusion(const std::vector<Label>& truth,
                          const std::vector<Label>& predicted);

/// All scalar metrics from the confusion matrix; AUC/ROC from the margins
/// when both classes are present.
MetricsReport metrics(const ConfusionMatrix& cm, const std::vector<double>& margins,
                      const std::vector<Label>& truth);

/// AUC = (concordant + 0.5 * tied) / (pos * neg), plus the threshold-sweep
/// ROC curve anchored at (0,0) and (1,1). Throws on single-class truth.
std::pair<double, std::vector<std::pair<double, double>>> roc_auc(
    const std::vector<double>& margins, const std::vector<Label>& truth);

/// Stratified k-fold: per-fold class counts within +-1 of proportionality,
/// seeded shuffle, folds partition the index range.
SplitPlan kfold_split(const std::vector<Label>& labels, int k, std::uint64_t seed);

/// Keeps every benign sample and a seeded uniform draw of
/// floor(mbr * benign_count / (1 - mbr)) malware samples. Returns the kept
/// indices in ascending order.
std::vector<std::size_t> mbr_subsample(const std::vector<Label>& labels, double mbr,
                                       std::uint64_t seed);

/// Single-fold plan: test = all malware whose family is held out plus a
/// seeded benign sample of equal size; train = everything else.
SplitPlan family_holdout(const std::vector<Label>& labels,
                         const std::vector<std::string>& families,
                         const std::set<std::string>& held_out, std::uint64_t seed);

struct CvOptions {
    KernelParams kernel;
    double c = 200.0;
    std::optional<std::size_t> subsample;  // l per fold, if set
    std::uint64_t seed = 0;
    NgramConfig config;
};

struct MetricAggregate {
    std::optional<double> mean;
    std::optional<double> stddev;  // sample std over folds, absent for 1 fold
};

struct CvResult {
    std::vector<MetricsReport> per_fold;
    MetricAggregate recall, precision, f1, accuracy, auc;
    std::optional<double> pooled_fpr;  // micro FPR over all folds
};

/// Trains and evaluates per fold; mean +- sample std for the headline
/// metrics and a single pooled FPR.
CvResult run_cv(const std::vector<FeatureVector>& features,
                const std::vector<Label>& labels, const SplitPlan& plan,
                const CvOptions& options);

}  // namespace malytics
