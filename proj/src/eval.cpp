#include "malytics/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace malytics {
namespace {

void sort_disjoint_check(SplitPlan& plan) {
    for (auto& [train, test] : plan.folds) {
        std::sort(train.begin(), train.end());
        std::sort(test.begin(), test.end());
    }
}

std::optional<double> ratio(std::size_t num, std::size_t den, const char* name,
                            const char* why, std::vector<std::string>& undefined) {
    if (den == 0) {
        undefined.push_back(std::string(name) + ": " + why);
        return std::nullopt;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

MetricAggregate aggregate(const std::vector<MetricsReport>& folds,
                          std::optional<double> MetricsReport::*field) {
    std::vector<double> vals;
    for (const auto& r : folds)
        if (r.*field) vals.push_back(*(r.*field));
    MetricAggregate agg;
    if (vals.empty()) return agg;
    const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) /
                        static_cast<double>(vals.size());
    agg.mean = mean;
    if (vals.size() >= 2) {
        double ss = 0.0;
        for (double v : vals) ss += (v - mean) * (v - mean);
        agg.stddev = std::sqrt(ss / static_cast<double>(vals.size() - 1));
    }
    return agg;
}

}  // namespace

ConfusionMatrix confusion(const std::vector<Label>& truth,
                          const std::vector<Label>& predicted) {
    if (truth.empty() || truth.size() != predicted.size())
        throw std::invalid_argument("confusion: nonempty equal-length inputs required");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool actual = truth[i] == Label::Malware;
        const bool pred = predicted[i] == Label::Malware;
        if (actual && pred) ++cm.tp;
        else if (actual && !pred) ++cm.fn;
        else if (!actual && pred) ++cm.fp;
        else ++cm.tn;
    }
    return cm;
}

MetricsReport metrics(const ConfusionMatrix& cm, const std::vector<double>& margins,
                      const std::vector<Label>& truth) {
    MetricsReport r;
    r.recall = ratio(cm.tp, cm.tp + cm.fn, "recall", "no actual malware", r.undefined);
    if (r.recall) r.fnr = 1.0 - *r.recall;
    else r.undefined.push_back("fnr: no actual malware");
    r.precision =
        ratio(cm.tp, cm.tp + cm.fp, "precision", "no positive predictions", r.undefined);
    if (r.precision && r.recall) {
        if (*r.precision + *r.recall > 0.0)
            r.f1 = 2.0 * (*r.precision * *r.recall) / (*r.precision + *r.recall);
        else
            r.undefined.push_back("f1: precision and recall both zero");
    } else {
        r.undefined.push_back("f1: precision or recall undefined");
    }
    r.accuracy = ratio(cm.tp + cm.tn, cm.total(), "accuracy", "no samples", r.undefined);
    r.fpr = ratio(cm.fp, cm.tn + cm.fp, "fpr", "no actual benign", r.undefined);

    const bool has_m = std::find(truth.begin(), truth.end(), Label::Malware) != truth.end();
    const bool has_b = std::find(truth.begin(), truth.end(), Label::Benign) != truth.end();
    if (!margins.empty() && has_m && has_b) {
        auto [auc, roc] = roc_auc(margins, truth);
        r.auc = auc;
        r.roc_points = std::move(roc);
    } else {
        r.undefined.push_back("auc: needs margins and both classes");
    }
    return r;
}

std::pair<double, std::vector<std::pair<double, double>>> roc_auc(
    const std::vector<double>& margins, const std::vector<Label>& truth) {
    if (margins.size() != truth.size() || margins.empty())
        throw std::invalid_argument("roc_auc: nonempty equal-length inputs required");
    std::size_t pos = 0, neg = 0;
    for (auto l : truth) (l == Label::Malware ? pos : neg)++;
    if (pos == 0 || neg == 0)
        throw std::invalid_argument("roc_auc: both classes must be present");

    // Mann-Whitney rank sum with average ranks over ties.
    std::vector<std::size_t> order(margins.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return margins[a] < margins[b]; });
    double rank_sum_pos = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && margins[order[j]] == margins[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
        for (std::size_t t = i; t < j; ++t)
            if (truth[order[t]] == Label::Malware) rank_sum_pos += avg_rank;
        i = j;
    }
    const double auc =
        (rank_sum_pos - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0) /
        (static_cast<double>(pos) * static_cast<double>(neg));

    // Threshold sweep from high to low margin.
    std::vector<std::pair<double, double>> roc;
    roc.emplace_back(0.0, 0.0);
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = order.size(); i > 0;) {
        std::size_t j = i;
        while (j > 0 && margins[order[j - 1]] == margins[order[i - 1]]) --j;
        for (std::size_t t = j; t < i; ++t)
            (truth[order[t]] == Label::Malware ? tp : fp)++;
        roc.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                         static_cast<double>(tp) / static_cast<double>(pos));
        i = j;
    }
    if (roc.back() != std::make_pair(1.0, 1.0)) roc.emplace_back(1.0, 1.0);
    return {auc, std::move(roc)};
}

SplitPlan kfold_split(const std::vector<Label>& labels, int k, std::uint64_t seed) {
    if (k < 2)
        throw std::invalid_argument("kfold_split: k must be >= 2");
    std::vector<std::size_t> mal, ben;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] == Label::Malware ? mal : ben).push_back(i);
    if (mal.size() < static_cast<std::size_t>(k) || ben.size() < static_cast<std::size_t>(k))
        throw std::invalid_argument("kfold_split: each class needs at least k samples");

    std::mt19937_64 rng(seed);
    auto shuffle = [&rng](std::vector<std::size_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[static_cast<std::size_t>(rng() % i)]);
    };
    shuffle(mal);
    shuffle(ben);

    std::vector<std::vector<std::size_t>> test(static_cast<std::size_t>(k));
    // Round-robin dealing keeps per-fold class counts within +-1.
    for (std::size_t i = 0; i < mal.size(); ++i) test[i % k].push_back(mal[i]);
    for (std::size_t i = 0; i < ben.size(); ++i) test[i % k].push_back(ben[i]);

    SplitPlan plan;
    plan.kind = SplitPlan::Kind::KFold;
    plan.seed = seed;
    for (int f = 0; f < k; ++f) {
        std::vector<std::size_t> train;
        for (int g = 0; g < k; ++g)
            if (g != f)
                train.insert(train.end(), test[g].begin(), test[g].end());
        plan.folds.emplace_back(std::move(train), test[f]);
    }
    sort_disjoint_check(plan);
    return plan;
}

std::vector<std::size_t> mbr_subsample(const std::vector<Label>& labels, double mbr,
                                       std::uint64_t seed) {
    if (!(mbr > 0.0 && mbr < 1.0))
        throw std::invalid_argument("mbr_subsample: mbr must be in (0, 1)");
    std::vector<std::size_t> mal, ben;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] == Label::Malware ? mal : ben).push_back(i);

    const auto keep = static_cast<std::size_t>(
        std::floor(mbr * static_cast<double>(ben.size()) / (1.0 - mbr)));
    if (keep > mal.size())
        throw std::invalid_argument("mbr_subsample: not enough malware for requested ratio");

    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < keep; ++i)
        std::swap(mal[i], mal[i + static_cast<std::size_t>(rng() % (mal.size() - i))]);
    mal.resize(keep);

    std::vector<std::size_t> kept(ben);
    kept.insert(kept.end(), mal.begin(), mal.end());
    std::sort(kept.begin(), kept.end());
    return kept;
}

SplitPlan family_holdout(const std::vector<Label>& labels,
                         const std::vector<std::string>& families,
                         const std::set<std::string>& held_out, std::uint64_t seed) {
    if (labels.size() != families.size())
        throw std::invalid_argument("family_holdout: label/family length mismatch");

    std::set<std::string> known;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == Label::Malware && !families[i].empty()) known.insert(families[i]);
    for (const auto& f : held_out)
        if (!known.count(f))
            throw std::invalid_argument("family_holdout: unknown family: " + f);

    std::vector<std::size_t> test_mal, train_mal, ben;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == Label::Malware) {
            (held_out.count(families[i]) ? test_mal : train_mal).push_back(i);
        } else {
            ben.push_back(i);
        }
    }
    if (train_mal.empty())
        throw std::invalid_argument("family_holdout: no malware left for training");
    if (test_mal.size() > ben.size())
        throw std::invalid_argument("family_holdout: not enough benign to balance the test set");

    // Seeded benign sample of matching size keeps the test set balanced.
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < test_mal.size(); ++i)
        std::swap(ben[i], ben[i + static_cast<std::size_t>(rng() % (ben.size() - i))]);
    std::vector<std::size_t> test(test_mal);
    test.insert(test.end(), ben.begin(), ben.begin() + static_cast<std::ptrdiff_t>(test_mal.size()));

    std::vector<std::size_t> train(train_mal);
    train.insert(train.end(), ben.begin() + static_cast<std::ptrdiff_t>(test_mal.size()), ben.end());

    SplitPlan plan;
    plan.kind = SplitPlan::Kind::FamilyHoldout;
    plan.seed = seed;
    plan.folds.emplace_back(std::move(train), std::move(test));
    sort_disjoint_check(plan);
    return plan;
}

CvResult run_cv(const std::vector<FeatureVector>& features,
                const std::vector<Label>& labels, const SplitPlan& plan,
                const CvOptions& options) {
    if (features.size() != labels.size())
        throw std::invalid_argument("run_cv: feature/label length mismatch");
    if (plan.folds.empty())
        throw std::invalid_argument("run_cv: empty plan");

    CvResult result;
    std::size_t pooled_fp = 0, pooled_tn = 0;
    for (const auto& [train_idx, test_idx] : plan.folds) {
        // Train must never see test indices.
        std::vector<std::size_t> overlap;
        std::set_intersection(train_idx.begin(), train_idx.end(), test_idx.begin(),
                              test_idx.end(), std::back_inserter(overlap));
        if (!overlap.empty())
            throw std::logic_error("run_cv: train/test index sets overlap");

        std::vector<FeatureVector> train_f;
        std::vector<Label> train_l;
        for (auto i : train_idx) {
            train_f.push_back(features[i]);
            train_l.push_back(labels[i]);
        }
        TrainedModel model =
            options.subsample
                ? train_subsampled(train_f, train_l, options.kernel, options.c,
                                   std::min(*options.subsample, train_f.size()),
                                   options.seed, options.config)
                : train(train_f, train_l, options.kernel, options.c, options.config);

        std::vector<Label> truth, predicted;
        std::vector<double> margins;
        for (auto i : test_idx) {
            const Scores s = predict_scores(model, features[i]);
            truth.push_back(labels[i]);
            predicted.push_back(classify(s));
            margins.push_back(s.margin());
        }
        const ConfusionMatrix cm = confusion(truth, predicted);
        pooled_fp += cm.fp;
        pooled_tn += cm.tn;
        result.per_fold.push_back(metrics(cm, margins, truth));
    }

    result.recall = aggregate(result.per_fold, &MetricsReport::recall);
    result.precision = aggregate(result.per_fold, &MetricsReport::precision);
    result.f1 = aggregate(result.per_fold, &MetricsReport::f1);
    result.accuracy = aggregate(result.per_fold, &MetricsReport::accuracy);
    result.auc = aggregate(result.per_fold, &MetricsReport::auc);
    if (pooled_fp + pooled_tn > 0)
        result.pooled_fpr =
            static_cast<double>(pooled_fp) / static_cast<double>(pooled_fp + pooled_tn);
    return result;
}

}  // namespace malytics
