#include "malytics/elm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace malytics {
namespace {

bool has_both_classes(const std::vector<Label>& labels,
                      const std::vector<std::size_t>& idx) {
    bool m = false, b = false;
    for (auto i : idx) {
        (labels[i] == Label::Malware ? m : b) = true;
        if (m && b) return true;
    }
    return false;
}

TrainedModel train_on_indices(const std::vector<FeatureVector>& features,
                              const std::vector<Label>& labels, KernelParams params,
                              double c, std::vector<std::size_t> idx,
                              std::uint64_t seed, const NgramConfig& config) {
    params.validate();
    if (!(c > 0.0))
        throw std::invalid_argument("train: C must be > 0");
    if (idx.size() < 2)
        throw std::invalid_argument("train: need at least 2 samples");
    if (!has_both_classes(labels, idx))
        throw std::invalid_argument("train: both classes must be present");

    std::vector<FeatureVector> sel;
    std::vector<Label> sel_labels;
    sel.reserve(idx.size());
    sel_labels.reserve(idx.size());
    for (auto i : idx) {
        for (double v : features[i].values)
            if (!std::isfinite(v))
                throw std::invalid_argument("train: non-finite feature value");
        sel.push_back(features[i]);
        sel_labels.push_back(labels[i]);
    }

    const auto n = static_cast<Eigen::Index>(sel.size());
    Eigen::MatrixXd a = gram(sel, params);
    a.diagonal().array() += 1.0 / c;
    const Eigen::MatrixXd t = encode_targets(sel_labels);

    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("train: Cholesky factorization failed (check gamma/C)");
    Eigen::MatrixXd beta = llt.solve(t);

    const double residual = (a * beta - t).cwiseAbs().maxCoeff();
    if (residual > 1e-8 * static_cast<double>(n))
        throw std::runtime_error("train: solve residual exceeds contract");

    TrainedModel model;
    model.featurizer_config = config;
    model.kernel_params = params;
    model.c_tradeoff = c;
    model.support = std::move(sel);
    model.beta = std::move(beta);
    model.meta.total_samples = features.size();
    model.meta.seed = seed;
    model.meta.support_indices = std::move(idx);
    model.meta.solve_residual = residual;
    return model;
}

}  // namespace

std::string to_string(Label l) {
    return l == Label::Malware ? "malware" : "benign";
}

Label label_from_string(const std::string& s) {
    std::string low;
    low.reserve(s.size());
    for (char ch : s) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    if (low == "malware") return Label::Malware;
    if (low == "benign") return Label::Benign;
    throw std::invalid_argument("unknown label: " + s);
}

Eigen::MatrixXd encode_targets(const std::vector<Label>& labels) {
    if (labels.empty())
        throw std::invalid_argument("encode_targets: empty label list");
    Eigen::MatrixXd t(static_cast<Eigen::Index>(labels.size()), 2);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        if (labels[i] == Label::Malware) {
            t(r, 0) = 1.0;
            t(r, 1) = -1.0;
        } else {
            t(r, 0) = -1.0;
            t(r, 1) = 1.0;
        }
    }
    return t;
}

TrainedModel train(const std::vector<FeatureVector>& features,
                   const std::vector<Label>& labels, KernelParams params, double c,
                   const NgramConfig& config) {
    if (features.size() != labels.size())
        throw std::invalid_argument("train: feature/label length mismatch");
    std::vector<std::size_t> idx(features.size());
    std::iota(idx.begin(), idx.end(), 0);
    return train_on_indices(features, labels, params, c, std::move(idx), 0, config);
}

TrainedModel train_subsampled(const std::vector<FeatureVector>& features,
                              const std::vector<Label>& labels, KernelParams params,
                              double c, std::size_t l, std::uint64_t seed,
                              const NgramConfig& config) {
    if (features.size() != labels.size())
        throw std::invalid_argument("train: feature/label length mismatch");
    const std::size_t n = features.size();
    if (l < 2 || l > n)
        throw std::invalid_argument("train_subsampled: l out of range [2, N]");

    if (l == n) {
        // Identity selection: same factorization path as train().
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        return train_on_indices(features, labels, params, c, std::move(idx), seed, config);
    }

    std::mt19937_64 rng(seed);
    constexpr int kMaxAttempts = 16;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        std::vector<std::size_t> pool(n);
        std::iota(pool.begin(), pool.end(), 0);
        // Partial Fisher-Yates, first l entries.
        for (std::size_t i = 0; i < l; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
            std::swap(pool[i], pool[j]);
        }
        std::vector<std::size_t> idx(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(l));
        std::sort(idx.begin(), idx.end());
        if (!has_both_classes(labels, idx)) continue;
        return train_on_indices(features, labels, params, c, std::move(idx), seed, config);
    }
    throw std::runtime_error("train_subsampled: could not draw a two-class subset");
}

Scores predict_scores(const TrainedModel& model, const FeatureVector& x) {
    const auto row = kernel_row(x, model.support, model.kernel_params);
    Scores s;
    for (std::size_t i = 0; i < row.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        s.malware_score += row[i] * model.beta(r, 0);
        s.benign_score += row[i] * model.beta(r, 1);
    }
    return s;
}

Label classify(const Scores& scores, double threshold) {
    return scores.margin() >= threshold ? Label::Malware : Label::Benign;
}

}  // namespace malytics
