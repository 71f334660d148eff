#include "malytics/featurizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace malytics {
namespace {

// mt19937_64 output is fully specified by the standard, so the projection is
// reproducible across runs and platforms.
using Engine = std::mt19937_64;

// Uniform in (0, 1]: 53 top bits, shifted away from zero so log() is safe.
double uniform_open_closed(Engine& rng) {
    return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

// Uniform in [0, 1).
double uniform_half_open(Engine& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Basic (trigonometric) Box-Muller; consumes exactly two 64-bit draws per
// pair of normals, so the draw count per matrix entry is fixed.
class NormalStream {
public:
    explicit NormalStream(Engine& rng) : rng_(rng) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open_closed(rng_);
        const double u2 = uniform_half_open(rng_);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    Engine& rng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Unbiased bounded uniform via rejection (Lemire's multiply-shift).
std::uint64_t bounded(Engine& rng, std::uint64_t n) {
    __uint128_t m = static_cast<__uint128_t>(rng()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
        const std::uint64_t threshold = (0 - n) % n;
        while (lo < threshold) {
            m = static_cast<__uint128_t>(rng()) * n;
            lo = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

std::int8_t sign_draw(Engine& rng) {
    return (rng() >> 63) ? std::int8_t{-1} : std::int8_t{1};
}

}  // namespace

int NgramConfig::nonzeros_per_row() const {
    return static_cast<int>(std::lround(density * hash_size));
}

void NgramConfig::validate() const {
    if (n < 1 || n > 3)
        throw std::invalid_argument("ngram order must be in [1, 3]");
    if (hash_size < 1)
        throw std::invalid_argument("hash_size must be >= 1");
    if (sparse) {
        if (!(density > 0.0 && density <= 1.0))
            throw std::invalid_argument("density must be in (0, 1]");
        if (nonzeros_per_row() < 1)
            throw std::invalid_argument("density too small: rows would have no nonzeros");
    }
}

ProjectionMatrix ProjectionMatrix::build(const NgramConfig& config) {
    config.validate();

    ProjectionMatrix p;
    p.rows_ = config.dictionary_size();
    p.cols_ = config.hash_size;
    p.sparse_ = config.sparse;
    p.seed_ = config.seed;

    Engine rng(config.seed);
    if (!config.sparse) {
        NormalStream normals(rng);
        p.dense_.resize(p.rows_ * static_cast<std::size_t>(p.cols_));
        for (auto& e : p.dense_)
            e = normals.next() >= 0.0 ? std::int8_t{1} : std::int8_t{-1};
        return p;
    }

    const int k = config.nonzeros_per_row();
    p.row_nnz_ = k;
    p.sparse_cols_.resize(p.rows_ * static_cast<std::size_t>(k));
    p.sparse_signs_.resize(p.rows_ * static_cast<std::size_t>(k));
    std::vector<std::uint32_t> picked;
    picked.reserve(k);
    for (std::size_t r = 0; r < p.rows_; ++r) {
        // Floyd's sampling: k distinct columns without replacement.
        picked.clear();
        for (std::uint64_t j = static_cast<std::uint64_t>(p.cols_) - k;
             j < static_cast<std::uint64_t>(p.cols_); ++j) {
            const auto t = static_cast<std::uint32_t>(bounded(rng, j + 1));
            if (std::find(picked.begin(), picked.end(), t) != picked.end())
                picked.push_back(static_cast<std::uint32_t>(j));
            else
                picked.push_back(t);
        }
        std::sort(picked.begin(), picked.end());
        auto* cols = p.sparse_cols_.data() + r * static_cast<std::size_t>(k);
        auto* signs = p.sparse_signs_.data() + r * static_cast<std::size_t>(k);
        for (int i = 0; i < k; ++i) {
            cols[i] = picked[i];
            signs[i] = sign_draw(rng);
        }
    }
    return p;
}

int ProjectionMatrix::entry(std::size_t r, int c) const {
    if (!sparse_)
        return dense_[r * static_cast<std::size_t>(cols_) + c];
    const auto cols = sparse_cols(r);
    const auto it = std::lower_bound(cols.begin(), cols.end(),
                                     static_cast<std::uint32_t>(c));
    if (it == cols.end() || *it != static_cast<std::uint32_t>(c)) return 0;
    return sparse_signs(r)[static_cast<std::size_t>(it - cols.begin())];
}

TfVector extract_ngram_tf(std::span<const std::uint8_t> data, int n) {
    if (n < 1 || n > 3)
        throw std::invalid_argument("ngram order must be in [1, 3]");
    TfVector tf;
    tf.counts.assign(std::size_t{1} << (8 * n), 0);
    if (data.size() < static_cast<std::size_t>(n)) return tf;

    const std::size_t windows = data.size() - n + 1;
    // Big-endian rolling index over the n-byte window.
    const std::uint32_t mask =
        n == 3 ? 0xFFFFFFu : (n == 2 ? 0xFFFFu : 0xFFu);
    std::uint32_t v = 0;
    for (int i = 0; i < n - 1; ++i) v = (v << 8) | data[i];
    for (std::size_t p = 0; p < windows; ++p) {
        v = ((v << 8) | data[p + n - 1]) & mask;
        ++tf.counts[v];
    }
    tf.total_ngrams = windows;
    return tf;
}

std::vector<std::int64_t> tf_simhash(const TfVector& tf, const ProjectionMatrix& proj) {
    if (tf.counts.size() != proj.rows())
        throw std::invalid_argument("tf dictionary size does not match projection rows");

    std::vector<std::int64_t> acc(static_cast<std::size_t>(proj.cols()), 0);
    for (std::size_t v = 0; v < tf.counts.size(); ++v) {
        const std::int64_t c = tf.counts[v];
        if (c == 0) continue;
        if (!proj.is_sparse()) {
            const auto row = proj.dense_row(v);
            for (std::size_t j = 0; j < row.size(); ++j)
                acc[j] += c * row[j];
        } else {
            const auto cols = proj.sparse_cols(v);
            const auto signs = proj.sparse_signs(v);
            for (std::size_t i = 0; i < cols.size(); ++i)
                acc[cols[i]] += c * signs[i];
        }
    }
    return acc;
}

FeatureVector standardize(std::span<const double> raw) {
    if (raw.size() < 2)
        throw std::invalid_argument("standardize requires length >= 2");

    double mean = 0.0;
    for (double x : raw) mean += x;
    mean /= static_cast<double>(raw.size());

    double var = 0.0;
    for (double x : raw) var += (x - mean) * (x - mean);
    var /= static_cast<double>(raw.size());  // population variance
    const double sigma = std::sqrt(var);

    FeatureVector out;
    out.values.resize(raw.size());
    if (sigma < 1e-12) {
        out.degenerate = true;
        return out;
    }
    for (std::size_t i = 0; i < raw.size(); ++i)
        out.values[i] = (raw[i] - mean) / sigma;
    return out;
}

FeatureVector standardize(std::span<const std::int64_t> raw) {
    std::vector<double> d(raw.begin(), raw.end());
    return standardize(std::span<const double>{d});
}

FeatureVector featurize(std::span<const std::uint8_t> data, const NgramConfig& config,
                        const ProjectionMatrix& proj) {
    const TfVector tf = extract_ngram_tf(data, config.n);
    const auto raw = tf_simhash(tf, proj);
    return standardize(std::span<const std::int64_t>{raw});
}

}  // namespace malytics
