#include <doctest.h>

#include <cmath>
#include <random>

#include "malytics/elm.hpp"
#include "malytics/model_io.hpp"

using namespace malytics;

namespace {

FeatureVector random_feature(std::mt19937_64& rng, std::size_t dim) {
    FeatureVector fv;
    fv.values.resize(dim);
    for (auto& v : fv.values)
        v = static_cast<double>(rng() >> 11) * 0x1.0p-53 * 4.0 - 2.0;
    return fv;
}

// Two tight, well-separated clusters.
void separable_fixture(std::mt19937_64& rng, std::size_t n, std::size_t dim,
                       std::vector<FeatureVector>& features, std::vector<Label>& labels) {
    for (std::size_t i = 0; i < n; ++i) {
        const bool malware = (i % 2) == 0;
        FeatureVector fv;
        fv.values.resize(dim);
        for (auto& v : fv.values)
            v = (malware ? 1.0 : -1.0) +
                0.05 * (static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5);
        features.push_back(std::move(fv));
        labels.push_back(malware ? Label::Malware : Label::Benign);
    }
}

}  // namespace

TEST_CASE("encode_targets") {
    const auto m = encode_targets({Label::Malware});
    CHECK(m(0, 0) == 1.0);
    CHECK(m(0, 1) == -1.0);
    const auto b = encode_targets({Label::Benign});
    CHECK(b(0, 0) == -1.0);
    CHECK(b(0, 1) == 1.0);
    const auto t = encode_targets({Label::Malware, Label::Benign, Label::Malware});
    CHECK(t.rows() == 3);
    CHECK(t(1, 0) == -1.0);
    CHECK(t(2, 1) == -1.0);
    CHECK_THROWS_AS(encode_targets({}), std::invalid_argument);
}

TEST_CASE("label parsing is case-insensitive") {
    CHECK(label_from_string("Malware") == Label::Malware);
    CHECK(label_from_string("BENIGN") == Label::Benign);
    CHECK_THROWS_AS(label_from_string("weird"), std::invalid_argument);
}

TEST_CASE("train on orthogonal pair gives beta = T/2") {
    // Two mutually distant vectors make Omega ~ identity; with C=1 the solve
    // is (I + I) B = T.
    std::vector<FeatureVector> fs(2);
    fs[0].values.assign(8, 0.0);
    fs[1].values.assign(8, 0.0);
    fs[0].values[0] = 100.0;
    fs[1].values[1] = -100.0;
    const auto model = train(fs, {Label::Malware, Label::Benign}, {1.0}, 1.0);
    CHECK(model.beta(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(model.beta(0, 1) == doctest::Approx(-0.5).epsilon(1e-9));
    CHECK(model.beta(1, 0) == doctest::Approx(-0.5).epsilon(1e-9));
    CHECK(model.beta(1, 1) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("train matches explicit-inverse oracle") {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 10 + rng() % 21;
        std::vector<FeatureVector> fs;
        std::vector<Label> labels;
        for (std::size_t i = 0; i < n; ++i) {
            fs.push_back(random_feature(rng, 8));
            labels.push_back(i % 2 ? Label::Benign : Label::Malware);
        }
        const double c = 200.0;
        const auto model = train(fs, labels, {1.0}, c);

        Eigen::MatrixXd a = gram(fs, {1.0});
        a.diagonal().array() += 1.0 / c;
        const Eigen::MatrixXd beta_oracle = a.inverse() * encode_targets(labels);
        CHECK((model.beta - beta_oracle).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK(model.meta.solve_residual <= 1e-8 * static_cast<double>(n));
    }
}

TEST_CASE("train rejects bad input") {
    std::mt19937_64 rng(11);
    std::vector<FeatureVector> fs{random_feature(rng, 4), random_feature(rng, 4)};
    CHECK_THROWS_AS(train(fs, {Label::Malware, Label::Malware}, {1.0}, 200.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(train(fs, {Label::Malware, Label::Benign}, {1.0}, 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(train({fs[0]}, {Label::Malware}, {1.0}, 200.0), std::invalid_argument);
    fs[0].values[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(train(fs, {Label::Malware, Label::Benign}, {1.0}, 200.0),
                    std::invalid_argument);
}

TEST_CASE("train_subsampled") {
    std::mt19937_64 rng(12);
    std::vector<FeatureVector> fs;
    std::vector<Label> labels;
    separable_fixture(rng, 40, 8, fs, labels);

    SUBCASE("l = N reproduces train bit-compatibly") {
        NgramConfig cfg;
        cfg.hash_size = 8;
        const auto full = train(fs, labels, {1.0}, 200.0, cfg);
        const auto sub = train_subsampled(fs, labels, {1.0}, 200.0, fs.size(), 9, cfg);
        CHECK(serialize_model(full) == serialize_model(sub));
    }

    SUBCASE("fixed seed gives identical support set") {
        const auto a = train_subsampled(fs, labels, {1.0}, 200.0, 10, 77);
        const auto b = train_subsampled(fs, labels, {1.0}, 200.0, 10, 77);
        CHECK(a.meta.support_indices == b.meta.support_indices);
        CHECK(a.meta.support_indices.size() == 10);
    }

    SUBCASE("l out of range") {
        CHECK_THROWS_AS(train_subsampled(fs, labels, {1.0}, 200.0, 1, 0),
                        std::invalid_argument);
        CHECK_THROWS_AS(train_subsampled(fs, labels, {1.0}, 200.0, fs.size() + 1, 0),
                        std::invalid_argument);
    }
}

TEST_CASE("predict_scores and classify on separable fixture") {
    std::mt19937_64 rng(13);
    std::vector<FeatureVector> fs;
    std::vector<Label> labels;
    separable_fixture(rng, 20, 8, fs, labels);
    const auto model = train(fs, labels, {1.0}, 200.0);

    for (std::size_t i = 0; i < fs.size(); ++i) {
        const auto s = predict_scores(model, fs[i]);
        if (labels[i] == Label::Malware)
            CHECK(s.margin() > 0.0);
        else
            CHECK(s.margin() < 0.0);
        CHECK(classify(s) == labels[i]);
    }

    SUBCASE("zero beta gives zero scores") {
        TrainedModel zero = model;
        zero.beta.setZero();
        const auto s = predict_scores(zero, fs[0]);
        CHECK(s.malware_score == 0.0);
        CHECK(s.benign_score == 0.0);
        CHECK(s.margin() == 0.0);
    }
}

TEST_CASE("classify thresholds and tie-break") {
    CHECK(classify({0.7, 0.2}) == Label::Malware);
    CHECK(classify({0.2, 0.5}) == Label::Benign);
    CHECK(classify({0.5, 0.5}) == Label::Malware);  // tie goes to malware
    CHECK(classify({0.7, 0.2}, 0.6) == Label::Benign);
}

TEST_CASE("training error decreases as C grows") {
    std::mt19937_64 rng(14);
    std::vector<FeatureVector> fs;
    std::vector<Label> labels;
    separable_fixture(rng, 30, 6, fs, labels);
    const Eigen::MatrixXd t = encode_targets(labels);

    double prev = std::numeric_limits<double>::infinity();
    for (double c : {1.0, 10.0, 100.0, 1000.0}) {
        const auto model = train(fs, labels, {1.0}, c);
        double err = 0.0;
        for (std::size_t i = 0; i < fs.size(); ++i) {
            const auto s = predict_scores(model, fs[i]);
            const auto r = static_cast<Eigen::Index>(i);
            err += std::hypot(s.malware_score - t(r, 0), s.benign_score - t(r, 1));
        }
        CHECK(err < prev);
        prev = err;
    }
}
