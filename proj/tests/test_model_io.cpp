#include <doctest.h>
#include <zlib.h>

#include <filesystem>
#include <random>

#include "malytics/model_io.hpp"

using namespace malytics;
namespace fs = std::filesystem;

namespace {

TrainedModel small_model(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<FeatureVector> fs;
    std::vector<Label> labels;
    NgramConfig cfg;
    cfg.hash_size = 16;
    for (int i = 0; i < 12; ++i) {
        FeatureVector fv;
        fv.values.resize(16);
        for (auto& v : fv.values)
            v = (i % 2 ? 1.0 : -1.0) +
                0.1 * (static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5);
        fs.push_back(std::move(fv));
        labels.push_back(i % 2 ? Label::Benign : Label::Malware);
    }
    return train(fs, labels, {1.0}, 200.0, cfg);
}

}  // namespace

TEST_CASE("model serialization round trip") {
    const auto model = small_model(1);
    const auto bytes = serialize_model(model);
    CHECK(bytes.size() > 4);
    CHECK(bytes[0] == 'M');
    CHECK(bytes[1] == 'L');

    const auto back = deserialize_model(bytes);
    CHECK(back.support.size() == model.support.size());
    CHECK(back.featurizer_config.hash_size == 16);
    CHECK(back.kernel_params.gamma == model.kernel_params.gamma);
    CHECK(back.c_tradeoff == model.c_tradeoff);
    CHECK(back.beta == model.beta);
    for (std::size_t i = 0; i < back.support.size(); ++i)
        CHECK(back.support[i].values == model.support[i].values);

    // save -> load -> save is byte-identical
    CHECK(serialize_model(back) == bytes);
}

TEST_CASE("model file round trip on disk") {
    const auto model = small_model(2);
    const fs::path p = fs::temp_directory_path() / "roundtrip.mlyt";
    save_model(model, p);
    const auto back = load_model(p);
    CHECK(serialize_model(back) == serialize_model(model));
}

TEST_CASE("corruption is detected by CRC") {
    const auto model = small_model(3);
    auto bytes = serialize_model(model);
    bytes[bytes.size() / 2] ^= 0x40;
    CHECK_THROWS_WITH_AS(deserialize_model(bytes), doctest::Contains("CRC"),
                         ModelFormatError);
}

TEST_CASE("bad magic and future version rejected") {
    const auto model = small_model(4);
    auto bytes = serialize_model(model);

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(bad_magic), ModelFormatError);

    auto future = bytes;
    future[4] = 0xFF;  // version field
    future[5] = 0x7F;
    // Recompute the CRC so only the version gate fires.
    {
        const auto body = future.size() - 4;
        const auto crc = static_cast<std::uint32_t>(
            ::crc32(0, future.data(), static_cast<uInt>(body)));
        for (std::size_t i = 0; i < 4; ++i)
            future[body + i] = static_cast<std::uint8_t>(crc >> (8 * i));
    }
    CHECK_THROWS_WITH_AS(deserialize_model(future), doctest::Contains("version"),
                         ModelFormatError);
}

TEST_CASE("degenerate support vectors survive the round trip") {
    auto model = small_model(5);
    for (auto& v : model.support[0].values) v = 0.0;
    model.support[0].degenerate = true;
    const auto back = deserialize_model(serialize_model(model));
    CHECK(back.support[0].degenerate);
    CHECK(!back.support[1].degenerate);
}

TEST_CASE("truncated input rejected") {
    const auto model = small_model(6);
    auto bytes = serialize_model(model);
    bytes.resize(bytes.size() / 2);
    CHECK_THROWS_AS(deserialize_model(bytes), ModelFormatError);
}
