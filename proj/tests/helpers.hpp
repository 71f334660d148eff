#pragma once

#include <zlib.h>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "malytics/elm.hpp"
#include "malytics/featurizer.hpp"

namespace testing_support {

// Synthetic two-class corpus with interleaved per-family byte alphabets.
// Family f of malware draws bytes from [16f, 16f + 32); the benign families
// are shifted by 8, so the classes overlap heavily byte-wise but separate in
// n-gram space with enough data.
struct SyntheticCorpus {
    std::vector<std::vector<std::uint8_t>> files;
    std::vector<malytics::Label> labels;
    std::vector<std::string> families;
};

inline std::vector<std::uint8_t> synthetic_file(std::mt19937_64& rng, bool malware,
                                                int family, std::size_t length) {
    const int base = family * 16 + (malware ? 0 : 8);
    std::vector<std::uint8_t> data(length);
    for (auto& b : data) b = static_cast<std::uint8_t>(base + rng() % 32);
    return data;
}

inline SyntheticCorpus make_synthetic_corpus(std::size_t samples, std::uint64_t seed,
                                             std::size_t min_len = 3000,
                                             std::size_t max_len = 8000) {
    SyntheticCorpus c;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < samples; ++i) {
        const bool malware = (i % 2) == 0;
        const int family = static_cast<int>(rng() % 8);
        const std::size_t len = min_len + rng() % (max_len - min_len);
        c.files.push_back(synthetic_file(rng, malware, family, len));
        c.labels.push_back(malware ? malytics::Label::Malware : malytics::Label::Benign);
        c.families.push_back((malware ? "mal" : "ben") + std::to_string(family));
    }
    return c;
}

inline std::vector<malytics::FeatureVector> featurize_corpus(
    const SyntheticCorpus& c, const malytics::NgramConfig& config,
    const malytics::ProjectionMatrix& proj) {
    std::vector<malytics::FeatureVector> out;
    out.reserve(c.files.size());
    for (const auto& f : c.files) out.push_back(malytics::featurize(f, config, proj));
    return out;
}

// Minimal ZIP writer (stored entries only) for corpus tests.
struct ZipEntry {
    std::string name;
    std::vector<std::uint8_t> data;
};

inline void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::vector<std::uint8_t> build_zip(const std::vector<ZipEntry>& entries) {
    std::vector<std::uint8_t> out;
    std::vector<std::uint32_t> offsets;
    for (const auto& e : entries) {
        offsets.push_back(static_cast<std::uint32_t>(out.size()));
        const auto crc = static_cast<std::uint32_t>(
            crc32(0, e.data.data(), static_cast<uInt>(e.data.size())));
        put32(out, 0x04034b50u);
        put16(out, 20);  // version needed
        put16(out, 0);   // flags
        put16(out, 0);   // method: stored
        put16(out, 0);   // mod time
        put16(out, 0);   // mod date
        put32(out, crc);
        put32(out, static_cast<std::uint32_t>(e.data.size()));
        put32(out, static_cast<std::uint32_t>(e.data.size()));
        put16(out, static_cast<std::uint16_t>(e.name.size()));
        put16(out, 0);  // extra
        out.insert(out.end(), e.name.begin(), e.name.end());
        out.insert(out.end(), e.data.begin(), e.data.end());
    }
    const auto cd_start = static_cast<std::uint32_t>(out.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        const auto crc = static_cast<std::uint32_t>(
            crc32(0, e.data.data(), static_cast<uInt>(e.data.size())));
        put32(out, 0x02014b50u);
        put16(out, 20);  // version made by
        put16(out, 20);  // version needed
        put16(out, 0);   // flags
        put16(out, 0);   // method
        put16(out, 0);   // mod time
        put16(out, 0);   // mod date
        put32(out, crc);
        put32(out, static_cast<std::uint32_t>(e.data.size()));
        put32(out, static_cast<std::uint32_t>(e.data.size()));
        put16(out, static_cast<std::uint16_t>(e.name.size()));
        put16(out, 0);  // extra
        put16(out, 0);  // comment
        put16(out, 0);  // disk
        put16(out, 0);  // internal attrs
        put32(out, 0);  // external attrs
        put32(out, offsets[i]);
        out.insert(out.end(), e.name.begin(), e.name.end());
    }
    const auto cd_size = static_cast<std::uint32_t>(out.size()) - cd_start;
    put32(out, 0x06054b50u);
    put16(out, 0);  // disk
    put16(out, 0);  // cd disk
    put16(out, static_cast<std::uint16_t>(entries.size()));
    put16(out, static_cast<std::uint16_t>(entries.size()));
    put32(out, cd_size);
    put32(out, cd_start);
    put16(out, 0);  // comment length
    return out;
}

}  // namespace testing_support
