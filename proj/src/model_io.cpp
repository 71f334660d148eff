#include "malytics/model_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

namespace malytics {
namespace {

static_assert(std::endian::native == std::endian::little,
              "model format writer assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t& pos) {
    if (pos + sizeof(T) > bytes.size())
        throw ModelFormatError("model file truncated");
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const TrainedModel& model) {
    const auto l = model.support.size();
    if (model.beta.rows() != static_cast<Eigen::Index>(l) || model.beta.cols() != 2)
        throw ModelFormatError("beta shape does not match support count");

    std::vector<std::uint8_t> out;
    out.reserve(64 + l * (model.featurizer_config.hash_size + 2) * sizeof(double));
    out.insert(out.end(), {'M', 'L', 'Y', 'T'});
    put<std::uint16_t>(out, kModelFormatVersion);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(model.featurizer_config.n));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(model.featurizer_config.hash_size));
    put<std::uint64_t>(out, model.featurizer_config.seed);
    put<std::uint8_t>(out, model.featurizer_config.sparse ? 1 : 0);
    put<double>(out, model.featurizer_config.density);
    put<double>(out, model.kernel_params.gamma);
    put<double>(out, model.c_tradeoff);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l));

    for (const auto& s : model.support) {
        if (s.values.size() != static_cast<std::size_t>(model.featurizer_config.hash_size))
            throw ModelFormatError("support vector length does not match hash_size");
        for (double v : s.values) put<double>(out, v);
    }
    for (std::size_t r = 0; r < l; ++r) {
        put<double>(out, model.beta(static_cast<Eigen::Index>(r), 0));
        put<double>(out, model.beta(static_cast<Eigen::Index>(r), 1));
    }

    const auto crc = static_cast<std::uint32_t>(
        crc32(0, out.data(), static_cast<uInt>(out.size())));
    put<std::uint32_t>(out, crc);
    return out;
}

TrainedModel deserialize_model(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 + 2 + 4 ||
        std::memcmp(bytes.data(), "MLYT", 4) != 0)
        throw ModelFormatError("not a MLYT model file");

    const auto stored_crc_pos = bytes.size() - 4;
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + stored_crc_pos, 4);
    const auto actual_crc = static_cast<std::uint32_t>(
        crc32(0, bytes.data(), static_cast<uInt>(stored_crc_pos)));
    if (stored_crc != actual_crc)
        throw ModelFormatError("model file CRC mismatch (corrupted)");

    std::size_t pos = 4;
    const auto version = get<std::uint16_t>(bytes, pos);
    if (version > kModelFormatVersion)
        throw ModelFormatError("model format version " + std::to_string(version) +
                               " is newer than supported");

    TrainedModel model;
    model.featurizer_config.n = get<std::uint16_t>(bytes, pos);
    model.featurizer_config.hash_size =
        static_cast<int>(get<std::uint32_t>(bytes, pos));
    model.featurizer_config.seed = get<std::uint64_t>(bytes, pos);
    model.featurizer_config.sparse = get<std::uint8_t>(bytes, pos) != 0;
    model.featurizer_config.density = get<double>(bytes, pos);
    model.kernel_params.gamma = get<double>(bytes, pos);
    model.c_tradeoff = get<double>(bytes, pos);
    const auto l = get<std::uint32_t>(bytes, pos);

    const auto hash_size = static_cast<std::size_t>(model.featurizer_config.hash_size);
    model.support.resize(l);
    for (auto& s : model.support) {
        s.values.resize(hash_size);
        bool all_zero = true;
        for (auto& v : s.values) {
            v = get<double>(bytes, pos);
            if (v != 0.0) all_zero = false;
        }
        s.degenerate = all_zero;
    }
    model.beta.resize(static_cast<Eigen::Index>(l), 2);
    for (std::uint32_t r = 0; r < l; ++r) {
        model.beta(r, 0) = get<double>(bytes, pos);
        model.beta(r, 1) = get<double>(bytes, pos);
    }
    if (pos != stored_crc_pos)
        throw ModelFormatError("model file has trailing bytes");
    model.meta.total_samples = l;
    return model;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    const auto bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ModelFormatError("cannot write model file: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw ModelFormatError("short write to model file: " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ModelFormatError("cannot open model file: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

}  // namespace malytics
