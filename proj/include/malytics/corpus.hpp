#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "malytics/elm.hpp"

namespace malytics {

struct SampleRecord {
    std::string path;
    Label label = Label::Benign;
    std::string family;  // optional
    std::string sha256;  // optional, 64 lowercase hex chars when present
};

struct LabeledCorpus {
    std::vector<SampleRecord> records;
    std::size_t malware_count = 0;
    std::size_t benign_count = 0;
};

struct ManifestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ZipError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoDexEntries : ZipError {
    using ZipError::ZipError;
};

/// Manifest CSV: header `path,label[,family][,sha256]`, UTF-8, `#` comment
/// lines allowed. Labels are case-folded. Duplicate paths are rejected with
/// the offending line number.
LabeledCorpus load_manifest(const std::filesystem::path& path);
void write_manifest(const LabeledCorpus& corpus, const std::filesystem::path& path);

/// Concatenates the decompressed root-level classes*.dex entries of a ZIP
/// container in ascending entry-name order. Stored and deflate methods are
/// supported; anything else is rejected. Throws ZipError on a non-ZIP input
/// and NoDexEntries when no dex entry exists.
std::vector<std::uint8_t> extract_dex(std::span<const std::uint8_t> container);

/// True iff at least `threshold` vendors flagged the sample.
bool consensus_label(const std::map<std::string, bool>& vendor_detections,
                     int threshold = 1);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace malytics
