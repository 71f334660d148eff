#include "malytics/corpus.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace malytics {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    for (auto& f : fields) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.erase(f.begin());
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r'))
            f.pop_back();
    }
    return fields;
}

bool valid_sha256(const std::string& s) {
    if (s.size() != 64) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
    });
}

std::uint16_t rd16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t rd32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<std::uint8_t> inflate_raw(std::span<const std::uint8_t> in,
                                      std::size_t expected) {
    std::vector<std::uint8_t> out(expected);
    z_stream zs{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK)
        throw ZipError("zlib init failed");
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.total_out != expected)
        throw ZipError("corrupt deflate stream in zip entry");
    return out;
}

}  // namespace

LabeledCorpus load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ManifestError("cannot open manifest: " + path.string());

    LabeledCorpus corpus;
    std::set<std::string> seen_paths;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') continue;
        const auto fields = split_csv_line(line);
        if (!header_seen) {
            if (fields.empty() || fields[0] != "path")
                throw ManifestError("line " + std::to_string(line_no) +
                                    ": expected header starting with 'path'");
            header_seen = true;
            continue;
        }
        if (fields.size() < 2 || fields[0].empty())
            throw ManifestError("line " + std::to_string(line_no) +
                                ": expected path,label[,family][,sha256]");
        SampleRecord rec;
        rec.path = fields[0];
        try {
            rec.label = label_from_string(fields[1]);
        } catch (const std::invalid_argument& e) {
            throw ManifestError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (fields.size() >= 3) rec.family = fields[2];
        if (fields.size() >= 4 && !fields[3].empty()) {
            if (!valid_sha256(fields[3]))
                throw ManifestError("line " + std::to_string(line_no) +
                                    ": sha256 must be 64 lowercase hex chars");
            rec.sha256 = fields[3];
        }
        if (!seen_paths.insert(rec.path).second)
            throw ManifestError("line " + std::to_string(line_no) +
                                ": duplicate path: " + rec.path);
        (rec.label == Label::Malware ? corpus.malware_count : corpus.benign_count)++;
        corpus.records.push_back(std::move(rec));
    }
    if (!header_seen)
        throw ManifestError("manifest has no header row: " + path.string());
    return corpus;
}

void write_manifest(const LabeledCorpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw ManifestError("cannot write manifest: " + path.string());
    out << "path,label,family,sha256\n";
    for (const auto& r : corpus.records)
        out << r.path << ',' << to_string(r.label) << ',' << r.family << ',' << r.sha256
            << '\n';
}

std::vector<std::uint8_t> extract_dex(std::span<const std::uint8_t> container) {
    // End-of-central-directory scan from the tail (comment up to 64 KiB).
    if (container.size() < 22)
        throw ZipError("not a zip: too small");
    const std::size_t max_back = std::min<std::size_t>(container.size(), 22 + 65535);
    std::size_t eocd = static_cast<std::size_t>(-1);
    for (std::size_t back = 22; back <= max_back; ++back) {
        const std::size_t i = container.size() - back;
        if (rd32(&container[i]) == 0x06054b50u) {
            eocd = i;
            break;
        }
    }
    if (eocd == static_cast<std::size_t>(-1))
        throw ZipError("not a zip: no end-of-central-directory record");

    const std::uint16_t entry_count = rd16(&container[eocd + 10]);
    const std::uint32_t cd_offset = rd32(&container[eocd + 16]);
    if (cd_offset == 0xFFFFFFFFu || entry_count == 0xFFFFu)
        throw ZipError("zip64 archives are not supported");
    if (cd_offset >= container.size())
        throw ZipError("corrupt zip: central directory offset out of range");

    struct Entry {
        std::string name;
        std::uint16_t method;
        std::uint32_t comp_size, uncomp_size, local_offset;
    };
    static const std::regex dex_name(R"(^classes[0-9]*\.dex$)");
    std::vector<Entry> dex_entries;

    std::size_t p = cd_offset;
    for (std::uint16_t e = 0; e < entry_count; ++e) {
        if (p + 46 > container.size() || rd32(&container[p]) != 0x02014b50u)
            throw ZipError("corrupt zip: bad central directory entry");
        Entry ent;
        ent.method = rd16(&container[p + 10]);
        ent.comp_size = rd32(&container[p + 20]);
        ent.uncomp_size = rd32(&container[p + 24]);
        const std::uint16_t name_len = rd16(&container[p + 28]);
        const std::uint16_t extra_len = rd16(&container[p + 30]);
        const std::uint16_t comment_len = rd16(&container[p + 32]);
        ent.local_offset = rd32(&container[p + 42]);
        if (p + 46 + name_len > container.size())
            throw ZipError("corrupt zip: entry name out of range");
        ent.name.assign(reinterpret_cast<const char*>(&container[p + 46]), name_len);
        p += 46u + name_len + extra_len + comment_len;
        if (std::regex_match(ent.name, dex_name)) dex_entries.push_back(std::move(ent));
    }
    if (dex_entries.empty())
        throw NoDexEntries("no classes*.dex entries in archive");

    std::sort(dex_entries.begin(), dex_entries.end(),
              [](const Entry& a, const Entry& b) { return a.name < b.name; });

    std::vector<std::uint8_t> out;
    for (const auto& ent : dex_entries) {
        const std::size_t lp = ent.local_offset;
        if (lp + 30 > container.size() || rd32(&container[lp]) != 0x04034b50u)
            throw ZipError("corrupt zip: bad local header for " + ent.name);
        const std::uint16_t lname = rd16(&container[lp + 26]);
        const std::uint16_t lextra = rd16(&container[lp + 28]);
        const std::size_t data_off = lp + 30u + lname + lextra;
        if (data_off + ent.comp_size > container.size())
            throw ZipError("corrupt zip: entry data out of range for " + ent.name);
        const std::span<const std::uint8_t> data{container.data() + data_off,
                                                 ent.comp_size};
        if (ent.method == 0) {
            if (ent.comp_size != ent.uncomp_size)
                throw ZipError("corrupt zip: stored entry size mismatch for " + ent.name);
            out.insert(out.end(), data.begin(), data.end());
        } else if (ent.method == 8) {
            const auto inflated = inflate_raw(data, ent.uncomp_size);
            out.insert(out.end(), inflated.begin(), inflated.end());
        } else {
            throw ZipError("unsupported compression method " +
                           std::to_string(ent.method) + " for " + ent.name);
        }
    }
    return out;
}

bool consensus_label(const std::map<std::string, bool>& vendor_detections, int threshold) {
    if (threshold < 1)
        throw std::invalid_argument("consensus_label: threshold must be >= 1");
    int positives = 0;
    for (const auto& [vendor, detected] : vendor_detections)
        if (detected) ++positives;
    return positives >= threshold;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open file: " + path.string());
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    return data;
}

}  // namespace malytics
