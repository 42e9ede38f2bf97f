#pragma once

// Pair manifests: the ordered list of (t0, t1, ground truth) records that defines a
// split. Stored as line-oriented text:
//
//   scd-manifest 1
//   split <name>
//   note <free text>
//   pair <t0> <t1> <gt> <valid|-> <sequence> <frame> <k> <direction>
//
// Paths are relative to the manifest's directory and may not contain whitespace.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace scd {

inline constexpr int kManifestVersion = 1;

struct PairRecord {
    std::string t0;
    std::string t1;
    std::string gt;     // mask in t0 coordinates
    std::string valid;  // optional validity mask; empty when every pixel counts
    std::string sequence;
    std::size_t frame = 0;  // position of the t0 view within its sequence
    std::size_t k = 0;      // neighbour distance, 0 = aligned
    std::uint32_t direction = 0;

    bool operator==(const PairRecord&) const = default;
};

// Stable identifier used in reports.
std::string pair_id(const PairRecord& record);

struct PairManifest {
    int version = kManifestVersion;
    std::string split;
    std::string note;
    std::vector<PairRecord> records;
    std::filesystem::path base_dir;  // runtime only, where relative paths resolve

    std::filesystem::path resolve(const std::string& rel) const { return base_dir / rel; }
    bool operator==(const PairManifest& o) const {
        return version == o.version && split == o.split && note == o.note && records == o.records;
    }
};

void write_manifest(const PairManifest& manifest, const std::filesystem::path& path);

// Checks the version, rejects duplicate (t0, t1) records, and, when check_files is
// set, that every referenced file exists.
PairManifest read_manifest(const std::filesystem::path& path, bool check_files = true);

// Throws ValidationError naming the first record with a missing file.
void validate_files(const PairManifest& manifest);

}  // namespace scd
