#include "scd/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "scd/error.hpp"

namespace scd {

std::string pair_id(const PairRecord& r) {
    return r.sequence + ":" + std::to_string(r.frame) + ":k" + std::to_string(r.k) + ":d" +
           std::to_string(r.direction);
}

namespace {

void check_token(const std::string& value, const char* field) {
    if (value.empty()) throw ValidationError(std::string("manifest field '") + field + "' is empty");
    for (char c : value) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            throw ValidationError(std::string("manifest field '") + field + "' contains whitespace: " + value);
        }
    }
}

}  // namespace

void write_manifest(const PairManifest& m, const std::filesystem::path& path) {
    check_token(m.split, "split");
    std::ostringstream out;
    out << "scd-manifest " << m.version << '\n';
    out << "split " << m.split << '\n';
    out << "note " << m.note << '\n';
    for (const auto& r : m.records) {
        check_token(r.t0, "t0");
        check_token(r.t1, "t1");
        check_token(r.gt, "gt");
        check_token(r.sequence, "sequence");
        if (!r.valid.empty()) check_token(r.valid, "valid");
        out << "pair " << r.t0 << ' ' << r.t1 << ' ' << r.gt << ' ' << (r.valid.empty() ? "-" : r.valid) << ' '
            << r.sequence << ' ' << r.frame << ' ' << r.k << ' ' << r.direction << '\n';
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot write manifest " + path.string());
    file << out.str();
    if (!file) throw IoError("write failed: " + path.string());
}

PairManifest read_manifest(const std::filesystem::path& path, bool check_files) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open manifest " + path.string());
    PairManifest m;
    m.base_dir = path.parent_path();
    const std::string where = path.string();

    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    std::set<std::pair<std::string, std::string>> seen;
    while (std::getline(file, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string at = where + ":" + std::to_string(lineno);
        if (!have_header) {
            std::istringstream in(line);
            std::string magic;
            int version = 0;
            in >> magic >> version;
            if (magic != "scd-manifest") throw ValidationError(at + ": not a scd-manifest file");
            if (version != kManifestVersion) {
                throw ValidationError(at + ": manifest version " + std::to_string(version) + ", expected " +
                                      std::to_string(kManifestVersion));
            }
            m.version = version;
            have_header = true;
            continue;
        }
        if (line.empty() || line[0] == '#') continue;
        const auto space = line.find(' ');
        const std::string key = line.substr(0, space);
        const std::string rest = space == std::string::npos ? "" : line.substr(space + 1);
        if (key == "split") {
            m.split = rest;
        } else if (key == "note") {
            m.note = rest;
        } else if (key == "pair") {
            std::istringstream in(rest);
            PairRecord r;
            std::string valid;
            in >> r.t0 >> r.t1 >> r.gt >> valid >> r.sequence >> r.frame >> r.k >> r.direction;
            std::string extra;
            if (!in || (in >> extra)) throw ValidationError(at + ": malformed pair record");
            if (valid != "-") r.valid = valid;
            if (!seen.emplace(r.t0, r.t1).second) {
                throw ValidationError(at + ": duplicate record (" + r.t0 + ", " + r.t1 + ")");
            }
            m.records.push_back(std::move(r));
        } else {
            throw ValidationError(at + ": unknown key '" + key + "'");
        }
    }
    if (!have_header) throw ValidationError(where + ": empty manifest");
    if (check_files) validate_files(m);
    return m;
}

void validate_files(const PairManifest& m) {
    for (std::size_t i = 0; i < m.records.size(); ++i) {
        const auto& r = m.records[i];
        const std::pair<const char*, const std::string*> fields[] = {
            {"t0", &r.t0}, {"t1", &r.t1}, {"gt", &r.gt}, {"valid", &r.valid}};
        for (const auto& [name, value] : fields) {
            if (value->empty()) continue;
            if (!std::filesystem::exists(m.resolve(*value))) {
                throw ValidationError("record " + std::to_string(i) + " (" + pair_id(r) + "): missing " + name +
                                      " file " + *value);
            }
        }
    }
}

}  // namespace scd
