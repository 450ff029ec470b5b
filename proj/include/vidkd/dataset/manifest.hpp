#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vidkd/error.hpp"
#include "vidkd/random.hpp"

namespace vidkd {

namespace fs = std::filesystem;

inline constexpr const char* kManifestFormat = "vidkd-manifest";
inline constexpr const char* kManifestVersion = "1";

/// Ordered class names; class index i refers to names()[i].
class ClassVocabulary {
public:
    ClassVocabulary() = default;

    explicit ClassVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
        if (names_.empty()) {
            throw FormatError("class vocabulary must contain at least one class");
        }
        std::set<std::string> seen;
        for (const auto& n : names_) {
            if (n.empty()) {
                throw FormatError("class names must be non-empty");
            }
            if (!seen.insert(n).second) {
                throw FormatError("duplicate class name '" + n + "'");
            }
        }
    }

    std::size_t size() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    const std::string& name(std::size_t index) const { return names_.at(index); }

    std::optional<int> index_of(const std::string& name) const {
        const auto it = std::find(names_.begin(), names_.end(), name);
        if (it == names_.end()) {
            return std::nullopt;
        }
        return static_cast<int>(it - names_.begin());
    }

    bool operator==(const ClassVocabulary&) const = default;

private:
    std::vector<std::string> names_;
};

enum class Split { train, val };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "val"; }

inline Split parse_split(const std::string& text) {
    if (text == "train") {
        return Split::train;
    }
    if (text == "val") {
        return Split::val;
    }
    throw FormatError("unknown split '" + text + "' (expected train or val)");
}

struct ClipRecord {
    std::string clip_id;
    std::string path;  // relative to the manifest directory unless absolute
    int label_index = 0;
    Split split = Split::train;
    int frame_count = 1;

    bool operator==(const ClipRecord&) const = default;
};

struct ClipManifest {
    ClassVocabulary vocabulary;
    std::vector<ClipRecord> records;
    std::string version = kManifestVersion;
    fs::path root;  // directory that relative clip paths resolve against

    std::size_t num_classes() const noexcept { return vocabulary.size(); }

    fs::path resolve(const ClipRecord& r) const {
        const fs::path p(r.path);
        return p.is_absolute() ? p : root / p;
    }

    std::vector<std::size_t> indices(Split split) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (records[i].split == split) {
                out.push_back(i);
            }
        }
        return out;
    }

    std::size_t count(Split split) const { return indices(split).size(); }

    /// Content equality; the root directory is a location, not content.
    bool operator==(const ClipManifest& o) const {
        return vocabulary == o.vocabulary && records == o.records && version == o.version;
    }
};

/// Checks every record invariant; throws FormatError naming the offending record.
inline void validate(const ClipManifest& m) {
    std::set<std::string> ids;
    for (std::size_t i = 0; i < m.records.size(); ++i) {
        const auto& r = m.records[i];
        const std::string where = "record " + std::to_string(i + 1) + " ('" + r.clip_id + "')";
        if (r.clip_id.empty()) {
            throw FormatError("record " + std::to_string(i + 1) + ": field 'clip_id' must be non-empty");
        }
        if (!ids.insert(r.clip_id).second) {
            throw FormatError("duplicate clip_id '" + r.clip_id + "'");
        }
        if (r.path.empty()) {
            throw FormatError(where + ": field 'path' must be non-empty");
        }
        if (r.label_index < 0 || static_cast<std::size_t>(r.label_index) >= m.vocabulary.size()) {
            throw FormatError(where + ": field 'label' index out of range");
        }
        if (r.frame_count < 1) {
            throw FormatError(where + ": field 'frame_count' must be >= 1");
        }
    }
}

namespace detail {

template <typename T>
T require_field(const nlohmann::json& obj, const char* field, const std::string& where) {
    if (!obj.contains(field)) {
        throw FormatError(where + ": missing field '" + field + "'");
    }
    try {
        return obj.at(field).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw FormatError(where + ": field '" + field + "' has the wrong type");
    }
}

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> known,
                           const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
            throw FormatError(where + ": unknown field '" + key + "'");
        }
    }
}

}  // namespace detail

inline ClipManifest parse_manifest(std::istream& in, const fs::path& root = {}) {
    ClipManifest m;
    m.root = root;
    std::string line;
    int line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const std::string where = "line " + std::to_string(line_no);
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError(where + ": not valid JSON (" + e.what() + ")");
        }
        if (!obj.is_object()) {
            throw FormatError(where + ": expected a JSON object");
        }
        if (!have_header) {
            detail::reject_unknown(obj, {"format", "version", "class_names"}, where);
            if (obj.contains("format") && obj["format"] != kManifestFormat) {
                throw FormatError(where + ": field 'format' must be '" + std::string(kManifestFormat) + "'");
            }
            m.version = detail::require_field<std::string>(obj, "version", where);
            if (m.version != kManifestVersion) {
                throw FormatError(where + ": unsupported manifest version '" + m.version + "'");
            }
            m.vocabulary = ClassVocabulary(detail::require_field<std::vector<std::string>>(obj, "class_names", where));
            have_header = true;
            continue;
        }
        detail::reject_unknown(obj, {"clip_id", "path", "label", "split", "frame_count"}, where);
        ClipRecord r;
        r.clip_id = detail::require_field<std::string>(obj, "clip_id", where);
        r.path = detail::require_field<std::string>(obj, "path", where);
        const auto label = detail::require_field<std::string>(obj, "label", where);
        const auto index = m.vocabulary.index_of(label);
        if (!index) {
            throw FormatError(where + ": unknown label name '" + label + "'");
        }
        r.label_index = *index;
        try {
            r.split = parse_split(detail::require_field<std::string>(obj, "split", where));
        } catch (const FormatError& e) {
            throw FormatError(where + ": field 'split': " + e.what());
        }
        r.frame_count = detail::require_field<int>(obj, "frame_count", where);
        if (r.frame_count < 1) {
            throw FormatError(where + ": field 'frame_count' must be >= 1");
        }
        m.records.push_back(std::move(r));
    }
    if (!have_header) {
        throw FormatError("manifest has no header line");
    }
    validate(m);
    return m;
}

inline ClipManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open manifest '" + path.string() + "'");
    }
    try {
        return parse_manifest(in, path.parent_path());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

inline void write_manifest(std::ostream& out, const ClipManifest& m) {
    validate(m);
    nlohmann::ordered_json header;
    header["format"] = kManifestFormat;
    header["version"] = m.version;
    header["class_names"] = m.vocabulary.names();
    out << header.dump() << '\n';
    for (const auto& r : m.records) {
        nlohmann::ordered_json line;
        line["clip_id"] = r.clip_id;
        line["path"] = r.path;
        line["label"] = m.vocabulary.name(static_cast<std::size_t>(r.label_index));
        line["split"] = to_string(r.split);
        line["frame_count"] = r.frame_count;
        out << line.dump() << '\n';
    }
}

inline void write_manifest(const fs::path& path, const ClipManifest& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write manifest '" + path.string() + "'");
    }
    write_manifest(out, m);
    if (!out) {
        throw IoError("failed writing manifest '" + path.string() + "'");
    }
}

/// Seeded stratified train/val assignment. Within each class a seeded permutation decides which
/// clips go to validation; a class with two or more clips always keeps at least one of each.
inline void assign_stratified_splits(ClipManifest& m, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("train fraction must lie in (0, 1)");
    }
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < m.records.size(); ++i) {
        by_class[m.records[i].label_index].push_back(i);
    }
    for (auto& [label, members] : by_class) {
        Rng rng(derive_seed(seed, "split", label));
        std::shuffle(members.begin(), members.end(), rng);
        const auto n = members.size();
        auto val = static_cast<std::size_t>(std::llround((1.0 - train_fraction) * static_cast<double>(n)));
        if (n >= 2) {
            val = std::clamp<std::size_t>(val, 1, n - 1);
        } else {
            val = 0;
        }
        for (std::size_t j = 0; j < n; ++j) {
            m.records[members[j]].split = j < n - val ? Split::train : Split::val;
        }
    }
}

}  // namespace vidkd
