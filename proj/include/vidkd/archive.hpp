#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include "vidkd/error.hpp"
#include "vidkd/json_util.hpp"
#include "vidkd/random.hpp"
#include "vidkd/tensor.hpp"

namespace vidkd {

static_assert(std::endian::native == std::endian::little, "archives are written in little-endian order");

inline constexpr char kArchiveMagic[8] = {'V', 'I', 'D', 'K', 'D', 'A', 'R', 'C'};
inline constexpr std::uint32_t kArchiveFormatVersion = 1;

/// Named float32 tensors plus a JSON metadata document.
///
/// On disk: 8-byte magic, u32 format version, u64 header length, JSON header (metadata and a
/// table of tensor names/shapes/dtypes/offsets), the raw tensor payload, and a trailing u64
/// FNV-1a checksum over everything before it.
struct Archive {
    Json meta = Json::object();
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find(const std::string& name) const {
        for (const auto& [n, t] : tensors) {
            if (n == name) {
                return &t;
            }
        }
        return nullptr;
    }
};

namespace detail {

template <typename T>
void append_pod(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T read_pod(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) {
        throw FormatError("archive truncated");
    }
    T value;
    std::memcpy(&value, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return value;
}

}  // namespace detail

inline std::string serialize_archive(const Archive& a) {
    Json table = Json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : a.tensors) {
        table.push_back({{"name", name}, {"shape", t.shape()}, {"dtype", "float32"}, {"offset", offset},
                         {"count", t.size()}});
        offset += t.size();
    }
    const Json header = {{"format_version", kArchiveFormatVersion}, {"meta", a.meta}, {"tensors", table}};
    const std::string header_text = header.dump();
    std::string out(kArchiveMagic, sizeof(kArchiveMagic));
    detail::append_pod<std::uint32_t>(out, kArchiveFormatVersion);
    detail::append_pod<std::uint64_t>(out, header_text.size());
    out += header_text;
    for (const auto& [_, t] : a.tensors) {
        out.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(float));
    }
    Fnv1a h;
    h.update(out);
    detail::append_pod<std::uint64_t>(out, h.digest());
    return out;
}

inline Archive deserialize_archive(const std::string& bytes) {
    if (bytes.size() < sizeof(kArchiveMagic) + 4 + 8 + 8 ||
        std::memcmp(bytes.data(), kArchiveMagic, sizeof(kArchiveMagic)) != 0) {
        throw FormatError("not an archive (bad magic or truncated)");
    }
    const std::size_t body = bytes.size() - sizeof(std::uint64_t);
    Fnv1a h;
    h.update(std::string_view(bytes.data(), body));
    std::size_t tail = body;
    if (detail::read_pod<std::uint64_t>(bytes, tail) != h.digest()) {
        throw FormatError("archive checksum mismatch (truncated or corrupt)");
    }
    std::size_t pos = sizeof(kArchiveMagic);
    const auto version = detail::read_pod<std::uint32_t>(bytes, pos);
    if (version != kArchiveFormatVersion) {
        throw FormatError("unsupported archive format version " + std::to_string(version));
    }
    const auto header_len = detail::read_pod<std::uint64_t>(bytes, pos);
    if (pos + header_len > body) {
        throw FormatError("archive header truncated");
    }
    Json header;
    try {
        header = Json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                             bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
    } catch (const Json::exception& e) {
        throw FormatError(std::string("archive header is not valid JSON: ") + e.what());
    }
    pos += header_len;
    Archive a;
    a.meta = header.value("meta", Json::object());
    const std::size_t payload = pos;
    for (const auto& entry : header.at("tensors")) {
        if (entry.value("dtype", "") != "float32") {
            throw FormatError("unsupported tensor dtype in archive");
        }
        const auto shape = entry.at("shape").get<Shape>();
        const auto offset = entry.at("offset").get<std::uint64_t>();
        const auto count = entry.at("count").get<std::uint64_t>();
        if (count != element_count(shape)) {
            throw FormatError("tensor '" + entry.at("name").get<std::string>() + "' count disagrees with its shape");
        }
        const std::size_t begin = payload + offset * sizeof(float);
        if (begin + count * sizeof(float) > body) {
            throw FormatError("tensor payload truncated");
        }
        std::vector<float> values(count);
        std::memcpy(values.data(), bytes.data() + begin, count * sizeof(float));
        a.tensors.emplace_back(entry.at("name").get<std::string>(), Tensor(shape, std::move(values)));
    }
    return a;
}

inline void write_archive(const std::filesystem::path& path, const Archive& a) {
    const std::string bytes = serialize_archive(a);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write '" + path.string() + "'");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

inline Archive read_archive(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return deserialize_archive(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace vidkd
