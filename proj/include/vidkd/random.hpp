#pragma once

#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <string_view>
#include <type_traits>

namespace vidkd {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// 64-bit FNV-1a, used for content checksums and stable string hashing.
class Fnv1a {
public:
    void update(const void* bytes, std::size_t count) {
        const auto* p = static_cast<const unsigned char*>(bytes);
        for (std::size_t i = 0; i < count; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
    }
    void update(std::string_view text) { update(text.data(), text.size()); }
    void update(std::span<const float> values) { update(values.data(), values.size_bytes()); }
    std::uint64_t digest() const noexcept { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t hash_string(std::string_view text) {
    Fnv1a h;
    h.update(text);
    return h.digest();
}

/// Derives an independent stream seed from a base seed and a list of labels/indices.
template <typename... Parts>
std::uint64_t derive_seed(std::uint64_t base, const Parts&... parts) {
    std::uint64_t s = splitmix64(base);
    auto mix = [&s](const auto& part) {
        using T = std::decay_t<decltype(part)>;
        if constexpr (std::is_convertible_v<T, std::string_view>) {
            s = splitmix64(s ^ hash_string(std::string_view(part)));
        } else {
            s = splitmix64(s ^ static_cast<std::uint64_t>(part));
        }
    };
    (mix(parts), ...);
    return s;
}

}  // namespace vidkd
