#pragma once

#include <json.hpp>

#include <set>
#include <string>

#include "vidkd/error.hpp"

namespace vidkd {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

/// Strict reader for one JSON object: typed field access plus rejection of unknown keys.
class ObjectReader {
public:
    ObjectReader(const Json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
        if (!obj_.is_object()) {
            throw ConfigError(where_ + ": expected an object");
        }
    }

    bool has(const std::string& key) const { return obj_.contains(key); }

    template <typename T>
    T get(const std::string& key, const T& fallback) {
        seen_.insert(key);
        if (!obj_.contains(key)) {
            return fallback;
        }
        return convert<T>(key);
    }

    template <typename T>
    T require(const std::string& key) {
        seen_.insert(key);
        if (!obj_.contains(key)) {
            throw ConfigError(where_ + ": missing key '" + key + "'");
        }
        return convert<T>(key);
    }

    const Json& child(const std::string& key) {
        seen_.insert(key);
        static const Json empty = Json::object();
        return obj_.contains(key) ? obj_.at(key) : empty;
    }

    std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

    /// Throws if the object carries keys that were never read.
    void finish() const {
        for (const auto& [key, _] : obj_.items()) {
            if (!seen_.count(key)) {
                throw ConfigError(where_ + ": unknown key '" + key + "'");
            }
        }
    }

private:
    template <typename T>
    T convert(const std::string& key) const {
        try {
            return obj_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(where_ + ": key '" + key + "' has the wrong type");
        }
    }

    const Json& obj_;
    std::string where_;
    std::set<std::string> seen_;
};

}  // namespace vidkd
