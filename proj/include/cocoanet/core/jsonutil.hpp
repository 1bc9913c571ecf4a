#pragma once

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "error.hpp"

namespace cocoanet::jsonutil {

using json = nlohmann::json;

// Config surfaces reject unknown keys outright; a typo that silently falls
// back to a default is worse than an error.
inline void require_known_keys(const json& obj, const std::string& where,
                               std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) throw ConfigError(where + ": unknown key \"" + it.key() + "\"");
    }
}

inline double get_number(const json& obj, const std::string& where, const char* key,
                         double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
    return v.get<double>();
}

inline long get_integer(const json& obj, const std::string& where, const char* key,
                        long fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
    return v.get<long>();
}

inline std::string get_string(const json& obj, const std::string& where, const char* key,
                              const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
    return v.get<std::string>();
}

inline bool get_bool(const json& obj, const std::string& where, const char* key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) throw ConfigError(where + "." + key + ": expected a boolean");
    return v.get<bool>();
}

} // namespace cocoanet::jsonutil
