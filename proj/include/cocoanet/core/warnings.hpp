#pragma once

#include <atomic>
#include <cstdio>
#include <map>
#include <mutex>
#include <string>

namespace cocoanet::warnings {

// Counters for soft conditions the library flags but does not fail on
// (probability clamped in the loss, degenerate layer-norm width, ...).
// Each key logs to stderr the first time it fires; tests read the counters.

namespace detail {
struct Registry {
    std::mutex mu;
    std::map<std::string, long long> counts;
};
inline Registry& registry() {
    static Registry r;
    return r;
}
} // namespace detail

inline void raise(const std::string& key, const std::string& message) {
    auto& r = detail::registry();
    std::lock_guard<std::mutex> lock(r.mu);
    long long& n = r.counts[key];
    if (n == 0) {
        std::fprintf(stderr, "warning: %s\n", message.c_str());
    }
    ++n;
}

inline long long count(const std::string& key) {
    auto& r = detail::registry();
    std::lock_guard<std::mutex> lock(r.mu);
    auto it = r.counts.find(key);
    return it == r.counts.end() ? 0 : it->second;
}

inline void reset(const std::string& key) {
    auto& r = detail::registry();
    std::lock_guard<std::mutex> lock(r.mu);
    r.counts.erase(key);
}

} // namespace cocoanet::warnings
