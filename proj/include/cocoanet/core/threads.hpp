#pragma once

#include <cstdlib>

#include "blas.hpp"
#include "warnings.hpp"

namespace cocoanet {

// COCOA_THREADS=0 (or unset) is the deterministic contract: everything runs
// on one thread, including the BLAS. A positive value only widens the BLAS
// thread pool; the toolkit's own loops stay serial either way, so results
// remain bit-stable run to run on the same machine.
inline int requested_threads() {
    const char* env = std::getenv("COCOA_THREADS");
    if (!env || !*env) return 0;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 0 || v > 4096) {
        warnings::raise("bad_cocoa_threads",
                        "COCOA_THREADS is not a small non-negative integer; treating as 0");
        return 0;
    }
    return static_cast<int>(v);
}

inline void configure_parallelism() {
    const int n = requested_threads();
    blas::set_threads(n == 0 ? 1 : n);
}

} // namespace cocoanet
