#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ffoptics/linalg.hpp"

namespace ffo {

// Minimal named-array container: double or complex payloads addressed by
// name, with row/col counts. Used for the fiber medium cache and the
// per-stage representation caches.
struct ArrayStore {
    std::map<std::string, Mat> real;
    std::map<std::string, CMat> cplx;
    std::map<std::string, std::uint64_t> meta;

    void save(const std::string& path) const;
    static ArrayStore load(const std::string& path);
};

// directory from FFOPTICS_CACHE_DIR, default "ffoptics_cache"
std::string cache_dir();

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h = 1469598103934665603ull);

}  // namespace ffo
