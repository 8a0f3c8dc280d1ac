#include "ffoptics/cache.hpp"

#include <cstdlib>
#include <cstring>
#include <fstream>

#include "ffoptics/common.hpp"

namespace ffo {

namespace {

constexpr char kMagic[8] = {'F', 'F', 'O', 'N', 'A', 'R', 'Y', '1'};

template <class T>
void put(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& f) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw CorruptFile("truncated array store");
    return v;
}

void put_name(std::ofstream& f, const std::string& s) {
    put(f, std::uint16_t(s.size()));
    f.write(s.data(), std::streamsize(s.size()));
}

std::string get_name(std::ifstream& f) {
    auto n = get<std::uint16_t>(f);
    std::string s(n, '\0');
    f.read(s.data(), n);
    if (!f) throw CorruptFile("truncated name");
    return s;
}

}  // namespace

void ArrayStore::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw CorruptFile("cannot write " + path);
    f.write(kMagic, 8);
    put(f, std::uint32_t(real.size()));
    put(f, std::uint32_t(cplx.size()));
    put(f, std::uint32_t(meta.size()));
    for (const auto& [name, m] : real) {
        put_name(f, name);
        put(f, std::uint64_t(m.rows()));
        put(f, std::uint64_t(m.cols()));
        f.write(reinterpret_cast<const char*>(m.data()),
                std::streamsize(sizeof(double) * m.size()));
    }
    for (const auto& [name, m] : cplx) {
        put_name(f, name);
        put(f, std::uint64_t(m.rows()));
        put(f, std::uint64_t(m.cols()));
        f.write(reinterpret_cast<const char*>(m.data()),
                std::streamsize(2 * sizeof(double) * m.size()));
    }
    for (const auto& [name, v] : meta) {
        put_name(f, name);
        put(f, v);
    }
}

ArrayStore ArrayStore::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CorruptFile("cannot read " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0) throw CorruptFile("bad array store magic");
    ArrayStore st;
    auto nreal = get<std::uint32_t>(f);
    auto ncplx = get<std::uint32_t>(f);
    auto nmeta = get<std::uint32_t>(f);
    for (std::uint32_t i = 0; i < nreal; ++i) {
        std::string name = get_name(f);
        auto rows = get<std::uint64_t>(f);
        auto cols = get<std::uint64_t>(f);
        Mat m(rows, cols);
        f.read(reinterpret_cast<char*>(m.data()), std::streamsize(sizeof(double) * m.size()));
        if (!f) throw CorruptFile("truncated payload for " + name);
        st.real.emplace(name, std::move(m));
    }
    for (std::uint32_t i = 0; i < ncplx; ++i) {
        std::string name = get_name(f);
        auto rows = get<std::uint64_t>(f);
        auto cols = get<std::uint64_t>(f);
        CMat m(rows, cols);
        f.read(reinterpret_cast<char*>(m.data()), std::streamsize(2 * sizeof(double) * m.size()));
        if (!f) throw CorruptFile("truncated payload for " + name);
        st.cplx.emplace(name, std::move(m));
    }
    for (std::uint32_t i = 0; i < nmeta; ++i) {
        std::string name = get_name(f);
        st.meta.emplace(name, get<std::uint64_t>(f));
    }
    return st;
}

std::string cache_dir() {
    if (const char* env = std::getenv("FFOPTICS_CACHE_DIR"); env && *env) return env;
    return "ffoptics_cache";
}

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace ffo
