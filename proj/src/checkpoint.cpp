#include "ffoptics/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "ffoptics/common.hpp"

namespace ffo {

namespace {

constexpr char kMagic[4] = {'F', 'F', 'O', 'C'};

struct Writer {
    std::vector<char> buf;
    void bytes(const void* p, std::size_t n) {
        const char* c = static_cast<const char*>(p);
        buf.insert(buf.end(), c, c + n);
    }
    template <class T>
    void pod(const T& v) {
        bytes(&v, sizeof(T));
    }
    void str(const std::string& s) {
        pod(std::uint64_t(s.size()));
        bytes(s.data(), s.size());
    }
    void mat(const Mat& m) {
        pod(std::uint64_t(m.rows()));
        pod(std::uint64_t(m.cols()));
        bytes(m.data(), sizeof(double) * m.size());
    }
    void vec(const Vec& v) {
        pod(std::uint64_t(v.size()));
        bytes(v.data(), sizeof(double) * v.size());
    }
};

struct Reader {
    const char* p;
    const char* end;
    void bytes(void* out, std::size_t n) {
        if (p + n > end) throw CorruptFile("payload truncated");
        std::memcpy(out, p, n);
        p += n;
    }
    template <class T>
    T pod() {
        T v{};
        bytes(&v, sizeof(T));
        return v;
    }
    std::string str() {
        auto n = pod<std::uint64_t>();
        if (p + n > end) throw CorruptFile("string truncated");
        std::string s(p, p + n);
        p += n;
        return s;
    }
    Mat mat() {
        auto r = pod<std::uint64_t>();
        auto c = pod<std::uint64_t>();
        Mat m(r, c);
        bytes(m.data(), sizeof(double) * m.size());
        return m;
    }
    Vec vec() {
        auto n = pod<std::uint64_t>();
        Vec v(n);
        bytes(v.data(), sizeof(double) * v.size());
        return v;
    }
};

}  // namespace

long Checkpoint::trainable_params() const {
    long n = 0;
    for (const auto& l : layers) {
        (void)l;
        n += 26;  // 25 kernel weights + bias
    }
    if (fc_weights) n += fc_weights->size() + fc_bias->size();
    if (ridge) n += ridge->weights.size() + ridge->intercepts.size();
    return n;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    Writer w;
    w.str(config_text(ckpt.config));
    w.pod(std::uint64_t(config_hash(ckpt.config)));
    w.pod(std::uint32_t(ckpt.layers.size()));
    for (const auto& l : ckpt.layers) {
        w.bytes(l.kernel.data(), sizeof(double) * 25);
        w.pod(l.bias);
        w.pod(std::int32_t(l.dilation));
        w.pod(l.theta);
    }
    w.pod(std::uint8_t(ckpt.fc_weights.has_value()));
    if (ckpt.fc_weights) {
        w.mat(*ckpt.fc_weights);
        w.vec(*ckpt.fc_bias);
    }
    w.pod(std::uint8_t(ckpt.ridge.has_value()));
    if (ckpt.ridge) {
        w.mat(ckpt.ridge->weights);
        w.vec(ckpt.ridge->feature_mean);
        w.vec(ckpt.ridge->intercepts);
        w.pod(ckpt.ridge->alpha);
    }
    w.pod(ckpt.fiber_cache_key);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw CorruptFile("cannot write " + path);
    f.write(kMagic, 4);
    std::uint32_t version = ckpt.version;
    f.write(reinterpret_cast<const char*>(&version), 4);
    std::uint64_t n = w.buf.size();
    f.write(reinterpret_cast<const char*>(&n), 8);
    f.write(w.buf.data(), std::streamsize(w.buf.size()));
    std::uint32_t crc = std::uint32_t(
        crc32(0, reinterpret_cast<const Bytef*>(w.buf.data()), uInt(w.buf.size())));
    f.write(reinterpret_cast<const char*>(&crc), 4);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CorruptFile("cannot read " + path);
    std::vector<char> all{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
    if (all.size() < 20) throw CorruptFile("checkpoint too short");
    if (std::memcmp(all.data(), kMagic, 4) != 0) throw CorruptFile("bad checkpoint magic");
    std::uint32_t version;
    std::memcpy(&version, all.data() + 4, 4);
    if (version != kCheckpointVersion)
        throw VersionMismatch("checkpoint version " + std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));
    std::uint64_t n;
    std::memcpy(&n, all.data() + 8, 8);
    if (all.size() != 16 + n + 4) throw CorruptFile("checkpoint size mismatch");
    std::uint32_t stored;
    std::memcpy(&stored, all.data() + 16 + n, 4);
    std::uint32_t actual = std::uint32_t(
        crc32(0, reinterpret_cast<const Bytef*>(all.data() + 16), uInt(n)));
    if (stored != actual) throw CorruptFile("checksum mismatch");

    Reader r{all.data() + 16, all.data() + 16 + n};
    Checkpoint c;
    c.version = version;
    std::string cfg_text = r.str();
    c.config = parse_config_text(cfg_text);
    std::uint64_t h = r.pod<std::uint64_t>();
    if (h != config_hash(c.config)) throw CorruptFile("config hash mismatch");
    auto nl = r.pod<std::uint32_t>();
    c.layers.resize(nl);
    for (auto& l : c.layers) {
        r.bytes(l.kernel.data(), sizeof(double) * 25);
        l.bias = r.pod<double>();
        l.dilation = r.pod<std::int32_t>();
        l.theta = r.pod<double>();
    }
    if (r.pod<std::uint8_t>()) {
        c.fc_weights = r.mat();
        c.fc_bias = r.vec();
    }
    if (r.pod<std::uint8_t>()) {
        RidgeModel m;
        m.weights = r.mat();
        m.feature_mean = r.vec();
        m.intercepts = r.vec();
        m.alpha = r.pod<double>();
        c.ridge = m;
    }
    c.fiber_cache_key = r.pod<std::uint64_t>();
    return c;
}

}  // namespace ffo
