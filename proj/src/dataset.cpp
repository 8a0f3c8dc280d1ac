#include "ffoptics/dataset.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "ffoptics/common.hpp"

namespace ffo {

namespace {

std::uint32_t read_be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MalformedInput("cannot open " + path);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<RawImage> parse_idx_images(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16) throw MalformedInput("image header truncated");
    if (read_be32(bytes.data()) != 0x00000803)
        throw MalformedInput("bad image magic");
    std::uint64_t n = read_be32(bytes.data() + 4);
    std::uint32_t rows = read_be32(bytes.data() + 8);
    std::uint32_t cols = read_be32(bytes.data() + 12);
    if (rows != 28 || cols != 28) throw MalformedInput("expected 28x28 images");
    if (n > (std::uint64_t(1) << 32) / 784)
        throw MalformedInput("dimension overflow");
    if (bytes.size() != 16 + n * 784) throw MalformedInput("image payload size mismatch");
    std::vector<RawImage> out(n);
    for (std::uint64_t i = 0; i < n; ++i)
        std::memcpy(out[i].pixels, bytes.data() + 16 + i * 784, 784);
    return out;
}

std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8) throw MalformedInput("label header truncated");
    if (read_be32(bytes.data()) != 0x00000801)
        throw MalformedInput("bad label magic");
    std::uint64_t n = read_be32(bytes.data() + 4);
    if (bytes.size() != 8 + n) throw MalformedInput("label payload size mismatch");
    std::vector<int> out(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        if (bytes[8 + i] > 9) throw MalformedInput("label out of range");
        out[i] = bytes[8 + i];
    }
    return out;
}

std::vector<std::uint8_t> serialize_idx_images(const std::vector<RawImage>& imgs) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + imgs.size() * 784);
    write_be32(out, 0x00000803);
    write_be32(out, std::uint32_t(imgs.size()));
    write_be32(out, 28);
    write_be32(out, 28);
    for (const auto& img : imgs)
        out.insert(out.end(), img.pixels, img.pixels + 784);
    return out;
}

std::vector<std::uint8_t> serialize_idx_labels(const std::vector<int>& labels) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + labels.size());
    write_be32(out, 0x00000801);
    write_be32(out, std::uint32_t(labels.size()));
    for (int l : labels) out.push_back(std::uint8_t(l));
    return out;
}

Dataset load_mnist_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    Dataset d;
    d.images = parse_idx_images(read_file((fs::path(dir) / "train-images-idx3-ubyte").string()));
    d.labels = parse_idx_labels(read_file((fs::path(dir) / "train-labels-idx1-ubyte").string()));
    if (d.images.size() != d.labels.size())
        throw MalformedInput("image/label count mismatch");
    return d;
}

Splits make_splits(int pool_size, const SplitSpec& spec) {
    long need = long(spec.n_train) + spec.n_val + spec.n_test;
    if (pool_size < need)
        throw InsufficientData("pool " + std::to_string(pool_size) + " < " + std::to_string(need));
    std::vector<int> idx(pool_size);
    for (int i = 0; i < pool_size; ++i) idx[i] = i;
    Rng rng(spec.seed);
    for (int i = pool_size - 1; i > 0; --i)
        std::swap(idx[i], idx[rng.below(std::uint64_t(i) + 1)]);
    Splits s;
    s.train.assign(idx.begin(), idx.begin() + spec.n_train);
    s.val.assign(idx.begin() + spec.n_train, idx.begin() + spec.n_train + spec.n_val);
    s.test.assign(idx.begin() + spec.n_train + spec.n_val, idx.begin() + need);
    return s;
}

Canvas pad_to_canvas(const RawImage& raw) {
    Canvas c(kCanvasSize, 0.0);
    for (int i = 0; i < 28; ++i)
        for (int j = 0; j < 28; ++j)
            c[(i + 2) * kCanvasSide + (j + 2)] = raw.pixels[i * 28 + j] / 255.0;
    return c;
}

EmbeddedSample embed_label(const Canvas& canvas, int true_class, Polarity polarity, Rng& rng) {
    EmbeddedSample s;
    s.pixels = canvas;
    s.true_class = true_class;
    s.polarity = polarity;
    for (int j = 0; j < 10; ++j) s.pixels[j] = 0.0;
    switch (polarity) {
        case Polarity::positive:
            s.marked_class = true_class;
            s.pixels[s.marked_class] = 1.0;
            break;
        case Polarity::negative: {
            int k = int(rng.below(9));
            s.marked_class = k < true_class ? k : k + 1;
            s.pixels[s.marked_class] = 1.0;
            break;
        }
        case Polarity::neutral:
            s.marked_class = -1;
            for (int j = 0; j < 10; ++j) s.pixels[j] = 0.1;
            break;
    }
    return s;
}

}  // namespace ffo
