#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ffoptics/common.hpp"
#include "ffoptics/rng.hpp"

namespace ffo {

struct RawImage {
    std::uint8_t pixels[784];
};

// 32x32 real canvas in [0,1], row-major
using Canvas = std::vector<double>;

enum class Polarity { positive, negative, neutral };

struct EmbeddedSample {
    Canvas pixels;
    int true_class = 0;
    Polarity polarity = Polarity::positive;
    int marked_class = 0;  // meaningless for neutral (uniform marking)
};

struct SplitSpec {
    std::uint64_t seed = 7;
    int n_train = 4000;
    int n_val = 1000;
    int n_test = 1000;
};

struct Splits {
    std::vector<int> train, val, test;
};

struct Dataset {
    std::vector<RawImage> images;
    std::vector<int> labels;
};

// IDX container parsing (big-endian headers, magic 0x803 images / 0x801 labels)
std::vector<RawImage> parse_idx_images(const std::vector<std::uint8_t>& bytes);
std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> serialize_idx_images(const std::vector<RawImage>& imgs);
std::vector<std::uint8_t> serialize_idx_labels(const std::vector<int>& labels);

Dataset load_mnist_dir(const std::string& dir);

Splits make_splits(int pool_size, const SplitSpec& spec);

Canvas pad_to_canvas(const RawImage& raw);

// Overwrites row 0, columns 0..9 of the canvas. positive: one-hot at the true
// class; negative: one-hot at a wrong class drawn from rng; neutral: uniform
// 0.1 across all ten marking pixels.
EmbeddedSample embed_label(const Canvas& canvas, int true_class, Polarity polarity, Rng& rng);

}  // namespace ffo
