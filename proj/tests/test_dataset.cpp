#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "ffoptics/dataset.hpp"

using namespace ffo;

namespace {

std::vector<std::uint8_t> be32(std::uint32_t v) {
    return {std::uint8_t(v >> 24), std::uint8_t(v >> 16), std::uint8_t(v >> 8), std::uint8_t(v)};
}

std::vector<std::uint8_t> idx_image_bytes(int count) {
    std::vector<std::uint8_t> b;
    for (std::uint32_t v : {0x803u, std::uint32_t(count), 28u, 28u}) {
        auto h = be32(v);
        b.insert(b.end(), h.begin(), h.end());
    }
    for (int i = 0; i < count * 784; ++i) b.push_back(std::uint8_t(i * 7 + 13));
    return b;
}

}  // namespace

TEST_CASE("idx image parsing returns all records") {
    auto bytes = idx_image_bytes(2);
    auto imgs = parse_idx_images(bytes);
    REQUIRE(imgs.size() == 2);
    CHECK(imgs[0].pixels[0] == 13);
    CHECK(imgs[1].pixels[0] == std::uint8_t(784 * 7 + 13));
}

TEST_CASE("idx label parsing") {
    std::vector<std::uint8_t> b;
    for (std::uint32_t v : {0x801u, 3u}) {
        auto h = be32(v);
        b.insert(b.end(), h.begin(), h.end());
    }
    b.insert(b.end(), {7, 0, 9});
    auto labels = parse_idx_labels(b);
    CHECK(labels == std::vector<int>{7, 0, 9});
}

TEST_CASE("idx parsing rejects malformed input") {
    auto bytes = idx_image_bytes(2);
    SUBCASE("payload one byte short") {
        bytes.pop_back();
        CHECK_THROWS_AS(parse_idx_images(bytes), MalformedInput);
    }
    SUBCASE("bad magic") {
        bytes[3] = 0x01;
        CHECK_THROWS_AS(parse_idx_images(bytes), MalformedInput);
    }
    SUBCASE("label magic on image parser") {
        std::vector<std::uint8_t> b;
        for (std::uint32_t v : {0x801u, 1u}) {
            auto h = be32(v);
            b.insert(b.end(), h.begin(), h.end());
        }
        b.push_back(3);
        CHECK_THROWS_AS(parse_idx_images(b), MalformedInput);
        CHECK_THROWS_AS(parse_idx_labels(bytes), MalformedInput);
    }
    SUBCASE("label out of range") {
        std::vector<std::uint8_t> b;
        for (std::uint32_t v : {0x801u, 1u}) {
            auto h = be32(v);
            b.insert(b.end(), h.begin(), h.end());
        }
        b.push_back(10);
        CHECK_THROWS_AS(parse_idx_labels(b), MalformedInput);
    }
}

TEST_CASE("idx round trip is bit exact") {
    auto bytes = idx_image_bytes(3);
    CHECK(serialize_idx_images(parse_idx_images(bytes)) == bytes);

    std::vector<int> labels{0, 9, 4, 4, 1};
    auto lb = serialize_idx_labels(labels);
    CHECK(parse_idx_labels(lb) == labels);
    CHECK(serialize_idx_labels(parse_idx_labels(lb)) == lb);
}

TEST_CASE("splits have requested sizes and are disjoint") {
    SplitSpec spec;  // defaults: seed 7, 4000/1000/1000
    Splits s = make_splits(60000, spec);
    CHECK(s.train.size() == 4000);
    CHECK(s.val.size() == 1000);
    CHECK(s.test.size() == 1000);
    std::set<int> all;
    for (const auto* part : {&s.train, &s.val, &s.test})
        for (int i : *part) {
            CHECK(i >= 0);
            CHECK(i < 60000);
            all.insert(i);
        }
    CHECK(all.size() == 6000);
}

TEST_CASE("splits are deterministic per seed") {
    SplitSpec spec;
    spec.seed = 123;
    Splits a = make_splits(10000, spec);
    Splits b = make_splits(10000, spec);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);
    spec.seed = 124;
    Splits c = make_splits(10000, spec);
    CHECK(a.train != c.train);
}

TEST_CASE("splits stay disjoint across 100 seeds") {
    SplitSpec spec;
    spec.n_train = 300;
    spec.n_val = 100;
    spec.n_test = 100;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        spec.seed = seed;
        Splits s = make_splits(600, spec);
        std::set<int> all(s.train.begin(), s.train.end());
        all.insert(s.val.begin(), s.val.end());
        all.insert(s.test.begin(), s.test.end());
        REQUIRE(all.size() == 500);
    }
}

TEST_CASE("undersized pool is rejected") {
    SplitSpec spec;  // needs 6000
    CHECK_THROWS_AS(make_splits(5000, spec), InsufficientData);
}

TEST_CASE("padding centers the image in a zero border") {
    RawImage raw{};
    SUBCASE("all zero") {
        Canvas c = pad_to_canvas(raw);
        CHECK(std::all_of(c.begin(), c.end(), [](double v) { return v == 0.0; }));
    }
    SUBCASE("corner pixel lands at (2,2)") {
        raw.pixels[0] = 255;
        Canvas c = pad_to_canvas(raw);
        CHECK(c[2 * 32 + 2] == 1.0);
        CHECK(c[0] == 0.0);
    }
    SUBCASE("saturated image keeps zero ring") {
        std::fill(std::begin(raw.pixels), std::end(raw.pixels), std::uint8_t(255));
        Canvas c = pad_to_canvas(raw);
        CHECK(c[16 * 32 + 16] == 1.0);
        for (int j = 0; j < 32; ++j) {
            CHECK(c[j] == 0.0);
            CHECK(c[31 * 32 + j] == 0.0);
            CHECK(c[j * 32] == 0.0);
            CHECK(c[j * 32 + 31] == 0.0);
        }
    }
}

TEST_CASE("padding preserves total mass") {
    RawImage raw{};
    for (int i = 0; i < 784; ++i) raw.pixels[i] = std::uint8_t((i * 31) % 256);
    Canvas c = pad_to_canvas(raw);
    double canvas_mass = std::accumulate(c.begin(), c.end(), 0.0);
    double raw_mass = 0.0;
    for (int i = 0; i < 784; ++i) raw_mass += raw.pixels[i];
    CHECK(canvas_mass * 255.0 == doctest::Approx(raw_mass).epsilon(1e-12));
}

TEST_CASE("label marking overwrites row 0 one hot") {
    Canvas c(kCanvasSize, 0.5);  // nonzero everywhere, including the marking row
    Rng rng(5);
    SUBCASE("positive marks the true class") {
        EmbeddedSample s = embed_label(c, 3, Polarity::positive, rng);
        CHECK(s.marked_class == 3);
        for (int j = 0; j < 10; ++j) CHECK(s.pixels[j] == (j == 3 ? 1.0 : 0.0));
        CHECK(s.pixels[10] == 0.5);  // untouched outside the marking area
        CHECK(s.pixels[32] == 0.5);
    }
    SUBCASE("negative marks a wrong class") {
        EmbeddedSample s = embed_label(c, 3, Polarity::negative, rng);
        CHECK(s.marked_class != 3);
        CHECK(s.pixels[s.marked_class] == 1.0);
    }
    SUBCASE("neutral spreads uniform mass") {
        EmbeddedSample s = embed_label(c, 3, Polarity::neutral, rng);
        for (int j = 0; j < 10; ++j) CHECK(s.pixels[j] == 0.1);
    }
}

TEST_CASE("marking pixels sum to one, re-embedding included") {
    Canvas c(kCanvasSize, 0.9);
    Rng rng(11);
    for (Polarity p : {Polarity::positive, Polarity::negative, Polarity::neutral}) {
        EmbeddedSample s = embed_label(c, 6, p, rng);
        // embed again on an already-marked canvas: same invariant
        EmbeddedSample s2 = embed_label(s.pixels, 2, p, rng);
        for (const Canvas& px : {s.pixels, s2.pixels}) {
            double mark = 0.0;
            for (int j = 0; j < 10; ++j) mark += px[j];
            CHECK(mark == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("negative draws cover all nine wrong classes") {
    Canvas c(kCanvasSize, 0.0);
    Rng rng(17);
    std::set<int> seen;
    for (int i = 0; i < 10000; ++i) {
        EmbeddedSample s = embed_label(c, 3, Polarity::negative, rng);
        REQUIRE(s.marked_class != 3);
        seen.insert(s.marked_class);
    }
    CHECK(seen.size() == 9);
}

TEST_CASE("bundled pool loads consistently") {
    Dataset ds = load_mnist_dir("data/mnist");
    REQUIRE(ds.images.size() == ds.labels.size());
    REQUIRE(ds.images.size() >= 6000);
    for (int l : ds.labels) {
        REQUIRE(l >= 0);
        REQUIRE(l <= 9);
    }
}
