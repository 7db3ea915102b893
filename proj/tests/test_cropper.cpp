#include <doctest.h>

#include <cmath>

#include "imbeval/cropper.hpp"
#include "reference.hpp"
#include "test_util.hpp"

using namespace imbeval;
using testutil::throws_errc;

namespace {

// Seed whose draw order (row, col, flip, flip) produces no flips.
std::uint64_t no_flip_seed() {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        Rng probe(seed);
        probe.uniform_int(0, 0);
        probe.uniform_int(0, 0);
        bool f1 = probe.bernoulli(0.5);
        bool f2 = probe.bernoulli(0.5);
        if (!f1 && !f2) return seed;
    }
    FAIL("no seed without flips found");
    return 0;
}

ImageArray random_image(int h, int w, Rng& rng) {
    ImageArray img(h, w);
    for (double& v : img.pixels) v = rng.uniform01();
    return img;
}

}  // namespace

TEST_CASE("crop_grid degenerates to (0,0) when crop equals the image") {
    CropGrid grid = crop_grid(224, 224, 224, 9);
    REQUIRE(grid.offsets.size() == 9);
    for (auto [r, c] : grid.offsets) {
        CHECK(r == 0);
        CHECK(c == 0);
    }
}

TEST_CASE("crop_grid reproduces the rounded linspace layout") {
    CropGrid grid = crop_grid(450, 600, 224, 36);
    REQUIRE(grid.offsets.size() == 36);
    const std::vector<int> expected_rows{0, 45, 90, 136, 181, 226};
    for (int i = 0; i < 6; ++i)
        CHECK(grid.offsets[static_cast<std::size_t>(i) * 6].first ==
              expected_rows[static_cast<std::size_t>(i)]);
    // full grid against the independent linspace oracle
    auto oracle = ref::grid_offsets_linspace(450, 600, 224, 6);
    REQUIRE(oracle.size() == grid.offsets.size());
    for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(grid.offsets[i] == oracle[i]);
}

TEST_CASE("crop_grid rejects oversized crops and non-square counts") {
    CHECK(throws_errc(Errc::crop_too_large, [] { crop_grid(600, 450, 700, 36); }));
    CHECK(throws_errc(Errc::non_square_r, [] { crop_grid(450, 600, 224, 35); }));
}

TEST_CASE("crop_grid offsets are monotone and in bounds") {
    Rng rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        int h = rng.uniform_int(8, 200), w = rng.uniform_int(8, 200);
        int crop = rng.uniform_int(1, std::min(h, w));
        int side = rng.uniform_int(1, 6);
        CropGrid grid = crop_grid(h, w, crop, side * side);
        int prev_row = -1;
        for (int r = 0; r < side; ++r) {
            int row = grid.offsets[static_cast<std::size_t>(r * side)].first;
            CHECK(row >= prev_row);
            prev_row = row;
            int prev_col = -1;
            for (int c = 0; c < side; ++c) {
                auto [orow, ocol] = grid.offsets[static_cast<std::size_t>(r * side + c)];
                CHECK(orow == row);
                CHECK(ocol >= prev_col);
                prev_col = ocol;
                CHECK(orow >= 0);
                CHECK(ocol >= 0);
                CHECK(orow + crop <= h);
                CHECK(ocol + crop <= w);
            }
        }
    }
}

TEST_CASE("extract_crops copies pixels exactly") {
    Rng rng(5);
    ImageArray img = random_image(20, 30, rng);
    CropGrid grid = crop_grid(20, 30, 8, 4);
    auto crops = extract_crops(img, grid);
    REQUIRE(crops.size() == 4);

    // offset (0,0) crop equals the top-left window elementwise
    CHECK(grid.offsets[0] == std::pair<int, int>{0, 0});
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
            for (int ch = 0; ch < 3; ++ch) CHECK(crops[0].at(r, c, ch) == img.at(r, c, ch));

    // every crop pixel equals the source pixel at its offset (no interpolation)
    for (std::size_t i = 0; i < crops.size(); ++i) {
        auto [orow, ocol] = grid.offsets[i];
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 8; ++c)
                for (int ch = 0; ch < 3; ++ch)
                    CHECK(crops[i].at(r, c, ch) == img.at(orow + r, ocol + c, ch));
    }
}

TEST_CASE("constant images give constant, identical crops") {
    ImageArray img(16, 16, 0.37);
    CropGrid degenerate;
    degenerate.crop = 8;
    degenerate.offsets = {{3, 3}, {3, 3}, {3, 3}};
    auto crops = extract_crops(img, degenerate);
    for (const auto& crop : crops) {
        for (double v : crop.pixels) CHECK(v == 0.37);
        CHECK(crop.pixels == crops[0].pixels);
    }
}

TEST_CASE("augment with degenerate randomness is the identity") {
    Rng rng(no_flip_seed());
    Rng img_rng(9);
    ImageArray img = random_image(12, 12, img_rng);
    ImageArray out = augment(img, 12, rng, 0.0, {1.0, 1.0});
    CHECK(out.pixels == img.pixels);
}

TEST_CASE("mean subtraction of a matching constant zeroes the image") {
    ImageArray img(10, 10, 0.5);
    img.channel_means = {0.5, 0.5, 0.5};
    Rng rng(no_flip_seed());
    ImageArray out = augment(img, 10, rng, 0.0, {1.0, 1.0});
    for (double v : out.pixels) CHECK(v == 0.0);
}

TEST_CASE("gray images are fixed points of saturation scaling") {
    Rng img_rng(13);
    ImageArray img(9, 9);
    for (int r = 0; r < 9; ++r)
        for (int c = 0; c < 9; ++c) {
            double g = img_rng.uniform01();
            for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = g;
        }
    Rng rng(no_flip_seed());
    ImageArray out = augment(img, 9, rng, 0.0, {0.6, 0.6});
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        CHECK(out.pixels[i] == doctest::Approx(img.pixels[i]).epsilon(1e-12));
}

TEST_CASE("augment is deterministic per seed") {
    Rng img_rng(4);
    ImageArray img = random_image(16, 20, img_rng);
    Rng a(99), b(99);
    ImageArray out_a = augment(img, 8, a, 0.1, {0.8, 1.2});
    ImageArray out_b = augment(img, 8, b, 0.1, {0.8, 1.2});
    CHECK(out_a.pixels == out_b.pixels);
}

TEST_CASE("aggregate_mean basics") {
    Matrix identical(3, 2);
    for (std::size_t r = 0; r < 3; ++r) {
        identical.at(r, 0) = 0.3;
        identical.at(r, 1) = 0.7;
    }
    auto mean = aggregate_mean(identical);
    CHECK(mean[0] == doctest::Approx(0.3));
    CHECK(mean[1] == doctest::Approx(0.7));

    Matrix opposite(2, 2);
    opposite.at(0, 0) = 1.0;
    opposite.at(1, 1) = 1.0;
    mean = aggregate_mean(opposite);
    CHECK(mean[0] == doctest::Approx(0.5));
    CHECK(mean[1] == doctest::Approx(0.5));

    Matrix uniform(36, 4, 0.25);
    for (double v : aggregate_mean(uniform)) CHECK(v == doctest::Approx(0.25));

    CHECK(throws_errc(Errc::empty_input, [] { aggregate_mean(Matrix(0, 3)); }));
}

TEST_CASE("aggregate_mean preserves stochastic rows within 1e-9") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        int R = rng.uniform_int(1, 36), C = rng.uniform_int(2, 7);
        Matrix preds(static_cast<std::size_t>(R), static_cast<std::size_t>(C));
        for (int r = 0; r < R; ++r) {
            double sum = 0.0;
            for (int c = 0; c < C; ++c) {
                double v = rng.uniform(0.0, 1.0) + 1e-6;
                preds.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = v;
                sum += v;
            }
            for (int c = 0; c < C; ++c)
                preds.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) /= sum;
        }
        auto mean = aggregate_mean(preds);
        double total = 0.0;
        for (double v : mean) total += v;
        CHECK(std::abs(total - 1.0) <= 1e-9);
    }
}

TEST_CASE("flatten_crops concatenates crop-major") {
    Matrix preds(2, 2);
    preds.at(0, 0) = 1; preds.at(0, 1) = 2;
    preds.at(1, 0) = 3; preds.at(1, 1) = 4;
    auto flat = flatten_crops(preds);
    CHECK(flat == std::vector<double>{1, 2, 3, 4});

    Matrix big(36, 7, 0.1);
    CHECK(flatten_crops(big).size() == 252);

    // flatten then reshape recovers the matrix
    Matrix reshaped(2, 2);
    reshaped.values = flat;
    CHECK(reshaped.values == preds.values);
}

TEST_CASE("offsets.csv lists crop_index,row,col") {
    testutil::TempDir dir;
    CropGrid grid = crop_grid(10, 10, 10, 4);
    save_offsets(grid, dir.file("o.csv"));
    CHECK(testutil::read_file(dir.file("o.csv")) ==
          "crop_index,row,col\n0,0,0\n1,0,0\n2,0,0\n3,0,0\n");
}
