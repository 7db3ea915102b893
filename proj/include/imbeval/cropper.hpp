#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "imbeval/matrix.hpp"
#include "imbeval/rng.hpp"

namespace imbeval {

// H x W x 3 image, channel-interleaved, values nominally in [0,1] until the
// per-channel training means are subtracted.
struct ImageArray {
    int height = 0;
    int width = 0;
    std::vector<double> pixels;
    std::array<double, 3> channel_means{0.0, 0.0, 0.0};

    ImageArray() = default;
    ImageArray(int h, int w, double fill = 0.0)
        : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, fill) {}

    double& at(int r, int c, int ch) {
        return pixels[(static_cast<std::size_t>(r) * width + c) * 3 + ch];
    }
    double at(int r, int c, int ch) const {
        return pixels[(static_cast<std::size_t>(r) * width + c) * 3 + ch];
    }
};

// Deterministic evaluation-crop layout: a sqrt(R) x sqrt(R) grid of top-left
// offsets, rounded linspace along each axis, row-major order.
struct CropGrid {
    int crop = 0;
    std::vector<std::pair<int, int>> offsets;  // (row, col)
};

CropGrid crop_grid(int height, int width, int crop, int n_crops);

// Pixel-exact sub-windows; no interpolation, no scaling.
std::vector<ImageArray> extract_crops(const ImageArray& img, const CropGrid& grid);

// Training-time augmentation, in order: uniform random top-left crop,
// independent p=0.5 flips along each axis, brightness shift u~U(-delta,delta)
// on all channels, saturation scale s~U(range) interpolating between the
// per-pixel luma gray and the pixel, then per-channel mean subtraction.
// Values are clamped to [0,1] after each jitter stage, before the means come
// off. Draw order is fixed: crop row, crop col, flip rows, flip cols, u, s.
ImageArray augment(const ImageArray& img, int crop, Rng& rng, double brightness_delta,
                   std::pair<double, double> saturation_range);

// Column mean of an R x C stochastic matrix.
std::vector<double> aggregate_mean(const Matrix& preds);

// Row-major (crop-major) concatenation: crop 0's classes, then crop 1's, ...
std::vector<double> flatten_crops(const Matrix& preds);

// offsets.csv: crop_index,row,col.
void save_offsets(const CropGrid& grid, const std::string& path);

std::vector<double> image_features(const ImageArray& img);

}  // namespace imbeval
