#include "imbeval/cropper.hpp"

#include <algorithm>
#include <cmath>

#include "imbeval/csv.hpp"
#include "imbeval/error.hpp"

namespace imbeval {

namespace {

std::vector<int> rounded_linspace(int stop, int n) {
    std::vector<int> points(static_cast<std::size_t>(n), 0);
    if (n == 1) return points;
    for (int i = 0; i < n; ++i) {
        double v = static_cast<double>(stop) * static_cast<double>(i) / (n - 1);
        points[static_cast<std::size_t>(i)] = static_cast<int>(std::lround(v));
    }
    return points;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

CropGrid crop_grid(int height, int width, int crop, int n_crops) {
    if (crop <= 0 || crop > std::min(height, width))
        raise(Errc::crop_too_large, "crop " + std::to_string(crop) + " does not fit " +
                                        std::to_string(height) + "x" + std::to_string(width));
    if (n_crops <= 0) raise(Errc::non_square_r, "crop count must be positive");
    int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_crops))));
    if (side * side != n_crops)
        raise(Errc::non_square_r,
              std::to_string(n_crops) + " crops cannot form a square grid");

    CropGrid grid;
    grid.crop = crop;
    auto row_offsets = rounded_linspace(height - crop, side);
    auto col_offsets = rounded_linspace(width - crop, side);
    grid.offsets.reserve(static_cast<std::size_t>(n_crops));
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c)
            grid.offsets.emplace_back(row_offsets[static_cast<std::size_t>(r)],
                                      col_offsets[static_cast<std::size_t>(c)]);
    return grid;
}

std::vector<ImageArray> extract_crops(const ImageArray& img, const CropGrid& grid) {
    for (auto [r, c] : grid.offsets)
        if (r < 0 || c < 0 || r + grid.crop > img.height || c + grid.crop > img.width)
            raise(Errc::crop_too_large, "offset (" + std::to_string(r) + ", " +
                                            std::to_string(c) + ") leaves the image");
    std::vector<ImageArray> crops(grid.offsets.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(grid.offsets.size()); ++i) {
        auto [row0, col0] = grid.offsets[static_cast<std::size_t>(i)];
        ImageArray crop(grid.crop, grid.crop);
        crop.channel_means = img.channel_means;
        for (int r = 0; r < grid.crop; ++r)
            for (int c = 0; c < grid.crop; ++c)
                for (int ch = 0; ch < 3; ++ch)
                    crop.at(r, c, ch) = img.at(row0 + r, col0 + c, ch);
        crops[static_cast<std::size_t>(i)] = std::move(crop);
    }
    return crops;
}

ImageArray augment(const ImageArray& img, int crop, Rng& rng, double brightness_delta,
                   std::pair<double, double> saturation_range) {
    if (crop <= 0 || crop > std::min(img.height, img.width))
        raise(Errc::crop_too_large, "crop " + std::to_string(crop) + " does not fit " +
                                        std::to_string(img.height) + "x" +
                                        std::to_string(img.width));
    int row0 = rng.uniform_int(0, img.height - crop);
    int col0 = rng.uniform_int(0, img.width - crop);
    bool flip_rows = rng.bernoulli(0.5);
    bool flip_cols = rng.bernoulli(0.5);
    double u = rng.uniform(-brightness_delta, brightness_delta);
    double s = rng.uniform(saturation_range.first, saturation_range.second);

    ImageArray out(crop, crop);
    out.channel_means = img.channel_means;
    for (int r = 0; r < crop; ++r) {
        int src_r = row0 + (flip_rows ? crop - 1 - r : r);
        for (int c = 0; c < crop; ++c) {
            int src_c = col0 + (flip_cols ? crop - 1 - c : c);
            double px[3];
            for (int ch = 0; ch < 3; ++ch)
                px[ch] = clamp01(img.at(src_r, src_c, ch) + u);
            // Saturation as interpolation toward luma gray; s=1 is exact
            // identity because the gray term multiplies out to zero.
            double gray = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
            for (int ch = 0; ch < 3; ++ch) {
                double v = clamp01(gray * (1.0 - s) + px[ch] * s);
                out.at(r, c, ch) = v - img.channel_means[static_cast<std::size_t>(ch)];
            }
        }
    }
    return out;
}

std::vector<double> aggregate_mean(const Matrix& preds) {
    if (preds.rows == 0) raise(Errc::empty_input, "no crop predictions to aggregate");
    std::vector<double> mean(preds.cols, 0.0);
    for (std::size_t r = 0; r < preds.rows; ++r)
        for (std::size_t c = 0; c < preds.cols; ++c) mean[c] += preds.at(r, c);
    for (double& v : mean) v /= static_cast<double>(preds.rows);
    return mean;
}

std::vector<double> flatten_crops(const Matrix& preds) {
    return preds.values;
}

void save_offsets(const CropGrid& grid, const std::string& path) {
    std::string out = "crop_index,row,col\n";
    for (std::size_t i = 0; i < grid.offsets.size(); ++i)
        out += std::to_string(i) + "," + std::to_string(grid.offsets[i].first) + "," +
               std::to_string(grid.offsets[i].second) + "\n";
    csv::atomic_write(path, out);
}

std::vector<double> image_features(const ImageArray& img) {
    return img.pixels;
}

}  // namespace imbeval
