#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "imbeval/ingest.hpp"

namespace imbeval {

enum class WeightMode { none, inverse_freq, inverse_freq_over_c };
WeightMode weight_mode_from_string(const std::string& s);
const char* to_string(WeightMode mode);

// Per-class positive loss multipliers. inverse_freq keeps w_i * n_i = N
// exactly; inverse_freq_over_c divides that by the class count.
struct ClassWeights {
    std::vector<double> weights;
    WeightMode mode = WeightMode::none;

    static ClassWeights ones(int class_count) {
        return {std::vector<double>(static_cast<std::size_t>(class_count), 1.0),
                WeightMode::none};
    }
};

struct DiagnosisWeights {
    std::array<double, 5> factor{1.0, 1.0, 1.0, 1.0, 1.0};

    double of(Diagnosis d) const { return factor[static_cast<std::size_t>(d)]; }
    void set(Diagnosis d, double f);
};

ClassWeights class_weights(const ClassCounts& counts, WeightMode mode);

// Weights for mixed-dataset training are always derived from the primary
// dataset's counts; the secondary dataset is ignored even when it ends up in
// the training pool.
ClassWeights combined_dataset_weights(const SampleManifest& manifest, WeightMode mode);

double sample_weight(int label, Diagnosis diagnosis, const ClassWeights& cw,
                     const DiagnosisWeights& dw);

// Balanced batches over an arbitrary sample pool: each batch's class
// histogram is uniform up to the batch_size % C remainder, which rotates
// across classes so none is favored. Classes oversample with replacement
// once exhausted (reshuffled per cycle). Returned indices point into `pool`.
std::vector<std::vector<std::size_t>> balanced_batches(std::span<const int> pool_labels,
                                                       int class_count,
                                                       std::size_t batch_size,
                                                       std::size_t n_batches,
                                                       std::uint64_t seed);

// Same stream over a whole manifest; indices are manifest row positions.
std::vector<std::vector<std::size_t>> balanced_batch_indices(const SampleManifest& manifest,
                                                             std::size_t batch_size,
                                                             std::size_t n_batches,
                                                             std::uint64_t seed);

// weights.csv: class_index,weight.
void save_weights(const ClassWeights& weights, const std::string& path);
ClassWeights load_weights(const std::string& path);

}  // namespace imbeval
