#include "imbeval/balance.hpp"

#include <algorithm>

#include "imbeval/csv.hpp"
#include "imbeval/error.hpp"
#include "imbeval/rng.hpp"

namespace imbeval {

WeightMode weight_mode_from_string(const std::string& s) {
    if (s == "none") return WeightMode::none;
    if (s == "invfreq" || s == "inverse_freq") return WeightMode::inverse_freq;
    if (s == "invfreq-c" || s == "inverse_freq_over_c") return WeightMode::inverse_freq_over_c;
    raise(Errc::invalid_argument, "unknown weight mode '" + s + "'");
}

const char* to_string(WeightMode mode) {
    switch (mode) {
        case WeightMode::none: return "none";
        case WeightMode::inverse_freq: return "invfreq";
        case WeightMode::inverse_freq_over_c: return "invfreq-c";
    }
    return "none";
}

void DiagnosisWeights::set(Diagnosis d, double f) {
    if (f <= 0.0) raise(Errc::invalid_argument, "diagnosis factor must be positive");
    factor[static_cast<std::size_t>(d)] = f;
}

ClassWeights class_weights(const ClassCounts& counts, WeightMode mode) {
    const std::size_t C = counts.counts.size();
    ClassWeights cw;
    cw.mode = mode;
    cw.weights.assign(C, 1.0);
    if (mode == WeightMode::none) return cw;
    const double N = static_cast<double>(counts.total);
    for (std::size_t i = 0; i < C; ++i) {
        if (counts.counts[i] <= 0)
            raise(Errc::zero_class_count,
                  "class " + std::to_string(i) + " has no samples; cannot invert frequency");
        double denom = static_cast<double>(counts.counts[i]);
        if (mode == WeightMode::inverse_freq_over_c) denom *= static_cast<double>(C);
        cw.weights[i] = N / denom;
    }
    return cw;
}

ClassWeights combined_dataset_weights(const SampleManifest& manifest, WeightMode mode) {
    return class_weights(class_counts(manifest, DatasetTag::primary), mode);
}

double sample_weight(int label, Diagnosis diagnosis, const ClassWeights& cw,
                     const DiagnosisWeights& dw) {
    if (label < 0 || static_cast<std::size_t>(label) >= cw.weights.size())
        raise(Errc::label_out_of_range, "label " + std::to_string(label));
    return cw.weights[static_cast<std::size_t>(label)] * dw.of(diagnosis);
}

std::vector<std::vector<std::size_t>> balanced_batches(std::span<const int> pool_labels,
                                                       int class_count,
                                                       std::size_t batch_size,
                                                       std::size_t n_batches,
                                                       std::uint64_t seed) {
    const std::size_t C = static_cast<std::size_t>(class_count);
    if (batch_size < C)
        raise(Errc::batch_too_small, "batch_size " + std::to_string(batch_size) +
                                         " below class count " + std::to_string(C));

    std::vector<std::vector<std::size_t>> pools(C);
    for (std::size_t i = 0; i < pool_labels.size(); ++i) {
        int label = pool_labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= C)
            raise(Errc::label_out_of_range, "label " + std::to_string(label));
        pools[static_cast<std::size_t>(label)].push_back(i);
    }
    for (std::size_t c = 0; c < C; ++c)
        if (pools[c].empty())
            raise(Errc::zero_class_count,
                  "class " + std::to_string(c) + " has no samples to draw from");

    Rng rng(seed);
    // Cyclic per-class queues, reshuffled whenever a class is exhausted.
    std::vector<std::size_t> cursor(C, 0);
    for (std::size_t c = 0; c < C; ++c) rng.shuffle(pools[c]);
    auto draw = [&](std::size_t c) {
        if (cursor[c] == pools[c].size()) {
            rng.shuffle(pools[c]);
            cursor[c] = 0;
        }
        return pools[c][cursor[c]++];
    };

    const std::size_t base = batch_size / C;
    const std::size_t remainder = batch_size % C;
    std::size_t rotation = remainder > 0 ? rng.uniform_index(C) : 0;

    std::vector<std::vector<std::size_t>> batches;
    batches.reserve(n_batches);
    for (std::size_t b = 0; b < n_batches; ++b) {
        std::vector<std::size_t> quota(C, base);
        for (std::size_t j = 0; j < remainder; ++j) quota[(rotation + j) % C] += 1;
        rotation = (rotation + remainder) % C;

        std::vector<std::size_t> batch;
        batch.reserve(batch_size);
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t q = 0; q < quota[c]; ++q) batch.push_back(draw(c));
        rng.shuffle(batch);
        batches.push_back(std::move(batch));
    }
    return batches;
}

std::vector<std::vector<std::size_t>> balanced_batch_indices(const SampleManifest& manifest,
                                                             std::size_t batch_size,
                                                             std::size_t n_batches,
                                                             std::uint64_t seed) {
    std::vector<int> labels;
    labels.reserve(manifest.size());
    for (const Sample& s : manifest.samples) labels.push_back(s.label);
    return balanced_batches(labels, manifest.class_count, batch_size, n_batches, seed);
}

void save_weights(const ClassWeights& weights, const std::string& path) {
    std::string out = "class_index,weight\n";
    for (std::size_t i = 0; i < weights.weights.size(); ++i)
        out += std::to_string(i) + "," + csv::fmt_g9(weights.weights[i]) + "\n";
    csv::atomic_write(path, out);
}

ClassWeights load_weights(const std::string& path) {
    auto rows = csv::read_file(path);
    if (rows.empty() || rows.front() != csv::Row{"class_index", "weight"})
        raise(Errc::missing_column, "weights file must have header class_index,weight");
    ClassWeights cw;
    cw.weights.assign(rows.size() - 1, 0.0);
    std::vector<char> seen(rows.size() - 1, 0);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        long long idx = csv::parse_int(rows[r][0], "class_index");
        double w = csv::parse_double(rows[r][1], "weight");
        if (idx < 0 || static_cast<std::size_t>(idx) >= cw.weights.size() || seen[idx])
            raise(Errc::invalid_field, "class_index values must cover 0..C-1 exactly once");
        if (w <= 0.0) raise(Errc::invalid_field, "weights must be positive");
        cw.weights[static_cast<std::size_t>(idx)] = w;
        seen[idx] = 1;
    }
    return cw;
}

}  // namespace imbeval
