#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace imbeval {

enum class Diagnosis { consensus, serial_imaging, confocal, histopathology, unknown };
enum class DatasetTag { primary, secondary };

const char* to_string(Diagnosis d);
const char* to_string(DatasetTag t);
Diagnosis diagnosis_from_string(const std::string& s);
DatasetTag dataset_from_string(const std::string& s);

struct Sample {
    std::string sample_id;
    std::string group_id;  // lesion id; all images of a lesion share it
    int label = 0;
    Diagnosis diagnosis = Diagnosis::unknown;
    DatasetTag dataset = DatasetTag::primary;
};

// Per-sample records plus the declared class count. Sample ids are unique,
// labels all lie in [0, class_count).
struct SampleManifest {
    std::vector<Sample> samples;
    int class_count = 0;

    std::size_t size() const { return samples.size(); }
    // Index of a sample id, or npos when unknown.
    std::size_t index_of(const std::string& sample_id) const;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    void rebuild_index();

private:
    std::unordered_map<std::string, std::size_t> index_;
};

struct ClassCounts {
    std::vector<long long> counts;
    long long total = 0;

    int class_count() const { return static_cast<int>(counts.size()); }
};

// Probabilities indexed (model, sample, crop, class). Every
// (model, sample, crop) row sums to 1 within 1e-6, and the sample axis
// follows the manifest the tensor was loaded against.
struct PredictionTensor {
    std::vector<std::string> model_ids;
    std::size_t n_models = 0;
    std::size_t n_samples = 0;
    std::size_t n_crops = 0;
    std::size_t n_classes = 0;
    std::vector<double> values;

    double at(std::size_t m, std::size_t s, std::size_t r, std::size_t c) const {
        return values[((m * n_samples + s) * n_crops + r) * n_classes + c];
    }
    double& at(std::size_t m, std::size_t s, std::size_t r, std::size_t c) {
        return values[((m * n_samples + s) * n_crops + r) * n_classes + c];
    }
    std::span<const double> row(std::size_t m, std::size_t s, std::size_t r) const {
        return {values.data() + ((m * n_samples + s) * n_crops + r) * n_classes, n_classes};
    }
    std::size_t model_index(const std::string& id) const;
};

constexpr double kRowSumTolerance = 1e-6;

// manifest.csv: sample_id,group_id,label,diagnosis,dataset. The diagnosis
// and dataset columns are optional and default to unknown/primary.
// declared_class_count = 0 infers C as max(label)+1; a positive value
// additionally validates every label against it.
SampleManifest load_manifest(const std::string& path, int declared_class_count = 0);
void save_manifest(const SampleManifest& manifest, const std::string& path);

// counts.csv: class_index,count with indices covering 0..C-1 exactly.
ClassCounts load_counts(const std::string& path);
void save_counts(const ClassCounts& counts, const std::string& path);

ClassCounts class_counts(const SampleManifest& manifest,
                         std::optional<DatasetTag> dataset_filter = std::nullopt);

// predictions.csv: model_id,sample_id,crop_index,p_0,...,p_{C-1}. Rows may
// arrive in any order; the tensor must come out dense (same crop set for
// every model/sample pair) or loading fails.
PredictionTensor load_predictions(const std::string& path, const SampleManifest& manifest);
void save_predictions(const PredictionTensor& tensor, const SampleManifest& manifest,
                      const std::string& path);

}  // namespace imbeval
