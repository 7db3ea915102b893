#include "imbeval/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>

#include "imbeval/csv.hpp"
#include "imbeval/error.hpp"

namespace imbeval {

const char* to_string(Diagnosis d) {
    switch (d) {
        case Diagnosis::consensus: return "consensus";
        case Diagnosis::serial_imaging: return "serial_imaging";
        case Diagnosis::confocal: return "confocal";
        case Diagnosis::histopathology: return "histopathology";
        case Diagnosis::unknown: return "unknown";
    }
    return "unknown";
}

const char* to_string(DatasetTag t) {
    return t == DatasetTag::primary ? "primary" : "secondary";
}

Diagnosis diagnosis_from_string(const std::string& s) {
    if (s == "consensus") return Diagnosis::consensus;
    if (s == "serial_imaging") return Diagnosis::serial_imaging;
    if (s == "confocal") return Diagnosis::confocal;
    if (s == "histopathology") return Diagnosis::histopathology;
    if (s == "unknown" || s.empty()) return Diagnosis::unknown;
    raise(Errc::invalid_field, "unknown diagnosis '" + s + "'");
}

DatasetTag dataset_from_string(const std::string& s) {
    if (s == "primary" || s.empty()) return DatasetTag::primary;
    if (s == "secondary") return DatasetTag::secondary;
    raise(Errc::invalid_field, "unknown dataset tag '" + s + "'");
}

std::size_t SampleManifest::index_of(const std::string& sample_id) const {
    auto it = index_.find(sample_id);
    return it == index_.end() ? npos : it->second;
}

void SampleManifest::rebuild_index() {
    index_.clear();
    index_.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto [it, inserted] = index_.emplace(samples[i].sample_id, i);
        if (!inserted)
            raise(Errc::duplicate_sample_id, "sample_id '" + samples[i].sample_id +
                                                 "' appears more than once");
    }
}

std::size_t PredictionTensor::model_index(const std::string& id) const {
    for (std::size_t m = 0; m < model_ids.size(); ++m)
        if (model_ids[m] == id) return m;
    raise(Errc::invalid_argument, "model_id '" + id + "' not present in tensor");
}

namespace {

std::size_t find_column(const csv::Row& header, const std::string& name, bool required) {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    if (required) raise(Errc::missing_column, "header lacks required column '" + name + "'");
    return SampleManifest::npos;
}

}  // namespace

SampleManifest load_manifest(const std::string& path, int declared_class_count) {
    auto rows = csv::read_file(path);
    if (rows.empty()) raise(Errc::missing_column, "'" + path + "' has no header row");
    const csv::Row& header = rows.front();
    std::size_t col_id = find_column(header, "sample_id", true);
    std::size_t col_group = find_column(header, "group_id", true);
    std::size_t col_label = find_column(header, "label", true);
    std::size_t col_diag = find_column(header, "diagnosis", false);
    std::size_t col_ds = find_column(header, "dataset", false);

    SampleManifest manifest;
    manifest.samples.reserve(rows.size() - 1);
    int max_label = -1;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const csv::Row& row = rows[r];
        if (row.size() < header.size())
            raise(Errc::invalid_field,
                  path + ": row " + std::to_string(r + 1) + " has too few fields");
        Sample s;
        s.sample_id = row[col_id];
        s.group_id = row[col_group];
        if (s.sample_id.empty())
            raise(Errc::invalid_field, path + ": empty sample_id on row " + std::to_string(r + 1));
        if (s.group_id.empty())
            raise(Errc::invalid_field, path + ": empty group_id on row " + std::to_string(r + 1));
        long long label = csv::parse_int(row[col_label], "label");
        if (label < 0 ||
            (declared_class_count > 0 && label >= declared_class_count))
            raise(Errc::label_out_of_range,
                  "label " + std::to_string(label) + " outside [0, " +
                      std::to_string(declared_class_count) + ") for sample '" + s.sample_id + "'");
        s.label = static_cast<int>(label);
        max_label = std::max(max_label, s.label);
        if (col_diag != SampleManifest::npos) s.diagnosis = diagnosis_from_string(row[col_diag]);
        if (col_ds != SampleManifest::npos) s.dataset = dataset_from_string(row[col_ds]);
        manifest.samples.push_back(std::move(s));
    }
    manifest.class_count = declared_class_count > 0 ? declared_class_count : max_label + 1;
    manifest.rebuild_index();
    return manifest;
}

void save_manifest(const SampleManifest& manifest, const std::string& path) {
    std::string out = "sample_id,group_id,label,diagnosis,dataset\n";
    for (const Sample& s : manifest.samples) {
        out += s.sample_id;
        out += ',';
        out += s.group_id;
        out += ',';
        out += std::to_string(s.label);
        out += ',';
        out += to_string(s.diagnosis);
        out += ',';
        out += to_string(s.dataset);
        out += '\n';
    }
    csv::atomic_write(path, out);
}

ClassCounts load_counts(const std::string& path) {
    auto rows = csv::read_file(path);
    if (rows.empty()) raise(Errc::missing_column, "'" + path + "' has no header row");
    std::size_t col_idx = find_column(rows.front(), "class_index", true);
    std::size_t col_count = find_column(rows.front(), "count", true);

    std::map<long long, long long> by_index;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        long long idx = csv::parse_int(rows[r][col_idx], "class_index");
        long long count = csv::parse_int(rows[r][col_count], "count");
        if (idx < 0) raise(Errc::invalid_field, "negative class_index " + std::to_string(idx));
        if (count < 0) raise(Errc::invalid_field, "negative count " + std::to_string(count));
        if (!by_index.emplace(idx, count).second)
            raise(Errc::duplicate_row, "class_index " + std::to_string(idx) + " repeated");
    }
    if (by_index.empty()) raise(Errc::empty_input, "'" + path + "' has no count rows");

    ClassCounts counts;
    counts.counts.resize(by_index.size(), 0);
    for (const auto& [idx, count] : by_index) {
        if (idx >= static_cast<long long>(by_index.size()))
            raise(Errc::invalid_field,
                  "class_index " + std::to_string(idx) + " leaves gaps in 0..C-1");
        counts.counts[static_cast<std::size_t>(idx)] = count;
        counts.total += count;
    }
    return counts;
}

void save_counts(const ClassCounts& counts, const std::string& path) {
    std::string out = "class_index,count\n";
    for (std::size_t i = 0; i < counts.counts.size(); ++i)
        out += std::to_string(i) + "," + std::to_string(counts.counts[i]) + "\n";
    csv::atomic_write(path, out);
}

ClassCounts class_counts(const SampleManifest& manifest,
                         std::optional<DatasetTag> dataset_filter) {
    ClassCounts counts;
    counts.counts.assign(static_cast<std::size_t>(manifest.class_count), 0);
    bool any = false;
    for (const Sample& s : manifest.samples) {
        if (dataset_filter && s.dataset != *dataset_filter) continue;
        counts.counts[static_cast<std::size_t>(s.label)] += 1;
        counts.total += 1;
        any = true;
    }
    if (dataset_filter && !any)
        raise(Errc::empty_selection,
              std::string("no samples with dataset = ") + to_string(*dataset_filter));
    return counts;
}

PredictionTensor load_predictions(const std::string& path, const SampleManifest& manifest) {
    auto rows = csv::read_file(path);
    if (rows.empty()) raise(Errc::missing_column, "'" + path + "' has no header row");
    const csv::Row& header = rows.front();
    if (header.size() < 4 || header[0] != "model_id" || header[1] != "sample_id" ||
        header[2] != "crop_index")
        raise(Errc::missing_column,
              "predictions header must start with model_id,sample_id,crop_index");
    std::size_t n_classes = header.size() - 3;
    for (std::size_t c = 0; c < n_classes; ++c)
        if (header[3 + c] != "p_" + std::to_string(c))
            raise(Errc::missing_column, "expected probability column p_" + std::to_string(c));
    if (manifest.class_count > 0 &&
        n_classes != static_cast<std::size_t>(manifest.class_count))
        raise(Errc::shape_mismatch,
              "predictions carry " + std::to_string(n_classes) + " classes, manifest declares " +
                  std::to_string(manifest.class_count));
    if (rows.size() == 1) raise(Errc::empty_input, "'" + path + "' has no prediction rows");

    std::vector<std::string> model_ids;
    std::unordered_map<std::string, std::size_t> model_index;
    struct Cell {
        std::size_t model, sample;
        long long crop;
        std::vector<double> probs;
    };
    std::vector<Cell> cells;
    cells.reserve(rows.size() - 1);
    long long max_crop = -1;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const csv::Row& row = rows[r];
        if (row.size() != header.size())
            raise(Errc::invalid_field,
                  path + ": row " + std::to_string(r + 1) + " has wrong field count");
        Cell cell;
        auto [it, inserted] = model_index.emplace(row[0], model_ids.size());
        if (inserted) model_ids.push_back(row[0]);
        cell.model = it->second;
        cell.sample = manifest.index_of(row[1]);
        if (cell.sample == SampleManifest::npos)
            raise(Errc::unknown_sample_id, "sample_id '" + row[1] + "' not in manifest");
        cell.crop = csv::parse_int(row[2], "crop_index");
        if (cell.crop < 0) raise(Errc::invalid_field, "negative crop_index");
        max_crop = std::max(max_crop, cell.crop);
        double sum = 0.0;
        cell.probs.resize(n_classes);
        for (std::size_t c = 0; c < n_classes; ++c) {
            double p = csv::parse_double(row[3 + c], "p_" + std::to_string(c));
            if (p < 0.0 || p > 1.0)
                raise(Errc::invalid_field,
                      "probability " + csv::fmt_g9(p) + " outside [0,1] on row " +
                          std::to_string(r + 1));
            cell.probs[c] = p;
            sum += p;
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance)
            raise(Errc::row_not_stochastic,
                  "row " + std::to_string(r + 1) + " sums to " + csv::fmt_g9(sum));
        cells.push_back(std::move(cell));
    }

    std::size_t n_models = model_ids.size();
    std::size_t n_samples = manifest.size();
    std::size_t n_crops = static_cast<std::size_t>(max_crop) + 1;

    PredictionTensor tensor;
    tensor.model_ids = model_ids;
    tensor.n_models = n_models;
    tensor.n_samples = n_samples;
    tensor.n_crops = n_crops;
    tensor.n_classes = n_classes;
    tensor.values.assign(n_models * n_samples * n_crops * n_classes, 0.0);

    std::vector<char> seen(n_models * n_samples * n_crops, 0);
    for (const Cell& cell : cells) {
        std::size_t slot =
            (cell.model * n_samples + cell.sample) * n_crops + static_cast<std::size_t>(cell.crop);
        if (seen[slot])
            raise(Errc::duplicate_row,
                  "(model '" + model_ids[cell.model] + "', sample '" +
                      manifest.samples[cell.sample].sample_id + "', crop " +
                      std::to_string(cell.crop) + ") appears twice");
        seen[slot] = 1;
        for (std::size_t c = 0; c < n_classes; ++c)
            tensor.at(cell.model, cell.sample, static_cast<std::size_t>(cell.crop), c) =
                cell.probs[c];
    }
    // Dense check: every model/sample pair must cover crops 0..R-1.
    for (std::size_t m = 0; m < n_models; ++m)
        for (std::size_t s = 0; s < n_samples; ++s)
            for (std::size_t r = 0; r < n_crops; ++r)
                if (!seen[(m * n_samples + s) * n_crops + r])
                    raise(Errc::ragged_crops,
                          "missing crop " + std::to_string(r) + " for model '" + model_ids[m] +
                              "', sample '" + manifest.samples[s].sample_id + "'");
    return tensor;
}

void save_predictions(const PredictionTensor& tensor, const SampleManifest& manifest,
                      const std::string& path) {
    if (tensor.n_samples != manifest.size())
        raise(Errc::shape_mismatch, "tensor sample axis does not match manifest");
    std::string out = "model_id,sample_id,crop_index";
    for (std::size_t c = 0; c < tensor.n_classes; ++c) out += ",p_" + std::to_string(c);
    out += '\n';
    for (std::size_t m = 0; m < tensor.n_models; ++m)
        for (std::size_t s = 0; s < tensor.n_samples; ++s)
            for (std::size_t r = 0; r < tensor.n_crops; ++r) {
                out += tensor.model_ids[m];
                out += ',';
                out += manifest.samples[s].sample_id;
                out += ',';
                out += std::to_string(r);
                for (std::size_t c = 0; c < tensor.n_classes; ++c) {
                    out += ',';
                    out += csv::fmt_g9(tensor.at(m, s, r, c));
                }
                out += '\n';
            }
    csv::atomic_write(path, out);
}

}  // namespace imbeval
