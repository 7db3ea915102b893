#include "imbeval/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "imbeval/cropper.hpp"
#include "imbeval/csv.hpp"
#include "imbeval/error.hpp"
#include "imbeval/metrics.hpp"

namespace imbeval {

CombineRule combine_rule_from_string(const std::string& s) {
    if (s == "average") return CombineRule::average;
    if (s == "vote") return CombineRule::vote;
    raise(Errc::invalid_argument, "unknown combination rule '" + s + "'");
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "full") return ModelKind::full;
    if (s == "cv") return ModelKind::cv;
    raise(Errc::invalid_argument, "unknown model kind '" + s + "'");
}

const char* to_string(CombineRule rule) {
    return rule == CombineRule::average ? "average" : "vote";
}

const char* to_string(ModelKind kind) { return kind == ModelKind::full ? "full" : "cv"; }

namespace {

void check_stack(std::span<const Matrix> preds, std::span<const double> weights) {
    if (preds.empty()) raise(Errc::empty_ensemble, "no model predictions to combine");
    if (weights.size() != preds.size())
        raise(Errc::length_mismatch, std::to_string(weights.size()) + " weights vs " +
                                         std::to_string(preds.size()) + " models");
    for (double w : weights)
        if (w <= 0.0) raise(Errc::invalid_argument, "ensemble weights must be positive");
    for (const Matrix& m : preds)
        if (!m.same_shape(preds.front()))
            raise(Errc::shape_mismatch, "model prediction shapes disagree");
}

}  // namespace

Matrix combine_average(std::span<const Matrix> preds, std::span<const double> weights) {
    check_stack(preds, weights);
    const std::size_t S = preds.front().rows, C = preds.front().cols;
    double weight_sum = 0.0;
    for (double w : weights) weight_sum += w;

    Matrix out(S, C);
#pragma omp parallel for schedule(static)
    for (long s = 0; s < static_cast<long>(S); ++s) {
        for (std::size_t m = 0; m < preds.size(); ++m) {
            const double w = weights[m];
            auto row = preds[m].row(static_cast<std::size_t>(s));
            for (std::size_t c = 0; c < C; ++c)
                out.at(static_cast<std::size_t>(s), c) += w * row[c];
        }
        for (std::size_t c = 0; c < C; ++c) out.at(static_cast<std::size_t>(s), c) /= weight_sum;
    }
    return out;
}

Matrix combine_vote(std::span<const Matrix> preds, std::span<const double> weights) {
    check_stack(preds, weights);
    const std::size_t S = preds.front().rows, C = preds.front().cols;
    Matrix out(S, C);
#pragma omp parallel for schedule(static)
    for (long s = 0; s < static_cast<long>(S); ++s) {
        std::vector<double> votes(C, 0.0);
        for (std::size_t m = 0; m < preds.size(); ++m)
            votes[argmax(preds[m].row(static_cast<std::size_t>(s)))] += weights[m];
        out.at(static_cast<std::size_t>(s), argmax(votes)) = 1.0;
    }
    return out;
}

namespace {

double subset_wacc(std::span<const Matrix> preds, std::span<const std::size_t> ranked,
                   std::uint64_t mask, std::span<const int> truth,
                   std::span<const int> model_argmax, CombineRule rule, int class_count,
                   std::vector<double>& scratch, std::vector<int>& predicted) {
    const std::size_t S = preds.front().rows, C = preds.front().cols;
    for (std::size_t s = 0; s < S; ++s) {
        std::fill(scratch.begin(), scratch.end(), 0.0);
        if (rule == CombineRule::average) {
            // Fixed ascending-bit order keeps the float sum identical no
            // matter how subsets are scheduled across threads.
            for (std::size_t bit = 0; bit < ranked.size(); ++bit) {
                if (!(mask & (1ULL << bit))) continue;
                auto row = preds[ranked[bit]].row(s);
                for (std::size_t c = 0; c < C; ++c) scratch[c] += row[c];
            }
        } else {
            for (std::size_t bit = 0; bit < ranked.size(); ++bit) {
                if (!(mask & (1ULL << bit))) continue;
                scratch[static_cast<std::size_t>(model_argmax[ranked[bit] * S + s])] += 1.0;
            }
        }
        predicted[s] = static_cast<int>(argmax(scratch));
    }
    return wacc(confusion_matrix(truth, predicted, class_count));
}

struct Candidate {
    std::uint64_t mask = 0;
    double wacc = -1.0;
};

std::vector<std::size_t> subset_members(std::uint64_t mask,
                                        std::span<const std::size_t> ranked) {
    std::vector<std::size_t> members;
    for (std::size_t bit = 0; bit < ranked.size(); ++bit)
        if (mask & (1ULL << bit)) members.push_back(ranked[bit]);
    std::sort(members.begin(), members.end());
    return members;
}

// Strict total order: higher WACC, then fewer members, then the
// lexicographically smaller list of original model indices. Matching the
// brute-force oracle requires comparing original indices, not ranked bits.
bool better_candidate(const Candidate& a, const Candidate& b,
                      std::span<const std::size_t> ranked) {
    if (a.wacc != b.wacc) return a.wacc > b.wacc;
    if (b.mask == 0) return true;
    if (a.mask == 0) return false;
    int pa = __builtin_popcountll(a.mask), pb = __builtin_popcountll(b.mask);
    if (pa != pb) return pa < pb;
    if (a.mask == b.mask) return false;
    return subset_members(a.mask, ranked) < subset_members(b.mask, ranked);
}

}  // namespace

SubsetSearchResult subset_search(std::span<const Matrix> preds, std::span<const int> truth,
                                 std::span<const std::string> model_ids, int top_k,
                                 CombineRule rule) {
    if (preds.empty()) raise(Errc::empty_ensemble, "no models to search over");
    if (model_ids.size() != preds.size())
        raise(Errc::length_mismatch, "model id list does not match predictions");
    if (top_k < 1) raise(Errc::invalid_argument, "top_k must be >= 1");
    const std::size_t S = preds.front().rows;
    const int C = static_cast<int>(preds.front().cols);
    if (truth.size() != S) raise(Errc::length_mismatch, "truth does not match sample axis");
    for (const Matrix& m : preds)
        if (!m.same_shape(preds.front()))
            raise(Errc::shape_mismatch, "model prediction shapes disagree");

    const std::size_t M = preds.size();
    std::vector<int> model_argmax(M * S);
    std::vector<double> individual(M);
    for (std::size_t m = 0; m < M; ++m) {
        std::vector<int> predicted(S);
        for (std::size_t s = 0; s < S; ++s)
            predicted[s] = static_cast<int>(argmax(preds[m].row(s)));
        std::copy(predicted.begin(), predicted.end(), model_argmax.begin() + m * S);
        individual[m] = wacc(confusion_matrix(truth, predicted, C));
    }

    std::vector<std::size_t> ranked(M);
    std::iota(ranked.begin(), ranked.end(), std::size_t{0});
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
        return individual[a] > individual[b];
    });
    ranked.resize(std::min<std::size_t>(static_cast<std::size_t>(top_k), M));

    const std::uint64_t n_subsets = (1ULL << ranked.size()) - 1;
    Candidate best;
#pragma omp parallel
    {
        Candidate local;
        std::vector<double> scratch(static_cast<std::size_t>(C), 0.0);
        std::vector<int> predicted(S);
#pragma omp for schedule(dynamic, 64)
        for (long long mask = 1; mask <= static_cast<long long>(n_subsets); ++mask) {
            Candidate cand;
            cand.mask = static_cast<std::uint64_t>(mask);
            cand.wacc = subset_wacc(preds, ranked, cand.mask, truth, model_argmax, rule, C,
                                    scratch, predicted);
            if (better_candidate(cand, local, ranked)) local = cand;
        }
#pragma omp critical
        if (better_candidate(local, best, ranked)) best = local;
    }

    SubsetSearchResult result;
    result.wacc = best.wacc;
    result.subsets_evaluated = n_subsets;
    result.spec.rule = rule;
    result.member_indices = subset_members(best.mask, ranked);
    for (std::size_t idx : result.member_indices)
        result.spec.members.push_back({model_ids[idx], 1.0, ModelKind::cv});
    return result;
}

std::vector<Matrix> aggregate_models(const PredictionTensor& tensor) {
    std::vector<Matrix> out(tensor.n_models);
    for (std::size_t m = 0; m < tensor.n_models; ++m) {
        Matrix crops(tensor.n_crops, tensor.n_classes);
        Matrix agg(tensor.n_samples, tensor.n_classes);
        for (std::size_t s = 0; s < tensor.n_samples; ++s) {
            for (std::size_t r = 0; r < tensor.n_crops; ++r)
                std::copy_n(tensor.row(m, s, r).data(), tensor.n_classes, crops.row(r).data());
            auto mean = aggregate_mean(crops);
            std::copy(mean.begin(), mean.end(), agg.row(s).data());
        }
        out[m] = std::move(agg);
    }
    return out;
}

Matrix final_predict(const PredictionTensor& full_preds, const PredictionTensor& cv_preds,
                     const MetaModel* meta, double full_weight) {
    const std::size_t n_full = full_preds.n_models, n_cv = cv_preds.n_models;
    if (n_full + n_cv == 0) raise(Errc::empty_ensemble, "no models in either pool");
    if (full_weight <= 0.0) raise(Errc::invalid_argument, "full_weight must be positive");
    if (n_full > 0 && n_cv > 0 &&
        (full_preds.n_samples != cv_preds.n_samples ||
         full_preds.n_classes != cv_preds.n_classes))
        raise(Errc::shape_mismatch, "full and CV tensors disagree on samples or classes");

    std::vector<Matrix> stack;
    std::vector<double> weights;
    for (const Matrix& m : aggregate_models(full_preds)) {
        stack.push_back(m);
        weights.push_back(full_weight);
    }
    if (n_cv > 0) {
        if (meta) {
            const std::size_t F = cv_preds.n_crops * cv_preds.n_classes;
            if (static_cast<int>(F) != meta->features)
                raise(Errc::shape_mismatch,
                      "meta model expects " + std::to_string(meta->features) +
                          " features, CV tensor provides " + std::to_string(F));
            for (std::size_t m = 0; m < n_cv; ++m) {
                Matrix flattened(cv_preds.n_samples, F);
                for (std::size_t s = 0; s < cv_preds.n_samples; ++s)
                    std::copy_n(&cv_preds.values[((m * cv_preds.n_samples + s) *
                                                  cv_preds.n_crops) * cv_preds.n_classes],
                                F, flattened.row(s).data());
                std::vector<int> labels = meta_predict(*meta, flattened);
                Matrix onehot(cv_preds.n_samples, cv_preds.n_classes);
                for (std::size_t s = 0; s < cv_preds.n_samples; ++s)
                    onehot.at(s, static_cast<std::size_t>(labels[s])) = 1.0;
                stack.push_back(std::move(onehot));
                weights.push_back(1.0);
            }
        } else {
            for (const Matrix& m : aggregate_models(cv_preds)) {
                stack.push_back(m);
                weights.push_back(1.0);
            }
        }
    }
    return combine_average(stack, weights);
}

void save_ensemble(const EnsembleSpec& spec, const std::string& path) {
    std::string out = "model_id,weight,kind\n";
    for (const auto& member : spec.members)
        out += member.model_id + "," + csv::fmt_g9(member.weight) + "," +
               to_string(member.kind) + "\n";
    csv::atomic_write(path, out);
}

EnsembleSpec load_ensemble(const std::string& path) {
    auto rows = csv::read_file(path);
    if (rows.empty() || rows.front() != csv::Row{"model_id", "weight", "kind"})
        raise(Errc::missing_column, "ensemble file must have header model_id,weight,kind");
    EnsembleSpec spec;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const csv::Row& row = rows[r];
        if (row.size() != 3)
            raise(Errc::invalid_field, "ensemble row " + std::to_string(r + 1) + " malformed");
        double w = csv::parse_double(row[1], "weight");
        if (w <= 0.0) raise(Errc::invalid_field, "ensemble weights must be positive");
        spec.members.push_back({row[0], w, model_kind_from_string(row[2])});
    }
    if (spec.members.empty()) raise(Errc::empty_ensemble, "'" + path + "' lists no members");
    return spec;
}

void save_final_predictions(const Matrix& predictions, const SampleManifest& manifest,
                            const std::string& path) {
    if (predictions.rows != manifest.size())
        raise(Errc::shape_mismatch, "prediction rows do not match manifest");
    std::string out = "sample_id";
    for (std::size_t c = 0; c < predictions.cols; ++c) out += ",p_" + std::to_string(c);
    out += ",argmax\n";
    for (std::size_t s = 0; s < predictions.rows; ++s) {
        out += manifest.samples[s].sample_id;
        for (std::size_t c = 0; c < predictions.cols; ++c)
            out += "," + csv::fmt_g9(predictions.at(s, c));
        out += "," + std::to_string(argmax(predictions.row(s)));
        out += '\n';
    }
    csv::atomic_write(path, out);
}

Matrix load_final_predictions(const std::string& path, const SampleManifest& manifest) {
    auto rows = csv::read_file(path);
    if (rows.empty() || rows.front().size() < 3 || rows.front()[0] != "sample_id" ||
        rows.front().back() != "argmax")
        raise(Errc::missing_column,
              "final predictions must have header sample_id,p_0..p_{C-1},argmax");
    const std::size_t C = rows.front().size() - 2;
    Matrix out(manifest.size(), C);
    std::vector<char> seen(manifest.size(), 0);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const csv::Row& row = rows[r];
        if (row.size() != C + 2)
            raise(Errc::invalid_field, "row " + std::to_string(r + 1) + " malformed");
        std::size_t idx = manifest.index_of(row[0]);
        if (idx == SampleManifest::npos)
            raise(Errc::unknown_sample_id, "sample_id '" + row[0] + "' not in manifest");
        if (seen[idx]) raise(Errc::duplicate_row, "sample_id '" + row[0] + "' listed twice");
        seen[idx] = 1;
        for (std::size_t c = 0; c < C; ++c)
            out.at(idx, c) = csv::parse_double(row[c + 1], "probability");
    }
    for (std::size_t i = 0; i < manifest.size(); ++i)
        if (!seen[i])
            raise(Errc::invalid_field,
                  "sample_id '" + manifest.samples[i].sample_id + "' missing from predictions");
    return out;
}

}  // namespace imbeval
