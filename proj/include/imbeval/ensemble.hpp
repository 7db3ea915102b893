#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "imbeval/ingest.hpp"
#include "imbeval/matrix.hpp"
#include "imbeval/meta.hpp"

namespace imbeval {

enum class CombineRule { average, vote };
enum class ModelKind { full, cv };
CombineRule combine_rule_from_string(const std::string& s);
ModelKind model_kind_from_string(const std::string& s);
const char* to_string(CombineRule rule);
const char* to_string(ModelKind kind);

struct EnsembleSpec {
    struct Member {
        std::string model_id;
        double weight = 1.0;
        ModelKind kind = ModelKind::cv;
    };
    std::vector<Member> members;
    CombineRule rule = CombineRule::average;
};

// Weighted convex combination of per-model S x C predictions.
Matrix combine_average(std::span<const Matrix> preds, std::span<const double> weights);

// Each model casts its weight for its argmax class; output is one-hot of the
// winning class, ties to the lowest class index (both per model and overall).
Matrix combine_vote(std::span<const Matrix> preds, std::span<const double> weights);

struct SubsetSearchResult {
    EnsembleSpec spec;
    std::vector<std::size_t> member_indices;  // into the input model list
    double wacc = 0.0;
    std::uint64_t subsets_evaluated = 0;
};

// Rank models by individual WACC, then exhaustively score every non-empty
// unit-weight subset of the top min(top_k, M) under the rule. Ties prefer
// higher WACC, then fewer members, then the lexicographically smaller member
// list. Each subset is summed in a fixed model order, so results are
// identical for any thread count.
SubsetSearchResult subset_search(std::span<const Matrix> preds, std::span<const int> truth,
                                 std::span<const std::string> model_ids, int top_k,
                                 CombineRule rule);

// Per-model crop means for both pools, meta one-hot predictions for the CV
// pool when a meta model is given, then a weighted average with full models
// at full_weight and CV models at 1.
Matrix final_predict(const PredictionTensor& full_preds, const PredictionTensor& cv_preds,
                     const MetaModel* meta, double full_weight = 5.0);

// Crop means per model: M matrices of shape S x C.
std::vector<Matrix> aggregate_models(const PredictionTensor& tensor);

// ensemble.csv: model_id,weight,kind.
void save_ensemble(const EnsembleSpec& spec, const std::string& path);
EnsembleSpec load_ensemble(const std::string& path);

// final_predictions.csv: sample_id,p_0..p_{C-1},argmax.
void save_final_predictions(const Matrix& predictions, const SampleManifest& manifest,
                            const std::string& path);
Matrix load_final_predictions(const std::string& path, const SampleManifest& manifest);

}  // namespace imbeval
