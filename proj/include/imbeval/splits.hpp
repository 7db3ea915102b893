#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "imbeval/ingest.hpp"

namespace imbeval {

// k-fold assignment that never splits a lesion group across folds.
struct FoldAssignment {
    int k = 0;
    std::uint64_t seed = 0;
    std::unordered_map<std::string, int> fold_of;

    int fold(const std::string& sample_id) const;
};

enum class SecondaryPolicy { exclude, add_to_train };
SecondaryPolicy secondary_policy_from_string(const std::string& s);

// Greedy stratified assignment: groups sorted by size descending (ties by
// seeded shuffle), each placed on the fold minimizing the squared deviation
// from the per-fold target class histogram. Targets and group class vectors
// count primary-dataset samples only, since validation folds hold primary
// data. Deterministic for a given (manifest, k, seed).
FoldAssignment stratified_group_kfold(const SampleManifest& manifest, int k,
                                      std::uint64_t seed);

struct FoldSplit {
    std::vector<std::string> train_ids;
    std::vector<std::string> validation_ids;
};

// Validation = primary samples of the fold. Train = remaining primary
// samples, plus every secondary sample when policy is add_to_train.
// Secondary samples never enter validation.
FoldSplit fold_split(const SampleManifest& manifest, const FoldAssignment& assignment,
                     int fold, SecondaryPolicy policy);

// folds.csv: sample_id,fold (manifest row order).
void save_folds(const SampleManifest& manifest, const FoldAssignment& assignment,
                const std::string& path);
FoldAssignment load_folds(const std::string& path, const SampleManifest& manifest);

}  // namespace imbeval
