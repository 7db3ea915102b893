#include "imbeval/splits.hpp"

#include <algorithm>
#include <numeric>

#include "imbeval/csv.hpp"
#include "imbeval/error.hpp"
#include "imbeval/rng.hpp"

namespace imbeval {

int FoldAssignment::fold(const std::string& sample_id) const {
    auto it = fold_of.find(sample_id);
    if (it == fold_of.end())
        raise(Errc::unknown_sample_id, "sample_id '" + sample_id + "' has no fold");
    return it->second;
}

SecondaryPolicy secondary_policy_from_string(const std::string& s) {
    if (s == "exclude") return SecondaryPolicy::exclude;
    if (s == "add_to_train" || s == "add-to-train") return SecondaryPolicy::add_to_train;
    raise(Errc::invalid_argument, "unknown secondary policy '" + s + "'");
}

FoldAssignment stratified_group_kfold(const SampleManifest& manifest, int k,
                                      std::uint64_t seed) {
    if (k < 2) raise(Errc::invalid_argument, "k must be >= 2, got " + std::to_string(k));
    const std::size_t C = static_cast<std::size_t>(manifest.class_count);

    struct Group {
        std::string id;
        std::size_t size = 0;                // all samples
        std::vector<long long> class_hist;   // primary samples only
        std::vector<std::size_t> members;
    };
    std::vector<Group> groups;
    std::unordered_map<std::string, std::size_t> group_index;
    for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
        const Sample& s = manifest.samples[i];
        auto [it, inserted] = group_index.emplace(s.group_id, groups.size());
        if (inserted) {
            groups.push_back(Group{s.group_id, 0, std::vector<long long>(C, 0), {}});
        }
        Group& g = groups[it->second];
        g.size += 1;
        g.members.push_back(i);
        if (s.dataset == DatasetTag::primary) g.class_hist[static_cast<std::size_t>(s.label)] += 1;
    }
    if (groups.size() < static_cast<std::size_t>(k))
        raise(Errc::too_few_groups, std::to_string(groups.size()) + " groups cannot fill " +
                                        std::to_string(k) + " folds");

    // Per-fold target: the primary class histogram divided evenly.
    std::vector<double> target(C, 0.0);
    for (const Group& g : groups)
        for (std::size_t c = 0; c < C; ++c) target[c] += static_cast<double>(g.class_hist[c]);
    for (std::size_t c = 0; c < C; ++c) target[c] /= k;

    // Seeded shuffle breaks size ties; stable sort keeps that order within
    // each size bucket.
    std::vector<std::size_t> order(groups.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return groups[a].size > groups[b].size;
    });

    std::vector<std::vector<double>> fold_hist(static_cast<std::size_t>(k),
                                               std::vector<double>(C, 0.0));
    std::vector<std::size_t> fold_total(static_cast<std::size_t>(k), 0);
    std::vector<int> fold_of_group(groups.size(), -1);
    for (std::size_t gi : order) {
        const Group& g = groups[gi];
        int best_fold = 0;
        double best_cost = 0.0;
        bool have = false;
        for (int f = 0; f < k; ++f) {
            double cost = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                double d = fold_hist[f][c] + static_cast<double>(g.class_hist[c]) - target[c];
                cost += d * d;
            }
            bool better = !have || cost < best_cost ||
                          (cost == best_cost && fold_total[f] < fold_total[best_fold]);
            if (better) {
                best_fold = f;
                best_cost = cost;
                have = true;
            }
        }
        fold_of_group[gi] = best_fold;
        fold_total[best_fold] += g.size;
        for (std::size_t c = 0; c < C; ++c)
            fold_hist[best_fold][c] += static_cast<double>(g.class_hist[c]);
    }

    FoldAssignment assignment;
    assignment.k = k;
    assignment.seed = seed;
    assignment.fold_of.reserve(manifest.size());
    for (std::size_t gi = 0; gi < groups.size(); ++gi)
        for (std::size_t member : groups[gi].members)
            assignment.fold_of.emplace(manifest.samples[member].sample_id, fold_of_group[gi]);
    return assignment;
}

FoldSplit fold_split(const SampleManifest& manifest, const FoldAssignment& assignment,
                     int fold, SecondaryPolicy policy) {
    if (fold < 0 || fold >= assignment.k)
        raise(Errc::fold_out_of_range,
              "fold " + std::to_string(fold) + " outside [0, " + std::to_string(assignment.k) + ")");
    FoldSplit split;
    for (const Sample& s : manifest.samples) {
        if (s.dataset == DatasetTag::secondary) {
            if (policy == SecondaryPolicy::add_to_train) split.train_ids.push_back(s.sample_id);
            continue;
        }
        if (assignment.fold(s.sample_id) == fold)
            split.validation_ids.push_back(s.sample_id);
        else
            split.train_ids.push_back(s.sample_id);
    }
    return split;
}

void save_folds(const SampleManifest& manifest, const FoldAssignment& assignment,
                const std::string& path) {
    std::string out = "sample_id,fold\n";
    for (const Sample& s : manifest.samples)
        out += s.sample_id + "," + std::to_string(assignment.fold(s.sample_id)) + "\n";
    csv::atomic_write(path, out);
}

FoldAssignment load_folds(const std::string& path, const SampleManifest& manifest) {
    auto rows = csv::read_file(path);
    if (rows.empty() || rows.front() != csv::Row{"sample_id", "fold"})
        raise(Errc::missing_column, "folds file must have header sample_id,fold");
    FoldAssignment assignment;
    int max_fold = -1;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const csv::Row& row = rows[r];
        if (row.size() != 2)
            raise(Errc::invalid_field, "folds row " + std::to_string(r + 1) + " malformed");
        if (manifest.index_of(row[0]) == SampleManifest::npos)
            raise(Errc::unknown_sample_id, "sample_id '" + row[0] + "' not in manifest");
        long long fold = csv::parse_int(row[1], "fold");
        if (fold < 0) raise(Errc::invalid_field, "negative fold index");
        if (!assignment.fold_of.emplace(row[0], static_cast<int>(fold)).second)
            raise(Errc::duplicate_row, "sample_id '" + row[0] + "' listed twice");
        max_fold = std::max(max_fold, static_cast<int>(fold));
    }
    for (const Sample& s : manifest.samples)
        if (!assignment.fold_of.count(s.sample_id))
            raise(Errc::invalid_field, "sample_id '" + s.sample_id + "' missing from folds file");
    assignment.k = max_fold + 1;
    return assignment;
}

}  // namespace imbeval
