#pragma once

// Deliberately naive serial implementations used as independent oracles by
// the test suites and as the baseline side of the benchmark. Nothing here
// may call into the library's optimized paths.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "imbeval/matrix.hpp"

namespace imbeval::ref {

double wacc_bruteforce(std::span<const int> truth, std::span<const int> predicted,
                       int class_count);
double accuracy_bruteforce(std::span<const int> truth, std::span<const int> predicted);

// All positive/negative pairs, 0.5 credit for score ties.
double auc_pairwise(std::span<const int> truth, const Matrix& scores, int cls);
double mean_auc_pairwise(std::span<const int> truth, const Matrix& scores);

Matrix combine_average_serial(std::span<const Matrix> preds, std::span<const double> weights);
Matrix combine_vote_serial(std::span<const Matrix> preds, std::span<const double> weights);

struct BruteForceSubset {
    std::vector<std::size_t> members;  // original model indices, ascending
    double wacc = -1.0;
    std::uint64_t subsets_evaluated = 0;
};

// Every non-empty subset of all M models, serial, unit weights. Ties prefer
// higher WACC, then fewer members, then the lexicographically smaller list.
BruteForceSubset subset_search_bruteforce(std::span<const Matrix> preds,
                                          std::span<const int> truth, bool vote_rule);

// Independent linspace-and-round grid oracle.
std::vector<std::pair<int, int>> grid_offsets_linspace(int height, int width, int crop,
                                                       int side);

// Naive softmax cross-entropy (no log-sum-exp rearrangement), for finite
// difference checks at moderate logit scales.
double naive_weighted_ce(std::span<const double> logits, int label, double w);

// Central finite differences of the weighted CE w.r.t. weights and bias of a
// linear softmax with parameters (W, b) flattened row-major, bias last.
std::vector<double> finite_diff_gradient(const Matrix& weights, std::span<const double> bias,
                                         std::span<const double> x, int label, double w,
                                         double epsilon);

// Projected gradient ascent on the SVM dual:
//   max  sum(alpha) - 1/2 alpha' Q alpha,  Q_ij = y_i y_j K_ij
//   s.t. 0 <= alpha <= c_reg, y' alpha = 0.
// Returns the optimal alpha; intended for small problems (S <= ~50).
std::vector<double> projected_gradient_qp(const std::vector<double>& gram,
                                          std::span<const int> y, double c_reg,
                                          int max_iters = 200000);

double svm_dual_objective(const std::vector<double>& gram, std::span<const int> y,
                          std::span<const double> alpha);

// Perceptron feasibility proof of linear separability for +-1 labels.
bool perceptron_separable(const Matrix& features, std::span<const int> y, int max_epochs = 2000);

}  // namespace imbeval::ref
