#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "imbeval/matrix.hpp"

namespace imbeval {

// Binary RBF-kernel SVM in dual form. dual_coef holds alpha_i * y_i for the
// support vectors only; support_indices point back into the training set the
// model was fit on.
struct SvmModel {
    Matrix support_vectors;              // n_sv x F
    std::vector<double> dual_coef;       // alpha_i * y_i
    std::vector<std::size_t> support_indices;
    double bias = 0.0;
    double gamma = 1.0;
    double c_reg = 1.0;
    bool converged = true;
};

// One-vs-rest stack of binary SVMs, one per class.
struct MetaModel {
    int classes = 0;
    int features = 0;
    std::vector<SvmModel> per_class;
};

double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma);

struct SvmFitOptions {
    double tol = 1e-3;
    int max_passes = 200;
    std::uint64_t seed = 0;
};

// Sequential minimal optimization over full sweeps: every KKT violator gets
// paired with a seeded random partner first, then deterministic fallback
// partners until a step succeeds. A sweep with no updates means every sample
// satisfies the KKT conditions within tol. Runs out of passes -> the model
// comes back flagged converged = false.
SvmModel svm_fit(const Matrix& X, std::span<const int> y, double c_reg, double gamma,
                 const SvmFitOptions& options = {});

double svm_decision(const SvmModel& model, std::span<const double> x);

// Scale-aware default: 1 / (F * var(X)), with var over all entries.
double auto_gamma(const Matrix& X);

// One-vs-rest fit over flattened crop-probability vectors. Training order is
// canonicalized internally (sorted by feature row, then label), so the model
// does not depend on input row order. C = 2 fits a single binary problem and
// uses its exact negation for the second class.
MetaModel meta_fit(const Matrix& flattened, std::span<const int> labels, int class_count,
                   double c_reg, double gamma, std::uint64_t seed,
                   const SvmFitOptions& options = {});

Matrix meta_decision_values(const MetaModel& model, const Matrix& flattened);
// Argmax of decision values; ties go to the lowest class index.
std::vector<int> meta_predict(const MetaModel& model, const Matrix& flattened);

// Stratified k-fold mean validation WACC. When a class has fewer than k
// samples the fold count shrinks to the smallest class (reported through
// k_used) unless allow_reduce is false, which raises TooFewSamples instead.
double meta_cv(const Matrix& flattened, std::span<const int> labels, int class_count, int k,
               double c_reg, double gamma, std::uint64_t seed, bool allow_reduce = true,
               int* k_used = nullptr, const SvmFitOptions& options = {});

// Meta-model file: classes/features header, then per class a section with
// gamma, c_reg, bias, converged and the support vectors.
void save_meta_model(const MetaModel& model, const std::string& path);
MetaModel load_meta_model(const std::string& path);

}  // namespace imbeval
