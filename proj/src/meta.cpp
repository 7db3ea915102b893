#include "imbeval/meta.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "imbeval/csv.hpp"
#include "imbeval/error.hpp"
#include "imbeval/metrics.hpp"
#include "imbeval/rng.hpp"

namespace imbeval {

double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma) {
    if (x.size() != z.size())
        raise(Errc::dimension_mismatch, std::to_string(x.size()) + " vs " +
                                            std::to_string(z.size()) + " kernel inputs");
    if (gamma <= 0.0) raise(Errc::invalid_argument, "gamma must be positive");
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x[i] - z[i];
        d2 += d * d;
    }
    return std::exp(-gamma * d2);
}

double auto_gamma(const Matrix& X) {
    if (X.rows == 0 || X.cols == 0) raise(Errc::empty_input, "no features for auto gamma");
    double mean = 0.0;
    for (double v : X.values) mean += v;
    mean /= static_cast<double>(X.values.size());
    double var = 0.0;
    for (double v : X.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(X.values.size());
    if (var <= 0.0) return 1.0 / static_cast<double>(X.cols);
    return 1.0 / (static_cast<double>(X.cols) * var);
}

namespace {

// Dense Gram matrix; desk-scale problems keep S small enough for this.
std::vector<double> gram_matrix(const Matrix& X, double gamma) {
    const std::size_t S = X.rows;
    std::vector<double> K(S * S, 0.0);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(S); ++i) {
        for (std::size_t j = static_cast<std::size_t>(i); j < S; ++j) {
            double v = rbf_kernel(X.row(static_cast<std::size_t>(i)), X.row(j), gamma);
            K[static_cast<std::size_t>(i) * S + j] = v;
            K[j * S + static_cast<std::size_t>(i)] = v;
        }
    }
    return K;
}

}  // namespace

SvmModel svm_fit(const Matrix& X, std::span<const int> y, double c_reg, double gamma,
                 const SvmFitOptions& options) {
    const std::size_t S = X.rows;
    if (y.size() != S)
        raise(Errc::length_mismatch,
              std::to_string(y.size()) + " labels vs " + std::to_string(S) + " rows");
    if (S < 2) raise(Errc::too_few_samples, "need at least 2 samples to fit an SVM");
    if (c_reg <= 0.0) raise(Errc::invalid_argument, "C must be positive");
    bool has_pos = false, has_neg = false;
    for (int v : y) {
        if (v == 1) has_pos = true;
        else if (v == -1) has_neg = true;
        else raise(Errc::invalid_field, "labels must be +1 or -1");
    }
    if (!has_pos || !has_neg) raise(Errc::single_class, "both classes must be present");

    const std::vector<double> K = gram_matrix(X, gamma);
    std::vector<double> alpha(S, 0.0);
    // u_i = sum_j alpha_j y_j K_ij, maintained incrementally.
    std::vector<double> u(S, 0.0);
    double b = 0.0;
    Rng rng(options.seed);

    auto take_step = [&](std::size_t i, std::size_t j) -> bool {
        if (i == j) return false;
        const double yi = y[i], yj = y[j];
        const double ai = alpha[i], aj = alpha[j];
        double L, H;
        if (yi != yj) {
            L = std::max(0.0, aj - ai);
            H = std::min(c_reg, c_reg + aj - ai);
        } else {
            L = std::max(0.0, ai + aj - c_reg);
            H = std::min(c_reg, ai + aj);
        }
        if (L >= H) return false;
        const double Kii = K[i * S + i], Kjj = K[j * S + j], Kij = K[i * S + j];
        const double eta = 2.0 * Kij - Kii - Kjj;
        if (eta >= 0.0) return false;
        const double Ei = u[i] + b - yi;
        const double Ej = u[j] + b - yj;
        double aj_new = aj - yj * (Ei - Ej) / eta;
        aj_new = std::clamp(aj_new, L, H);
        if (std::abs(aj_new - aj) < 1e-12) return false;
        const double ai_new = ai + yi * yj * (aj - aj_new);

        const double b1 = b - Ei - yi * (ai_new - ai) * Kii - yj * (aj_new - aj) * Kij;
        const double b2 = b - Ej - yi * (ai_new - ai) * Kij - yj * (aj_new - aj) * Kjj;
        if (ai_new > 0.0 && ai_new < c_reg)
            b = b1;
        else if (aj_new > 0.0 && aj_new < c_reg)
            b = b2;
        else
            b = (b1 + b2) / 2.0;

        const double di = yi * (ai_new - ai), dj = yj * (aj_new - aj);
        for (std::size_t k = 0; k < S; ++k) u[k] += di * K[i * S + k] + dj * K[j * S + k];
        alpha[i] = ai_new;
        alpha[j] = aj_new;
        return true;
    };

    bool converged = false;
    for (int pass = 0; pass < options.max_passes && !converged; ++pass) {
        std::size_t changed = 0;
        for (std::size_t i = 0; i < S; ++i) {
            const double Ei = u[i] + b - y[i];
            const double r = y[i] * Ei;
            const bool violates = (r < -options.tol && alpha[i] < c_reg) ||
                                  (r > options.tol && alpha[i] > 0.0);
            if (!violates) continue;
            // Random partner first, then a deterministic scan so a violating
            // pair is never missed.
            std::size_t j = rng.uniform_index(S - 1);
            if (j >= i) j += 1;
            if (take_step(i, j)) {
                changed += 1;
                continue;
            }
            for (std::size_t step = 1; step < S; ++step) {
                std::size_t cand = (i + step) % S;
                if (cand == j) continue;
                if (take_step(i, cand)) {
                    changed += 1;
                    break;
                }
            }
        }
        if (changed == 0) converged = true;
    }

    SvmModel model;
    model.gamma = gamma;
    model.c_reg = c_reg;
    model.bias = b;
    model.converged = converged;
    std::size_t n_sv = 0;
    for (double a : alpha)
        if (a > 0.0) n_sv += 1;
    model.support_vectors = Matrix(n_sv, X.cols);
    model.dual_coef.reserve(n_sv);
    model.support_indices.reserve(n_sv);
    std::size_t sv = 0;
    for (std::size_t i = 0; i < S; ++i) {
        if (alpha[i] <= 0.0) continue;
        std::copy_n(X.row(i).data(), X.cols, model.support_vectors.row(sv).data());
        model.dual_coef.push_back(alpha[i] * y[i]);
        model.support_indices.push_back(i);
        sv += 1;
    }
    return model;
}

double svm_decision(const SvmModel& model, std::span<const double> x) {
    double sum = model.bias;
    for (std::size_t s = 0; s < model.support_vectors.rows; ++s)
        sum += model.dual_coef[s] * rbf_kernel(model.support_vectors.row(s), x, model.gamma);
    return sum;
}

namespace {

SvmModel negated(const SvmModel& model) {
    SvmModel out = model;
    for (double& c : out.dual_coef) c = -c;
    out.bias = -out.bias;
    return out;
}

// Canonical training order: lexicographic by feature row, label as
// tie-break. Makes the fit independent of caller row order.
std::vector<std::size_t> canonical_order(const Matrix& X, std::span<const int> labels) {
    std::vector<std::size_t> order(X.rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        auto ra = X.row(a), rb = X.row(b);
        for (std::size_t i = 0; i < ra.size(); ++i) {
            if (ra[i] < rb[i]) return true;
            if (ra[i] > rb[i]) return false;
        }
        return labels[a] < labels[b];
    });
    return order;
}

}  // namespace

MetaModel meta_fit(const Matrix& flattened, std::span<const int> labels, int class_count,
                   double c_reg, double gamma, std::uint64_t seed,
                   const SvmFitOptions& options) {
    if (labels.size() != flattened.rows)
        raise(Errc::length_mismatch, "labels do not match feature rows");
    if (class_count < 2) raise(Errc::invalid_argument, "need at least 2 classes");
    std::vector<long long> present(static_cast<std::size_t>(class_count), 0);
    for (int label : labels) {
        if (label < 0 || label >= class_count)
            raise(Errc::label_out_of_range, "label " + std::to_string(label));
        present[static_cast<std::size_t>(label)] += 1;
    }
    for (int c = 0; c < class_count; ++c)
        if (present[static_cast<std::size_t>(c)] == 0)
            raise(Errc::missing_class, "class " + std::to_string(c) + " absent from training data");

    const auto order = canonical_order(flattened, labels);
    Matrix X(flattened.rows, flattened.cols);
    std::vector<int> y_sorted(labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        std::copy_n(flattened.row(order[i]).data(), flattened.cols, X.row(i).data());
        y_sorted[i] = labels[order[i]];
    }

    MetaModel model;
    model.classes = class_count;
    model.features = static_cast<int>(flattened.cols);
    model.per_class.resize(static_cast<std::size_t>(class_count));

    const int fits = class_count == 2 ? 1 : class_count;
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < fits; ++c) {
        try {
            std::vector<int> y(y_sorted.size());
            for (std::size_t i = 0; i < y_sorted.size(); ++i)
                y[i] = y_sorted[i] == c ? 1 : -1;
            SvmFitOptions per_class = options;
            per_class.seed = Rng::mix(seed ^ (0x6d657461ULL + static_cast<std::uint64_t>(c)));
            model.per_class[static_cast<std::size_t>(c)] =
                svm_fit(X, y, c_reg, gamma, per_class);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    if (class_count == 2) model.per_class[1] = negated(model.per_class[0]);
    return model;
}

Matrix meta_decision_values(const MetaModel& model, const Matrix& flattened) {
    if (static_cast<int>(flattened.cols) != model.features)
        raise(Errc::dimension_mismatch, "feature width " + std::to_string(flattened.cols) +
                                            " vs model " + std::to_string(model.features));
    Matrix decisions(flattened.rows, static_cast<std::size_t>(model.classes));
#pragma omp parallel for schedule(static)
    for (long s = 0; s < static_cast<long>(flattened.rows); ++s)
        for (int c = 0; c < model.classes; ++c)
            decisions.at(static_cast<std::size_t>(s), static_cast<std::size_t>(c)) =
                svm_decision(model.per_class[static_cast<std::size_t>(c)],
                             flattened.row(static_cast<std::size_t>(s)));
    return decisions;
}

std::vector<int> meta_predict(const MetaModel& model, const Matrix& flattened) {
    Matrix decisions = meta_decision_values(model, flattened);
    std::vector<int> labels(decisions.rows);
    for (std::size_t s = 0; s < decisions.rows; ++s)
        labels[s] = static_cast<int>(argmax(decisions.row(s)));
    return labels;
}

double meta_cv(const Matrix& flattened, std::span<const int> labels, int class_count, int k,
               double c_reg, double gamma, std::uint64_t seed, bool allow_reduce,
               int* k_used_out, const SvmFitOptions& options) {
    if (labels.size() != flattened.rows)
        raise(Errc::length_mismatch, "labels do not match feature rows");
    if (k < 2) raise(Errc::invalid_argument, "k must be >= 2");

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(class_count));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= class_count)
            raise(Errc::label_out_of_range, "label " + std::to_string(labels[i]));
        by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    std::size_t min_class = flattened.rows;
    for (const auto& members : by_class) min_class = std::min(min_class, members.size());
    if (min_class == 0) raise(Errc::missing_class, "a class is absent from the data");

    int k_used = k;
    if (min_class < static_cast<std::size_t>(k)) {
        if (!allow_reduce)
            raise(Errc::too_few_samples, "smallest class has " + std::to_string(min_class) +
                                             " samples, fewer than k = " + std::to_string(k));
        k_used = static_cast<int>(min_class);
    }
    if (k_used < 2)
        raise(Errc::too_few_samples, "smallest class too small for any stratified split");
    if (k_used_out) *k_used_out = k_used;

    // Stratified deal: shuffle within each class, then round-robin to folds.
    Rng rng(seed);
    std::vector<int> fold_of(labels.size(), 0);
    for (auto& members : by_class) {
        rng.shuffle(members);
        for (std::size_t pos = 0; pos < members.size(); ++pos)
            fold_of[members[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k_used));
    }

    double wacc_sum = 0.0;
    for (int fold = 0; fold < k_used; ++fold) {
        std::vector<std::size_t> train_rows, val_rows;
        for (std::size_t i = 0; i < labels.size(); ++i)
            (fold_of[i] == fold ? val_rows : train_rows).push_back(i);

        Matrix train_X(train_rows.size(), flattened.cols);
        std::vector<int> train_y(train_rows.size());
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
            std::copy_n(flattened.row(train_rows[i]).data(), flattened.cols, train_X.row(i).data());
            train_y[i] = labels[train_rows[i]];
        }
        Matrix val_X(val_rows.size(), flattened.cols);
        std::vector<int> val_y(val_rows.size());
        for (std::size_t i = 0; i < val_rows.size(); ++i) {
            std::copy_n(flattened.row(val_rows[i]).data(), flattened.cols, val_X.row(i).data());
            val_y[i] = labels[val_rows[i]];
        }

        MetaModel fold_model =
            meta_fit(train_X, train_y, class_count, c_reg, gamma,
                     Rng::mix(seed + static_cast<std::uint64_t>(fold) * 7919ULL), options);
        std::vector<int> predicted = meta_predict(fold_model, val_X);
        wacc_sum += wacc(confusion_matrix(val_y, predicted, class_count));
    }
    return wacc_sum / static_cast<double>(k_used);
}

void save_meta_model(const MetaModel& model, const std::string& path) {
    std::string out = "classes," + std::to_string(model.classes) + "\n";
    out += "features," + std::to_string(model.features) + "\n";
    for (int c = 0; c < model.classes; ++c) {
        const SvmModel& svm = model.per_class[static_cast<std::size_t>(c)];
        out += "class," + std::to_string(c) + "\n";
        out += "gamma," + csv::fmt_g17(svm.gamma) + "\n";
        out += "c_reg," + csv::fmt_g17(svm.c_reg) + "\n";
        out += "bias," + csv::fmt_g17(svm.bias) + "\n";
        out += std::string("converged,") + (svm.converged ? "1" : "0") + "\n";
        out += "support," + std::to_string(svm.support_vectors.rows) + "\n";
        for (std::size_t s = 0; s < svm.support_vectors.rows; ++s) {
            out += "sv," + csv::fmt_g17(svm.dual_coef[s]);
            for (std::size_t f = 0; f < svm.support_vectors.cols; ++f)
                out += "," + csv::fmt_g17(svm.support_vectors.at(s, f));
            out += '\n';
        }
    }
    csv::atomic_write(path, out);
}

MetaModel load_meta_model(const std::string& path) {
    auto rows = csv::read_file(path);
    std::size_t r = 0;
    auto expect = [&](const std::string& key) -> const csv::Row& {
        if (r >= rows.size() || rows[r].size() < 2 || rows[r][0] != key)
            raise(Errc::invalid_field, "meta model file: expected '" + key + "' at line " +
                                           std::to_string(r + 1));
        return rows[r++];
    };
    MetaModel model;
    model.classes = static_cast<int>(csv::parse_int(expect("classes")[1], "classes"));
    model.features = static_cast<int>(csv::parse_int(expect("features")[1], "features"));
    if (model.classes < 2 || model.features <= 0)
        raise(Errc::invalid_field, "meta model header out of range");
    model.per_class.resize(static_cast<std::size_t>(model.classes));
    for (int c = 0; c < model.classes; ++c) {
        long long idx = csv::parse_int(expect("class")[1], "class");
        if (idx != c) raise(Errc::invalid_field, "meta model classes out of order");
        SvmModel& svm = model.per_class[static_cast<std::size_t>(c)];
        svm.gamma = csv::parse_double(expect("gamma")[1], "gamma");
        svm.c_reg = csv::parse_double(expect("c_reg")[1], "c_reg");
        svm.bias = csv::parse_double(expect("bias")[1], "bias");
        svm.converged = csv::parse_int(expect("converged")[1], "converged") != 0;
        long long n_sv = csv::parse_int(expect("support")[1], "support");
        if (n_sv < 0) raise(Errc::invalid_field, "negative support vector count");
        svm.support_vectors = Matrix(static_cast<std::size_t>(n_sv),
                                     static_cast<std::size_t>(model.features));
        svm.dual_coef.resize(static_cast<std::size_t>(n_sv));
        for (long long s = 0; s < n_sv; ++s) {
            if (r >= rows.size() || rows[r][0] != "sv" ||
                rows[r].size() != static_cast<std::size_t>(model.features) + 2)
                raise(Errc::invalid_field, "meta model support vector row malformed");
            svm.dual_coef[static_cast<std::size_t>(s)] =
                csv::parse_double(rows[r][1], "dual_coef");
            for (int f = 0; f < model.features; ++f)
                svm.support_vectors.at(static_cast<std::size_t>(s), static_cast<std::size_t>(f)) =
                    csv::parse_double(rows[r][static_cast<std::size_t>(f) + 2], "sv");
            ++r;
        }
    }
    return model;
}

}  // namespace imbeval
