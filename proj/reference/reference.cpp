#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace imbeval::ref {

double wacc_bruteforce(std::span<const int> truth, std::span<const int> predicted,
                       int class_count) {
    double sum = 0.0;
    for (int cls = 0; cls < class_count; ++cls) {
        long long total = 0, correct = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (truth[i] != cls) continue;
            total += 1;
            if (predicted[i] == cls) correct += 1;
        }
        if (total == 0) throw std::runtime_error("bruteforce wacc: empty class");
        sum += static_cast<double>(correct) / static_cast<double>(total);
    }
    return sum / static_cast<double>(class_count);
}

double accuracy_bruteforce(std::span<const int> truth, std::span<const int> predicted) {
    long long correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (truth[i] == predicted[i]) correct += 1;
    return static_cast<double>(correct) / static_cast<double>(truth.size());
}

double auc_pairwise(std::span<const int> truth, const Matrix& scores, int cls) {
    double credit = 0.0;
    long long pairs = 0;
    for (std::size_t p = 0; p < truth.size(); ++p) {
        if (truth[p] != cls) continue;
        for (std::size_t n = 0; n < truth.size(); ++n) {
            if (truth[n] == cls) continue;
            pairs += 1;
            double sp = scores.at(p, static_cast<std::size_t>(cls));
            double sn = scores.at(n, static_cast<std::size_t>(cls));
            if (sp > sn)
                credit += 1.0;
            else if (sp == sn)
                credit += 0.5;
        }
    }
    if (pairs == 0) throw std::runtime_error("bruteforce auc: degenerate class");
    return credit / static_cast<double>(pairs);
}

double mean_auc_pairwise(std::span<const int> truth, const Matrix& scores) {
    double sum = 0.0;
    for (std::size_t c = 0; c < scores.cols; ++c)
        sum += auc_pairwise(truth, scores, static_cast<int>(c));
    return sum / static_cast<double>(scores.cols);
}

Matrix combine_average_serial(std::span<const Matrix> preds, std::span<const double> weights) {
    const std::size_t S = preds.front().rows, C = preds.front().cols;
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    Matrix out(S, C);
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t m = 0; m < preds.size(); ++m)
            for (std::size_t c = 0; c < C; ++c) out.at(s, c) += weights[m] * preds[m].at(s, c);
    for (double& v : out.values) v /= wsum;
    return out;
}

Matrix combine_vote_serial(std::span<const Matrix> preds, std::span<const double> weights) {
    const std::size_t S = preds.front().rows, C = preds.front().cols;
    Matrix out(S, C);
    for (std::size_t s = 0; s < S; ++s) {
        std::vector<double> votes(C, 0.0);
        for (std::size_t m = 0; m < preds.size(); ++m) {
            auto row = preds[m].row(s);
            std::size_t best = 0;
            for (std::size_t c = 1; c < C; ++c)
                if (row[c] > row[best]) best = c;
            votes[best] += weights[m];
        }
        std::size_t best = 0;
        for (std::size_t c = 1; c < C; ++c)
            if (votes[c] > votes[best]) best = c;
        out.at(s, best) = 1.0;
    }
    return out;
}

BruteForceSubset subset_search_bruteforce(std::span<const Matrix> preds,
                                          std::span<const int> truth, bool vote_rule) {
    const std::size_t M = preds.size();
    const std::size_t S = preds.front().rows;
    const int C = static_cast<int>(preds.front().cols);
    BruteForceSubset best;

    std::vector<int> predicted(S);
    for (std::uint64_t mask = 1; mask < (1ULL << M); ++mask) {
        std::vector<std::size_t> members;
        for (std::size_t m = 0; m < M; ++m)
            if (mask & (1ULL << m)) members.push_back(m);

        for (std::size_t s = 0; s < S; ++s) {
            std::vector<double> acc(static_cast<std::size_t>(C), 0.0);
            for (std::size_t m : members) {
                auto row = preds[m].row(s);
                if (vote_rule) {
                    std::size_t c_best = 0;
                    for (std::size_t c = 1; c < row.size(); ++c)
                        if (row[c] > row[c_best]) c_best = c;
                    acc[c_best] += 1.0;
                } else {
                    for (std::size_t c = 0; c < row.size(); ++c) acc[c] += row[c];
                }
            }
            std::size_t c_best = 0;
            for (std::size_t c = 1; c < acc.size(); ++c)
                if (acc[c] > acc[c_best]) c_best = c;
            predicted[s] = static_cast<int>(c_best);
        }
        double w = wacc_bruteforce(truth, predicted, C);
        best.subsets_evaluated += 1;

        bool take = false;
        if (w > best.wacc)
            take = true;
        else if (w == best.wacc) {
            if (members.size() < best.members.size())
                take = true;
            else if (members.size() == best.members.size() && members < best.members)
                take = true;
        }
        if (take) {
            best.wacc = w;
            best.members = members;
        }
    }
    return best;
}

std::vector<std::pair<int, int>> grid_offsets_linspace(int height, int width, int crop,
                                                       int side) {
    auto linspace_round = [](double stop, int n) {
        std::vector<int> out;
        if (n == 1) {
            out.push_back(0);
            return out;
        }
        for (int i = 0; i < n; ++i) {
            double v = stop * i / (n - 1);
            out.push_back(static_cast<int>(std::lround(v)));
        }
        return out;
    };
    auto rows = linspace_round(height - crop, side);
    auto cols = linspace_round(width - crop, side);
    std::vector<std::pair<int, int>> offsets;
    for (int r : rows)
        for (int c : cols) offsets.emplace_back(r, c);
    return offsets;
}

double naive_weighted_ce(std::span<const double> logits, int label, double w) {
    double denom = 0.0;
    for (double z : logits) denom += std::exp(z);
    double p = std::exp(logits[static_cast<std::size_t>(label)]) / denom;
    return -w * std::log(p);
}

std::vector<double> finite_diff_gradient(const Matrix& weights, std::span<const double> bias,
                                         std::span<const double> x, int label, double w,
                                         double epsilon) {
    const std::size_t C = weights.rows, D = weights.cols;
    auto loss_at = [&](const std::vector<double>& params) {
        std::vector<double> logits(C, 0.0);
        for (std::size_t c = 0; c < C; ++c) {
            double z = params[C * D + c];
            for (std::size_t d = 0; d < D; ++d) z += params[c * D + d] * x[d];
            logits[c] = z;
        }
        return naive_weighted_ce(logits, label, w);
    };

    std::vector<double> params(weights.values);
    params.insert(params.end(), bias.begin(), bias.end());
    std::vector<double> grad(params.size(), 0.0);
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::vector<double> hi = params, lo = params;
        hi[i] += epsilon;
        lo[i] -= epsilon;
        grad[i] = (loss_at(hi) - loss_at(lo)) / (2.0 * epsilon);
    }
    return grad;
}

namespace {

// Projection onto {0 <= a <= C, y'a = 0} by bisection on the multiplier.
void project_feasible(std::vector<double>& alpha, std::span<const int> y, double c_reg) {
    const std::size_t S = alpha.size();
    auto balance = [&](double nu) {
        double sum = 0.0;
        for (std::size_t i = 0; i < S; ++i) {
            double v = std::clamp(alpha[i] - nu * y[i], 0.0, c_reg);
            sum += y[i] * v;
        }
        return sum;
    };
    double bound = c_reg + 1.0;
    for (double a : alpha) bound = std::max(bound, std::abs(a) + c_reg + 1.0);
    double lo = -bound, hi = bound;
    // balance() is non-increasing in nu
    for (int iter = 0; iter < 200; ++iter) {
        double mid = 0.5 * (lo + hi);
        if (balance(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    double nu = 0.5 * (lo + hi);
    for (std::size_t i = 0; i < S; ++i)
        alpha[i] = std::clamp(alpha[i] - nu * y[i], 0.0, c_reg);
}

}  // namespace

std::vector<double> projected_gradient_qp(const std::vector<double>& gram,
                                          std::span<const int> y, double c_reg,
                                          int max_iters) {
    const std::size_t S = y.size();
    // Lipschitz bound for the gradient: row-sum norm of Q.
    double lipschitz = 0.0;
    for (std::size_t i = 0; i < S; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < S; ++j) row += std::abs(gram[i * S + j]);
        lipschitz = std::max(lipschitz, row);
    }
    const double step = 1.0 / std::max(lipschitz, 1e-12);

    std::vector<double> alpha(S, 0.0);
    project_feasible(alpha, y, c_reg);
    double prev_obj = svm_dual_objective(gram, y, alpha);
    for (int iter = 0; iter < max_iters; ++iter) {
        std::vector<double> grad(S, 1.0);
        for (std::size_t i = 0; i < S; ++i) {
            double q = 0.0;
            for (std::size_t j = 0; j < S; ++j)
                q += gram[i * S + j] * y[i] * y[j] * alpha[j];
            grad[i] -= q;
        }
        for (std::size_t i = 0; i < S; ++i) alpha[i] += step * grad[i];
        project_feasible(alpha, y, c_reg);
        if ((iter + 1) % 200 == 0) {
            double obj = svm_dual_objective(gram, y, alpha);
            if (obj - prev_obj < 1e-13 * (1.0 + std::abs(obj))) break;
            prev_obj = obj;
        }
    }
    return alpha;
}

double svm_dual_objective(const std::vector<double>& gram, std::span<const int> y,
                          std::span<const double> alpha) {
    const std::size_t S = y.size();
    double linear = 0.0, quad = 0.0;
    for (std::size_t i = 0; i < S; ++i) {
        linear += alpha[i];
        for (std::size_t j = 0; j < S; ++j)
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram[i * S + j];
    }
    return linear - 0.5 * quad;
}

bool perceptron_separable(const Matrix& features, std::span<const int> y, int max_epochs) {
    std::vector<double> w(features.cols, 0.0);
    double b = 0.0;
    for (int epoch = 0; epoch < max_epochs; ++epoch) {
        bool all_ok = true;
        for (std::size_t i = 0; i < features.rows; ++i) {
            auto x = features.row(i);
            double z = b;
            for (std::size_t d = 0; d < x.size(); ++d) z += w[d] * x[d];
            if (y[i] * z <= 0.0) {
                all_ok = false;
                for (std::size_t d = 0; d < x.size(); ++d) w[d] += y[i] * x[d];
                b += y[i];
            }
        }
        if (all_ok) return true;
    }
    return false;
}

}  // namespace imbeval::ref
