#include "imbeval/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "imbeval/csv.hpp"
#include "imbeval/error.hpp"

namespace imbeval {

long long ConfusionMatrix::total() const {
    return std::accumulate(m.begin(), m.end(), 0LL);
}

long long ConfusionMatrix::row_sum(int t) const {
    long long sum = 0;
    for (int p = 0; p < classes; ++p) sum += at(t, p);
    return sum;
}

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                 int class_count) {
    if (truth.size() != predicted.size())
        raise(Errc::length_mismatch, std::to_string(truth.size()) + " truth labels vs " +
                                         std::to_string(predicted.size()) + " predictions");
    ConfusionMatrix m(class_count);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        int t = truth[i];
        int p = predicted[i];
        if (t < 0 || t >= class_count || p < 0 || p >= class_count)
            raise(Errc::label_out_of_range,
                  "labels (" + std::to_string(t) + ", " + std::to_string(p) +
                      ") outside [0, " + std::to_string(class_count) + ") at index " +
                      std::to_string(i));
        m.at(t, p) += 1;
    }
    return m;
}

double wacc(const ConfusionMatrix& m) {
    double sum = 0.0;
    for (int t = 0; t < m.classes; ++t) {
        long long row = m.row_sum(t);
        if (row == 0)
            raise(Errc::empty_class, "true class " + std::to_string(t) + " has no samples");
        sum += static_cast<double>(m.at(t, t)) / static_cast<double>(row);
    }
    return sum / static_cast<double>(m.classes);
}

double accuracy(const ConfusionMatrix& m) {
    long long total = m.total();
    if (total == 0) raise(Errc::empty_matrix, "confusion matrix is empty");
    long long diag = 0;
    for (int t = 0; t < m.classes; ++t) diag += m.at(t, t);
    return static_cast<double>(diag) / static_cast<double>(total);
}

std::vector<double> per_class_recall(const ConfusionMatrix& m) {
    std::vector<double> recalls(static_cast<std::size_t>(m.classes), 0.0);
    for (int t = 0; t < m.classes; ++t) {
        long long row = m.row_sum(t);
        if (row == 0)
            raise(Errc::empty_class, "true class " + std::to_string(t) + " has no samples");
        recalls[static_cast<std::size_t>(t)] =
            static_cast<double>(m.at(t, t)) / static_cast<double>(row);
    }
    return recalls;
}

namespace {

// Rank-sum AUC for one one-vs-rest problem. Tied scores get averaged ranks,
// so identical score columns come out at exactly 0.5.
double auc_rank(std::span<const int> truth, const Matrix& scores, int cls) {
    const std::size_t n = truth.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores.at(a, static_cast<std::size_t>(cls)) <
               scores.at(b, static_cast<std::size_t>(cls));
    });

    long long positives = 0;
    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        double v = scores.at(order[i], static_cast<std::size_t>(cls));
        while (j < n && scores.at(order[j], static_cast<std::size_t>(cls)) == v) ++j;
        // average 1-based rank over the tie block [i, j)
        double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t t = i; t < j; ++t) {
            if (truth[order[t]] == cls) {
                positives += 1;
                positive_rank_sum += avg_rank;
            }
        }
        i = j;
    }
    long long negatives = static_cast<long long>(n) - positives;
    if (positives == 0 || negatives == 0)
        raise(Errc::degenerate_class, "class " + std::to_string(cls) +
                                          " is all-present or all-absent; AUC undefined");
    double u = positive_rank_sum -
               static_cast<double>(positives) * (static_cast<double>(positives) + 1.0) / 2.0;
    return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

}  // namespace

double mean_auc_ovr(std::span<const int> truth, const Matrix& scores) {
    if (truth.size() != scores.rows)
        raise(Errc::length_mismatch, std::to_string(truth.size()) + " labels vs " +
                                         std::to_string(scores.rows) + " score rows");
    if (scores.rows == 0) raise(Errc::empty_matrix, "no scores given");
    const int C = static_cast<int>(scores.cols);
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (truth[i] < 0 || truth[i] >= C)
            raise(Errc::label_out_of_range, "label " + std::to_string(truth[i]));

    std::vector<double> aucs(static_cast<std::size_t>(C), 0.0);
    std::exception_ptr failure;
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        try {
            aucs[static_cast<std::size_t>(c)] = auc_rank(truth, scores, c);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    double sum = 0.0;
    for (int c = 0; c < C; ++c) sum += aucs[static_cast<std::size_t>(c)];
    return sum / static_cast<double>(C);
}

void save_report(double wacc_value, double accuracy_value, double mean_auc_value,
                 std::span<const double> recalls, const std::string& path) {
    std::string out = "metric,value\n";
    out += "wacc," + csv::fmt_g9(wacc_value) + "\n";
    out += "accuracy," + csv::fmt_g9(accuracy_value) + "\n";
    out += "mean_auc," + csv::fmt_g9(mean_auc_value) + "\n";
    for (std::size_t i = 0; i < recalls.size(); ++i)
        out += "recall_" + std::to_string(i) + "," + csv::fmt_g9(recalls[i]) + "\n";
    csv::atomic_write(path, out);
}

}  // namespace imbeval
