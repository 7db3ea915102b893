#pragma once

#include <span>
#include <string>
#include <vector>

#include "imbeval/matrix.hpp"

namespace imbeval {

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    int classes = 0;
    std::vector<long long> m;

    explicit ConfusionMatrix(int c = 0)
        : classes(c), m(static_cast<std::size_t>(c) * static_cast<std::size_t>(c), 0) {}

    long long& at(int t, int p) { return m[static_cast<std::size_t>(t) * classes + p]; }
    long long at(int t, int p) const { return m[static_cast<std::size_t>(t) * classes + p]; }
    long long total() const;
    long long row_sum(int t) const;
};

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                 int class_count);

// Weighted accuracy: unweighted mean of per-class recall. Every true class
// must be populated.
double wacc(const ConfusionMatrix& m);

double accuracy(const ConfusionMatrix& m);

std::vector<double> per_class_recall(const ConfusionMatrix& m);

// One-vs-rest ROC AUC per class via the Mann-Whitney rank statistic with
// tie-averaging, mean over classes. Each class must appear and be absent at
// least once in truth.
double mean_auc_ovr(std::span<const int> truth, const Matrix& scores);

// report.csv: metric,value rows wacc, accuracy, mean_auc, recall_0..recall_{C-1}.
void save_report(double wacc_value, double accuracy_value, double mean_auc_value,
                 std::span<const double> recalls, const std::string& path);

}  // namespace imbeval
