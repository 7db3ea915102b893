#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "imbeval/metrics.hpp"
#include "imbeval/rng.hpp"
#include "reference.hpp"
#include "test_util.hpp"

using namespace imbeval;
using testutil::throws_errc;

TEST_CASE("confusion_matrix counts true/predicted pairs") {
    std::vector<int> truth{0, 0, 1}, pred{0, 1, 1};
    ConfusionMatrix m = confusion_matrix(truth, pred, 2);
    CHECK(m.at(0, 0) == 1);
    CHECK(m.at(0, 1) == 1);
    CHECK(m.at(1, 0) == 0);
    CHECK(m.at(1, 1) == 1);

    std::vector<int> anti_t{0, 1}, anti_p{1, 0};
    ConfusionMatrix anti = confusion_matrix(anti_t, anti_p, 2);
    CHECK(anti.at(0, 1) == 1);
    CHECK(anti.at(1, 0) == 1);
    CHECK(anti.at(0, 0) == 0);

    CHECK(throws_errc(Errc::length_mismatch,
                      [&] { confusion_matrix(truth, anti_p, 2); }));
    std::vector<int> bad{0, 5, 1};
    CHECK(throws_errc(Errc::label_out_of_range, [&] { confusion_matrix(bad, bad, 2); }));
}

TEST_CASE("wacc basics") {
    std::vector<int> perfect_t{0, 1, 2}, perfect_p{0, 1, 2};
    CHECK(wacc(confusion_matrix(perfect_t, perfect_p, 3)) == doctest::Approx(1.0));

    ConfusionMatrix m(2);
    m.at(0, 0) = 3; m.at(0, 1) = 1;
    m.at(1, 0) = 1; m.at(1, 1) = 1;
    CHECK(wacc(m) == doctest::Approx(0.625));
    CHECK(accuracy(m) == doctest::Approx(4.0 / 6.0));

    ConfusionMatrix empty_row(2);
    empty_row.at(0, 0) = 2;
    CHECK(throws_errc(Errc::empty_class, [&] { wacc(empty_row); }));
}

TEST_CASE("accuracy basics") {
    std::vector<int> t{0, 1, 1}, p{1, 0, 0};
    CHECK(accuracy(confusion_matrix(t, p, 2)) == doctest::Approx(0.0));
    CHECK(throws_errc(Errc::empty_matrix, [&] { accuracy(ConfusionMatrix(2)); }));
}

TEST_CASE("wacc is invariant to class permutation and row scaling") {
    Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        int C = rng.uniform_int(2, 5);
        ConfusionMatrix m(C);
        for (int t = 0; t < C; ++t) {
            m.at(t, rng.uniform_int(0, C - 1)) += 1;  // keep every row non-empty
            for (int p = 0; p < C; ++p) m.at(t, p) += rng.uniform_int(0, 6);
        }
        double base = wacc(m);

        // simultaneous row/column permutation
        std::vector<int> perm(static_cast<std::size_t>(C));
        for (int i = 0; i < C; ++i) perm[static_cast<std::size_t>(i)] = i;
        rng.shuffle(perm);
        ConfusionMatrix permuted(C);
        for (int t = 0; t < C; ++t)
            for (int p = 0; p < C; ++p)
                permuted.at(perm[static_cast<std::size_t>(t)],
                            perm[static_cast<std::size_t>(p)]) = m.at(t, p);
        CHECK(wacc(permuted) == doctest::Approx(base).epsilon(1e-12));

        // integer row scaling (class replication)
        ConfusionMatrix scaled(C);
        for (int t = 0; t < C; ++t) {
            long long factor = rng.uniform_int(1, 4);
            for (int p = 0; p < C; ++p) scaled.at(t, p) = m.at(t, p) * factor;
        }
        CHECK(wacc(scaled) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("accuracy equals wacc for uniform class totals") {
    ConfusionMatrix m(3);
    // each true class has exactly 10 samples
    m.at(0, 0) = 7; m.at(0, 1) = 2; m.at(0, 2) = 1;
    m.at(1, 1) = 9; m.at(1, 0) = 1;
    m.at(2, 2) = 5; m.at(2, 0) = 5;
    CHECK(accuracy(m) == doctest::Approx(wacc(m)).epsilon(1e-12));
}

TEST_CASE("mean_auc_ovr on hand-checked cases") {
    // perfectly separating scores
    std::vector<int> truth{0, 0, 1, 1};
    Matrix scores(4, 2);
    scores.at(0, 0) = 0.9; scores.at(0, 1) = 0.1;
    scores.at(1, 0) = 0.8; scores.at(1, 1) = 0.2;
    scores.at(2, 0) = 0.2; scores.at(2, 1) = 0.8;
    scores.at(3, 0) = 0.1; scores.at(3, 1) = 0.9;
    CHECK(mean_auc_ovr(truth, scores) == doctest::Approx(1.0));

    // identical scores everywhere -> 0.5 by tie-averaging
    Matrix flat(4, 2, 0.5);
    CHECK(mean_auc_ovr(truth, flat) == doctest::Approx(0.5));
}

TEST_CASE("auc for one concordant and one discordant pair is one half") {
    std::vector<int> truth{0, 0, 1};
    Matrix scores(3, 2);
    scores.at(0, 1) = 0.2; scores.at(0, 0) = 0.8;
    scores.at(1, 1) = 0.8; scores.at(1, 0) = 0.2;
    scores.at(2, 1) = 0.6; scores.at(2, 0) = 0.4;
    CHECK(ref::auc_pairwise(truth, scores, 1) == doctest::Approx(0.5));

    // class 0: positives {0.8, 0.2}, negative {0.4} -> also 0.5; mean 0.5
    CHECK(mean_auc_ovr(truth, scores) == doctest::Approx(0.5));
}

TEST_CASE("degenerate one-vs-rest problems are rejected") {
    std::vector<int> truth{0, 0, 0};
    Matrix scores(3, 2, 0.5);
    CHECK(throws_errc(Errc::degenerate_class, [&] { mean_auc_ovr(truth, scores); }));
}

TEST_CASE("rank AUC matches pairwise brute force on random data") {
    Rng rng(21);
    for (int trial = 0; trial < 60; ++trial) {
        int C = rng.uniform_int(2, 7);
        int S = rng.uniform_int(C + 1, 40);
        std::vector<int> truth(static_cast<std::size_t>(S));
        for (int c = 0; c < C; ++c) truth[static_cast<std::size_t>(c)] = c;
        for (int s = C; s < S; ++s)
            truth[static_cast<std::size_t>(s)] = rng.uniform_int(0, C - 1);
        Matrix scores(static_cast<std::size_t>(S), static_cast<std::size_t>(C));
        for (double& v : scores.values)
            v = rng.bernoulli(0.3) ? 0.25 : rng.uniform01();  // plant ties
        CHECK(mean_auc_ovr(truth, scores) ==
              doctest::Approx(ref::mean_auc_pairwise(truth, scores)).epsilon(1e-12));
    }
}

TEST_CASE("auc is invariant under strictly monotone score transforms") {
    Rng rng(31);
    std::vector<int> truth{0, 1, 0, 1, 0, 1, 1, 0};
    Matrix scores(8, 2);
    for (double& v : scores.values) v = rng.uniform01();
    double base = mean_auc_ovr(truth, scores);
    Matrix warped = scores;
    for (double& v : warped.values) v = std::exp(3.0 * v) + 1.0;
    CHECK(mean_auc_ovr(truth, warped) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("report file carries wacc, accuracy, mean_auc and recalls") {
    testutil::TempDir dir;
    std::vector<double> recalls{0.5, 1.0};
    save_report(0.75, 0.8, 0.9, recalls, dir.file("r.csv"));
    std::string content = testutil::read_file(dir.file("r.csv"));
    CHECK(content == "metric,value\nwacc,0.75\naccuracy,0.8\nmean_auc,0.9\n"
                     "recall_0,0.5\nrecall_1,1\n");
}
