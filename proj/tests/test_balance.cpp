#include <doctest.h>

#include <algorithm>
#include <map>

#include "imbeval/balance.hpp"
#include "test_util.hpp"

using namespace imbeval;
using testutil::throws_errc;

namespace {

ClassCounts counts_of(std::vector<long long> counts) {
    ClassCounts c;
    c.counts = std::move(counts);
    for (long long n : c.counts) c.total += n;
    return c;
}

}  // namespace

TEST_CASE("inverse frequency weights on the 7-class distribution") {
    ClassCounts counts = counts_of({1113, 6705, 514, 327, 1099, 115, 142});
    ClassWeights cw = class_weights(counts, WeightMode::inverse_freq);
    CHECK(cw.weights[1] == doctest::Approx(10015.0 / 6705.0).epsilon(1e-9));  // ~1.49366
    CHECK(cw.weights[5] == doctest::Approx(10015.0 / 115.0).epsilon(1e-9));   // ~87.08696
    CHECK(cw.weights[5] == doctest::Approx(87.08696).epsilon(1e-5));

    ClassWeights cwc = class_weights(counts, WeightMode::inverse_freq_over_c);
    CHECK(cwc.weights[5] == doctest::Approx(10015.0 / (7.0 * 115.0)).epsilon(1e-9));
    CHECK(cwc.weights[5] == doctest::Approx(12.44099).epsilon(1e-5));
}

TEST_CASE("uniform counts give unit weights under invfreq-c") {
    ClassWeights cw = class_weights(counts_of({10, 10, 10}), WeightMode::inverse_freq_over_c);
    for (double w : cw.weights) CHECK(w == doctest::Approx(1.0));
}

TEST_CASE("weight identities") {
    ClassCounts counts = counts_of({9, 3, 17, 1, 30});
    ClassWeights invfreq = class_weights(counts, WeightMode::inverse_freq);
    ClassWeights over_c = class_weights(counts, WeightMode::inverse_freq_over_c);
    for (std::size_t i = 0; i < counts.counts.size(); ++i) {
        // w_i * n_i = N exactly
        CHECK(invfreq.weights[i] * static_cast<double>(counts.counts[i]) ==
              doctest::Approx(static_cast<double>(counts.total)).epsilon(1e-12));
        CHECK(over_c.weights[i] ==
              doctest::Approx(invfreq.weights[i] / 5.0).epsilon(1e-12));
    }
    // most frequent class gets the smallest weight
    std::size_t argmax_n = 4, argmin_w = 0;
    for (std::size_t i = 1; i < invfreq.weights.size(); ++i)
        if (invfreq.weights[i] < invfreq.weights[argmin_w]) argmin_w = i;
    CHECK(argmin_w == argmax_n);

    ClassWeights none = class_weights(counts, WeightMode::none);
    for (double w : none.weights) CHECK(w == 1.0);
}

TEST_CASE("zero class count rejected for weighted modes") {
    CHECK(throws_errc(Errc::zero_class_count, [&] {
        class_weights(counts_of({5, 0, 3}), WeightMode::inverse_freq);
    }));
}

TEST_CASE("combined weights come from the primary dataset only") {
    // primary (8,2), secondary (100,0)
    std::vector<int> labels;
    std::vector<DatasetTag> tags;
    for (int i = 0; i < 8; ++i) { labels.push_back(0); tags.push_back(DatasetTag::primary); }
    for (int i = 0; i < 2; ++i) { labels.push_back(1); tags.push_back(DatasetTag::primary); }
    for (int i = 0; i < 100; ++i) { labels.push_back(0); tags.push_back(DatasetTag::secondary); }
    SampleManifest m = testutil::make_manifest(labels, 2, {}, tags);
    ClassWeights cw = combined_dataset_weights(m, WeightMode::inverse_freq);
    CHECK(cw.weights[0] == doctest::Approx(10.0 / 8.0));
    CHECK(cw.weights[1] == doctest::Approx(10.0 / 2.0));
}

TEST_CASE("combined weights fail on a primary zero class even if secondary covers it") {
    std::vector<int> labels{0, 0, 1};
    std::vector<DatasetTag> tags{DatasetTag::primary, DatasetTag::primary,
                                 DatasetTag::secondary};
    SampleManifest m = testutil::make_manifest(labels, 2, {}, tags);
    CHECK(throws_errc(Errc::zero_class_count,
                      [&] { combined_dataset_weights(m, WeightMode::inverse_freq); }));
}

TEST_CASE("sample_weight multiplies class and diagnosis factors") {
    ClassWeights ones = ClassWeights::ones(3);
    DiagnosisWeights dw;
    CHECK(sample_weight(1, Diagnosis::unknown, ones, dw) == doctest::Approx(1.0));

    ClassWeights cw = ones;
    cw.weights[2] = 3.0;
    dw.set(Diagnosis::histopathology, 2.0);
    CHECK(sample_weight(2, Diagnosis::histopathology, cw, dw) == doctest::Approx(6.0));

    ClassWeights ham =
        class_weights(counts_of({1113, 6705, 514, 327, 1099, 115, 142}),
                      WeightMode::inverse_freq);
    DiagnosisWeights unit;
    CHECK(sample_weight(5, Diagnosis::consensus, ham, unit) ==
          doctest::Approx(87.08696).epsilon(1e-5));
}

TEST_CASE("balanced batches fill 40 slots over 7 classes as 6/6/6/6/6/5/5") {
    std::vector<int> labels;
    for (int cls = 0; cls < 7; ++cls)
        for (int i = 0; i < 10 + cls; ++i) labels.push_back(cls);
    SampleManifest m = testutil::make_manifest(labels, 7);
    auto batches = balanced_batch_indices(m, 40, 14, 5);
    REQUIRE(batches.size() == 14);
    for (const auto& batch : batches) {
        REQUIRE(batch.size() == 40);
        std::vector<int> hist(7, 0);
        for (std::size_t idx : batch) hist[static_cast<std::size_t>(m.samples[idx].label)]++;
        std::vector<int> sorted = hist;
        std::sort(sorted.begin(), sorted.end());
        CHECK(sorted == std::vector<int>{5, 5, 6, 6, 6, 6, 6});
    }
}

TEST_CASE("a lone minority sample is oversampled into every batch") {
    std::vector<int> labels(100, 0);
    labels.push_back(1);  // sample index 100
    SampleManifest m = testutil::make_manifest(labels, 2);
    auto batches = balanced_batch_indices(m, 4, 10, 3);
    for (const auto& batch : batches) {
        int minority = 0;
        for (std::size_t idx : batch)
            if (idx == 100) minority += 1;
        CHECK(minority == 2);  // quota 4/2 per class, only one candidate
    }
}

TEST_CASE("batch size below the class count is rejected") {
    std::vector<int> labels{0, 1, 2, 3, 4, 5, 6};
    SampleManifest m = testutil::make_manifest(labels, 7);
    CHECK(throws_errc(Errc::batch_too_small, [&] { balanced_batch_indices(m, 3, 1, 0); }));
}

TEST_CASE("class frequencies stay within one quantum over a long stream") {
    std::vector<int> labels;
    for (int cls = 0; cls < 3; ++cls)
        for (int i = 0; i < (cls + 1) * 4; ++i) labels.push_back(cls);
    SampleManifest m = testutil::make_manifest(labels, 3);
    const std::size_t batch_size = 8, n_batches = 30;
    auto batches = balanced_batch_indices(m, batch_size, n_batches, 11);
    std::vector<long long> totals(3, 0);
    for (const auto& batch : batches)
        for (std::size_t idx : batch) totals[static_cast<std::size_t>(m.samples[idx].label)]++;
    const double uniform =
        static_cast<double>(batch_size * n_batches) / 3.0;
    for (long long total : totals)
        CHECK(std::abs(static_cast<double>(total) - uniform) <= 1.0 + 1e-9);
}

TEST_CASE("balanced batches are deterministic per seed") {
    std::vector<int> labels{0, 0, 0, 1, 1, 2};
    SampleManifest m = testutil::make_manifest(labels, 3);
    auto a = balanced_batch_indices(m, 6, 5, 17);
    auto b = balanced_batch_indices(m, 6, 5, 17);
    CHECK(a == b);
}

TEST_CASE("weights round-trip through weights.csv") {
    testutil::TempDir dir;
    ClassWeights cw = class_weights(counts_of({4, 12, 7}), WeightMode::inverse_freq);
    save_weights(cw, dir.file("w.csv"));
    ClassWeights loaded = load_weights(dir.file("w.csv"));
    REQUIRE(loaded.weights.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(loaded.weights[i] == doctest::Approx(cw.weights[i]).epsilon(1e-8));
}
