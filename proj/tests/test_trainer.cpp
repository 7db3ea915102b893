#include <doctest.h>

#include <cmath>

#include "imbeval/trainer.hpp"
#include "reference.hpp"
#include "test_util.hpp"

using namespace imbeval;
using testutil::throws_errc;

TEST_CASE("weighted cross-entropy on hand values") {
    std::vector<double> logits{0.0, 0.0};
    CHECK(weighted_ce_loss(logits, 0, 1.0) == doctest::Approx(0.693147).epsilon(1e-5));
    CHECK(weighted_ce_loss(logits, 0, 2.0) == doctest::Approx(1.386294).epsilon(1e-5));

    std::vector<double> extreme{1000.0, 0.0};
    double loss = weighted_ce_loss(extreme, 0, 1.0);
    CHECK(std::isfinite(loss));
    CHECK(loss == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("gradient vanishes at the optimum and for zero weight") {
    SoftmaxModel model(2, 3);
    model.bias[0] = 1000.0;  // softmax underflows to exactly one-hot
    std::vector<double> x{0.5, -0.25, 1.0};
    LossGradient grad = loss_gradient(model, x, 0, 1.0);
    for (double g : grad.dweights.values) CHECK(g == 0.0);
    for (double g : grad.dbias) CHECK(g == 0.0);

    SoftmaxModel rough(2, 3);
    rough.weights.at(0, 0) = 0.3;
    LossGradient none = loss_gradient(rough, x, 1, 0.0);
    for (double g : none.dweights.values) CHECK(g == 0.0);
    for (double g : none.dbias) CHECK(g == 0.0);
}

TEST_CASE("analytic gradient matches central finite differences") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        int C = rng.uniform_int(2, 5), D = rng.uniform_int(1, 6);
        SoftmaxModel model(C, D);
        for (double& v : model.weights.values) v = rng.uniform(-1.5, 1.5);
        for (double& v : model.bias) v = rng.uniform(-1.0, 1.0);
        std::vector<double> x(static_cast<std::size_t>(D));
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        int label = rng.uniform_int(0, C - 1);
        double w = rng.uniform(0.25, 4.0);

        LossGradient grad = loss_gradient(model, x, label, w);
        std::vector<double> flat(grad.dweights.values);
        flat.insert(flat.end(), grad.dbias.begin(), grad.dbias.end());
        std::vector<double> numeric =
            ref::finite_diff_gradient(model.weights, model.bias, x, label, w, 1e-5);
        REQUIRE(numeric.size() == flat.size());
        for (std::size_t i = 0; i < flat.size(); ++i) {
            double scale = std::max({std::abs(flat[i]), std::abs(numeric[i]), 1e-4});
            CHECK(std::abs(flat[i] - numeric[i]) / scale < 1e-5);
        }
    }
}

TEST_CASE("stepwise schedule values and bounds") {
    TrainConfig cfg;
    CHECK(lr_at(0, cfg) == doctest::Approx(0.0005));
    CHECK(lr_at(49, cfg) == doctest::Approx(0.0005));
    CHECK(lr_at(50, cfg) == doctest::Approx(0.0001));
    CHECK(lr_at(75, cfg) == doctest::Approx(0.00002));
    CHECK(lr_at(100, cfg) == doctest::Approx(0.000004));
    CHECK(throws_errc(Errc::epoch_out_of_range, [&] { lr_at(125, cfg); }));
    CHECK(throws_errc(Errc::epoch_out_of_range, [&] { lr_at(-1, cfg); }));

    double prev = lr_at(0, cfg);
    for (int e = 1; e < cfg.max_epochs; ++e) {
        double lr = lr_at(e, cfg);
        CHECK(lr <= prev);
        prev = lr;
    }
}

TEST_CASE("predict_proba rows are stochastic and argmax follows logits") {
    SoftmaxModel zero(4, 2);
    Matrix features(3, 2);
    features.at(0, 0) = 1.0;
    features.at(1, 1) = -2.0;
    Matrix probs = predict_proba(zero, features);
    for (std::size_t s = 0; s < probs.rows; ++s)
        for (std::size_t c = 0; c < probs.cols; ++c)
            CHECK(probs.at(s, c) == doctest::Approx(0.25));

    SoftmaxModel biased(3, 2);
    biased.bias[2] = 5.0;
    std::vector<int> labels = predict_labels(biased, features);
    for (int label : labels) CHECK(label == 2);

    Rng rng(2);
    SoftmaxModel random_model(5, 3);
    for (double& v : random_model.weights.values) v = rng.uniform(-2, 2);
    Matrix rnd(10, 3);
    for (double& v : rnd.values) v = rng.uniform(-3, 3);
    Matrix p = predict_proba(random_model, rnd);
    for (std::size_t s = 0; s < p.rows; ++s) {
        double sum = 0.0;
        for (std::size_t c = 0; c < p.cols; ++c) sum += p.at(s, c);
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
}

namespace {

struct Toy {
    Matrix features;
    SampleManifest manifest;
};

// Two well-separated Gaussian blobs, one group per sample.
Toy separable_toy(int per_class, std::uint64_t seed) {
    Rng rng(seed);
    Toy toy;
    std::vector<int> labels;
    toy.features = Matrix(static_cast<std::size_t>(2 * per_class), 2);
    for (int i = 0; i < 2 * per_class; ++i) {
        int cls = i < per_class ? 0 : 1;
        labels.push_back(cls);
        double cx = cls == 0 ? -2.0 : 2.0;
        toy.features.at(static_cast<std::size_t>(i), 0) = cx + rng.gaussian(0.0, 0.3);
        toy.features.at(static_cast<std::size_t>(i), 1) = rng.gaussian(0.0, 0.3);
    }
    toy.manifest = testutil::make_manifest(labels, 2);
    return toy;
}

}  // namespace

TEST_CASE("training reaches perfect WACC on separable data") {
    Toy toy = separable_toy(20, 31);

    // independent feasibility proof first
    std::vector<int> pm(toy.manifest.size());
    for (std::size_t i = 0; i < pm.size(); ++i)
        pm[i] = toy.manifest.samples[i].label == 0 ? 1 : -1;
    REQUIRE(ref::perceptron_separable(toy.features, pm));

    TrainConfig cfg;
    cfg.seed = 7;
    ClassWeights cw = ClassWeights::ones(2);
    DiagnosisWeights dw;
    TrainResult result = train(toy.features, toy.manifest, nullptr, -1,
                               SecondaryPolicy::add_to_train, cw, dw, cfg, Sampler::shuffled);

    std::vector<int> truth;
    for (const Sample& s : toy.manifest.samples) truth.push_back(s.label);
    std::vector<int> predicted = predict_labels(result.best, toy.features);
    CHECK(mean_recall_present(truth, predicted, 2) == doctest::Approx(1.0));
    // full-data training: best is the last checkpoint
    CHECK(result.best.weights.values == result.last.weights.values);
}

TEST_CASE("history has floor(max_epochs / eval_every) records") {
    Toy toy = separable_toy(10, 5);
    FoldAssignment folds = stratified_group_kfold(toy.manifest, 4, 1);
    TrainConfig cfg;
    cfg.max_epochs = 23;
    cfg.eval_every = 5;
    cfg.seed = 3;
    TrainResult result =
        train(toy.features, toy.manifest, &folds, 0, SecondaryPolicy::exclude,
              ClassWeights::ones(2), DiagnosisWeights{}, cfg, Sampler::shuffled);
    CHECK(result.history.size() == 4);  // 23 / 5
    for (const EvalRecord& r : result.history) CHECK_FALSE(std::isnan(r.val_wacc));
    CHECK(result.best_wacc >= result.history.back().val_wacc);
}

TEST_CASE("shuffled and balanced samplers behave equivalently on balanced data") {
    Toy toy = separable_toy(16, 12);
    FoldAssignment folds = stratified_group_kfold(toy.manifest, 4, 2);
    TrainConfig cfg;
    cfg.max_epochs = 40;
    cfg.eval_every = 5;
    cfg.batch_size = 8;
    cfg.seed = 9;
    for (Sampler sampler : {Sampler::shuffled, Sampler::balanced}) {
        TrainResult result =
            train(toy.features, toy.manifest, &folds, 0, SecondaryPolicy::exclude,
                  ClassWeights::ones(2), DiagnosisWeights{}, cfg, sampler);
        CHECK(result.history.size() == 8);
        CHECK(result.best_wacc == doctest::Approx(1.0));
    }
}

TEST_CASE("identical seeds give bit-identical histories") {
    Toy toy = separable_toy(12, 21);
    FoldAssignment folds = stratified_group_kfold(toy.manifest, 3, 4);
    TrainConfig cfg;
    cfg.max_epochs = 15;
    cfg.eval_every = 5;
    cfg.batch_size = 6;
    cfg.seed = 1234;
    auto run = [&](Sampler sampler) {
        return train(toy.features, toy.manifest, &folds, 1, SecondaryPolicy::exclude,
                     ClassWeights::ones(2), DiagnosisWeights{}, cfg, sampler);
    };
    for (Sampler sampler : {Sampler::shuffled, Sampler::balanced}) {
        TrainResult a = run(sampler), b = run(sampler);
        REQUIRE(a.history.size() == b.history.size());
        for (std::size_t i = 0; i < a.history.size(); ++i) {
            CHECK(a.history[i].train_loss == b.history[i].train_loss);
            CHECK(a.history[i].val_wacc == b.history[i].val_wacc);
        }
        CHECK(a.last.weights.values == b.last.weights.values);
        CHECK(a.last.bias == b.last.bias);
    }
}

TEST_CASE("feature row count must match the manifest") {
    Toy toy = separable_toy(4, 2);
    Matrix wrong(3, 2);
    CHECK(throws_errc(Errc::dimension_mismatch, [&] {
        train(wrong, toy.manifest, nullptr, -1, SecondaryPolicy::exclude,
              ClassWeights::ones(2), DiagnosisWeights{}, TrainConfig{}, Sampler::shuffled);
    }));
}

TEST_CASE("model files reload bit-exactly") {
    testutil::TempDir dir;
    Rng rng(44);
    SoftmaxModel model(3, 4);
    for (double& v : model.weights.values) v = rng.gaussian(0, 2);
    for (double& v : model.bias) v = rng.gaussian(0, 1);
    save_model(model, dir.file("m.csv"));
    SoftmaxModel loaded = load_model(dir.file("m.csv"));
    CHECK(loaded.weights.values == model.weights.values);
    CHECK(loaded.bias == model.bias);
}

TEST_CASE("history file format") {
    testutil::TempDir dir;
    std::vector<EvalRecord> history{{4, 0.0005, 1.25, 0.5},
                                    {9, 0.0005, 0.75, std::nan("")}};
    save_history(history, dir.file("h.csv"));
    CHECK(testutil::read_file(dir.file("h.csv")) ==
          "epoch,lr,train_loss,val_wacc\n4,0.0005,1.25,0.5\n9,0.0005,0.75,nan\n");
}
