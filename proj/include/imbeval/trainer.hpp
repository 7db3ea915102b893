#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "imbeval/balance.hpp"
#include "imbeval/ingest.hpp"
#include "imbeval/matrix.hpp"
#include "imbeval/splits.hpp"

namespace imbeval {

// Linear softmax classifier: logits = W x + b.
struct SoftmaxModel {
    int classes = 0;
    int dim = 0;
    Matrix weights;  // C x D
    std::vector<double> bias;

    SoftmaxModel() = default;
    SoftmaxModel(int c, int d)
        : classes(c), dim(d), weights(static_cast<std::size_t>(c), static_cast<std::size_t>(d)),
          bias(static_cast<std::size_t>(c), 0.0) {}
};

struct TrainConfig {
    double lr0 = 0.0005;
    double decay = 0.2;
    int first_drop = 50;
    int drop_every = 25;
    int max_epochs = 125;
    int eval_every = 5;
    std::size_t batch_size = 40;
    std::uint64_t seed = 0;
};

enum class Sampler { shuffled, balanced };
Sampler sampler_from_string(const std::string& s);

// w * (-log softmax(logits)[label]), in the log-sum-exp stable form.
double weighted_ce_loss(std::span<const double> logits, int label, double w);

struct LossGradient {
    Matrix dweights;
    std::vector<double> dbias;
};

LossGradient loss_gradient(const SoftmaxModel& model, std::span<const double> x, int label,
                           double w);

// Stepwise schedule: lr0 until first_drop, then multiplied by decay every
// drop_every epochs.
double lr_at(int epoch, const TrainConfig& cfg);

struct EvalRecord {
    int epoch;
    double lr;
    double train_loss;
    double val_wacc;  // NaN when training without a validation fold
};

struct TrainResult {
    SoftmaxModel best;
    SoftmaxModel last;
    std::vector<EvalRecord> history;
    int best_epoch = -1;
    double best_wacc = 0.0;
};

// Adam (beta1=0.9, beta2=0.999, eps=1e-8) on the weighted cross-entropy,
// with the stepwise schedule, validation WACC evaluated every eval_every
// epochs and the best checkpoint kept (earliest epoch on ties). fold < 0 or
// a null assignment trains on everything and makes best == last.
TrainResult train(const Matrix& features, const SampleManifest& manifest,
                  const FoldAssignment* folds, int fold, SecondaryPolicy policy,
                  const ClassWeights& cw, const DiagnosisWeights& dw, const TrainConfig& cfg,
                  Sampler sampler);

Matrix predict_proba(const SoftmaxModel& model, const Matrix& features);
std::vector<int> predict_labels(const SoftmaxModel& model, const Matrix& features);

// Mean recall over the classes that actually appear in truth; the trainer's
// internal validation score, tolerant of folds missing a rare class.
double mean_recall_present(std::span<const int> truth, std::span<const int> predicted,
                           int class_count);

// Model file: first line classes,dim; then C rows of D weights; then one row
// of C biases. 17 significant digits so reloads are bit-exact.
void save_model(const SoftmaxModel& model, const std::string& path);
SoftmaxModel load_model(const std::string& path);

// history.csv: epoch,lr,train_loss,val_wacc.
void save_history(std::span<const EvalRecord> history, const std::string& path);

// features.csv: sample_id,f_0,...,f_{D-1}; rows reordered to manifest order.
Matrix load_features(const std::string& path, const SampleManifest& manifest);
void save_features(const Matrix& features, const SampleManifest& manifest,
                   const std::string& path);

}  // namespace imbeval
