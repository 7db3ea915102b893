#include "imbeval/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "imbeval/csv.hpp"
#include "imbeval/error.hpp"
#include "imbeval/metrics.hpp"
#include "imbeval/rng.hpp"

namespace imbeval {

Sampler sampler_from_string(const std::string& s) {
    if (s == "shuffled") return Sampler::shuffled;
    if (s == "balanced") return Sampler::balanced;
    raise(Errc::invalid_argument, "unknown sampler '" + s + "'");
}

namespace {

double log_sum_exp(std::span<const double> logits) {
    double m = logits[0];
    for (double v : logits) m = std::max(m, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - m);
    return m + std::log(sum);
}

void softmax_into(std::span<const double> logits, std::span<double> out) {
    double m = logits[0];
    for (double v : logits) m = std::max(m, v);
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        out[c] = std::exp(logits[c] - m);
        sum += out[c];
    }
    for (std::size_t c = 0; c < logits.size(); ++c) out[c] /= sum;
}

void logits_for(const SoftmaxModel& model, std::span<const double> x, std::span<double> out) {
    for (int c = 0; c < model.classes; ++c) {
        double z = model.bias[static_cast<std::size_t>(c)];
        const double* w = model.weights.values.data() +
                          static_cast<std::size_t>(c) * static_cast<std::size_t>(model.dim);
        for (int d = 0; d < model.dim; ++d) z += w[d] * x[static_cast<std::size_t>(d)];
        out[static_cast<std::size_t>(c)] = z;
    }
}

}  // namespace

double weighted_ce_loss(std::span<const double> logits, int label, double w) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
        raise(Errc::label_out_of_range, "label " + std::to_string(label));
    return w * (log_sum_exp(logits) - logits[static_cast<std::size_t>(label)]);
}

LossGradient loss_gradient(const SoftmaxModel& model, std::span<const double> x, int label,
                           double w) {
    if (static_cast<int>(x.size()) != model.dim)
        raise(Errc::dimension_mismatch, "feature size " + std::to_string(x.size()) +
                                            " vs model dim " + std::to_string(model.dim));
    std::vector<double> logits(static_cast<std::size_t>(model.classes));
    logits_for(model, x, logits);
    std::vector<double> probs(logits.size());
    softmax_into(logits, probs);

    LossGradient grad;
    grad.dweights = Matrix(static_cast<std::size_t>(model.classes),
                           static_cast<std::size_t>(model.dim));
    grad.dbias.assign(static_cast<std::size_t>(model.classes), 0.0);
    for (int c = 0; c < model.classes; ++c) {
        double dz = w * (probs[static_cast<std::size_t>(c)] - (c == label ? 1.0 : 0.0));
        grad.dbias[static_cast<std::size_t>(c)] = dz;
        for (int d = 0; d < model.dim; ++d)
            grad.dweights.at(static_cast<std::size_t>(c), static_cast<std::size_t>(d)) =
                dz * x[static_cast<std::size_t>(d)];
    }
    return grad;
}

double lr_at(int epoch, const TrainConfig& cfg) {
    if (epoch < 0 || epoch >= cfg.max_epochs)
        raise(Errc::epoch_out_of_range, "epoch " + std::to_string(epoch) + " outside [0, " +
                                            std::to_string(cfg.max_epochs) + ")");
    int drops = 0;
    if (epoch >= cfg.first_drop) drops = 1 + (epoch - cfg.first_drop) / cfg.drop_every;
    return cfg.lr0 * std::pow(cfg.decay, drops);
}

Matrix predict_proba(const SoftmaxModel& model, const Matrix& features) {
    if (static_cast<int>(features.cols) != model.dim)
        raise(Errc::dimension_mismatch, "feature dim " + std::to_string(features.cols) +
                                            " vs model dim " + std::to_string(model.dim));
    Matrix out(features.rows, static_cast<std::size_t>(model.classes));
    std::vector<double> logits(static_cast<std::size_t>(model.classes));
    for (std::size_t s = 0; s < features.rows; ++s) {
        logits_for(model, features.row(s), logits);
        softmax_into(logits, out.row(s));
    }
    return out;
}

std::vector<int> predict_labels(const SoftmaxModel& model, const Matrix& features) {
    Matrix probs = predict_proba(model, features);
    std::vector<int> labels(probs.rows);
    for (std::size_t s = 0; s < probs.rows; ++s)
        labels[s] = static_cast<int>(argmax(probs.row(s)));
    return labels;
}

double mean_recall_present(std::span<const int> truth, std::span<const int> predicted,
                           int class_count) {
    ConfusionMatrix m = confusion_matrix(truth, predicted, class_count);
    double sum = 0.0;
    int present = 0;
    for (int t = 0; t < class_count; ++t) {
        long long row = m.row_sum(t);
        if (row == 0) continue;
        sum += static_cast<double>(m.at(t, t)) / static_cast<double>(row);
        present += 1;
    }
    if (present == 0) raise(Errc::empty_matrix, "no validation samples");
    return sum / static_cast<double>(present);
}

namespace {

struct AdamState {
    std::vector<double> m, v;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long long t = 0;

    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

}  // namespace

TrainResult train(const Matrix& features, const SampleManifest& manifest,
                  const FoldAssignment* folds, int fold, SecondaryPolicy policy,
                  const ClassWeights& cw, const DiagnosisWeights& dw, const TrainConfig& cfg,
                  Sampler sampler) {
    if (features.rows != manifest.size())
        raise(Errc::dimension_mismatch,
              std::to_string(features.rows) + " feature rows vs " +
                  std::to_string(manifest.size()) + " manifest samples");
    if (cfg.decay <= 0.0 || cfg.decay >= 1.0)
        raise(Errc::invalid_argument, "decay must lie in (0, 1)");
    if (cfg.eval_every <= 0 || cfg.max_epochs <= 0 || cfg.batch_size == 0)
        raise(Errc::invalid_argument, "epochs, eval cadence and batch size must be positive");
    if (cw.weights.size() != static_cast<std::size_t>(manifest.class_count))
        raise(Errc::dimension_mismatch, "class weights do not match manifest class count");

    const int C = manifest.class_count;
    const int D = static_cast<int>(features.cols);

    // Resolve train/validation index sets.
    std::vector<std::size_t> train_idx, val_idx;
    const bool has_val = folds != nullptr && fold >= 0;
    if (has_val) {
        FoldSplit split = fold_split(manifest, *folds, fold, policy);
        for (const auto& id : split.train_ids) train_idx.push_back(manifest.index_of(id));
        for (const auto& id : split.validation_ids) val_idx.push_back(manifest.index_of(id));
    } else {
        for (std::size_t i = 0; i < manifest.size(); ++i) {
            if (manifest.samples[i].dataset == DatasetTag::secondary &&
                policy == SecondaryPolicy::exclude)
                continue;
            train_idx.push_back(i);
        }
    }
    if (train_idx.empty()) raise(Errc::empty_selection, "training set is empty");

    Matrix val_features(val_idx.size(), static_cast<std::size_t>(D));
    std::vector<int> val_truth(val_idx.size());
    for (std::size_t i = 0; i < val_idx.size(); ++i) {
        std::copy_n(features.row(val_idx[i]).data(), D, val_features.row(i).data());
        val_truth[i] = manifest.samples[val_idx[i]].label;
    }

    SoftmaxModel model(C, D);
    const std::size_t n_params = model.weights.values.size() + model.bias.size();
    AdamState adam(n_params);
    std::vector<double> grad_buffer(n_params, 0.0);

    Rng shuffle_rng = Rng(cfg.seed).substream(1);
    std::uint64_t balanced_seed = Rng::mix(cfg.seed ^ 0x62616c616e636564ULL);
    const std::size_t batches_per_epoch =
        (train_idx.size() + cfg.batch_size - 1) / cfg.batch_size;

    std::vector<int> train_labels;
    train_labels.reserve(train_idx.size());
    for (std::size_t i : train_idx) train_labels.push_back(manifest.samples[i].label);

    TrainResult result;
    result.best_wacc = -1.0;
    std::vector<std::size_t> perm(train_idx.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        double lr = lr_at(epoch, cfg);

        // Batches index into train_idx. Shuffled mode walks a fresh
        // permutation; balanced mode draws near-uniform class quotas.
        std::vector<std::vector<std::size_t>> batches;
        if (sampler == Sampler::shuffled) {
            shuffle_rng.shuffle(perm);
            for (std::size_t start = 0; start < perm.size(); start += cfg.batch_size) {
                std::size_t stop = std::min(perm.size(), start + cfg.batch_size);
                batches.emplace_back(perm.begin() + static_cast<long>(start),
                                     perm.begin() + static_cast<long>(stop));
            }
        } else {
            batches = balanced_batches(train_labels, C, cfg.batch_size, batches_per_epoch,
                                       Rng::mix(balanced_seed + static_cast<std::uint64_t>(epoch)));
        }

        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        std::vector<double> logits(static_cast<std::size_t>(C));
        std::vector<double> probs(static_cast<std::size_t>(C));
        for (const auto& batch : batches) {
            std::fill(grad_buffer.begin(), grad_buffer.end(), 0.0);
            for (std::size_t pos : batch) {
                const std::size_t row = train_idx[pos];
                const Sample& s = manifest.samples[row];
                const double w = sample_weight(s.label, s.diagnosis, cw, dw);
                auto x = features.row(row);
                logits_for(model, x, logits);
                softmax_into(logits, probs);
                loss_sum += weighted_ce_loss(logits, s.label, w);
                loss_count += 1;
                for (int c = 0; c < C; ++c) {
                    double dz =
                        w * (probs[static_cast<std::size_t>(c)] - (c == s.label ? 1.0 : 0.0));
                    double* gw = grad_buffer.data() +
                                 static_cast<std::size_t>(c) * static_cast<std::size_t>(D);
                    for (int d = 0; d < D; ++d) gw[d] += dz * x[static_cast<std::size_t>(d)];
                    grad_buffer[model.weights.values.size() + static_cast<std::size_t>(c)] += dz;
                }
            }
            const double inv = 1.0 / static_cast<double>(batch.size());
            for (double& g : grad_buffer) g *= inv;
            // Parameters form one flat vector: weights then bias.
            adam.t += 1;
            double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.t));
            double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.t));
            for (std::size_t i = 0; i < n_params; ++i) {
                double g = grad_buffer[i];
                adam.m[i] = adam.beta1 * adam.m[i] + (1.0 - adam.beta1) * g;
                adam.v[i] = adam.beta2 * adam.v[i] + (1.0 - adam.beta2) * g * g;
                double mhat = adam.m[i] / bc1;
                double vhat = adam.v[i] / bc2;
                double step = lr * mhat / (std::sqrt(vhat) + adam.eps);
                if (i < model.weights.values.size())
                    model.weights.values[i] -= step;
                else
                    model.bias[i - model.weights.values.size()] -= step;
            }
        }

        if ((epoch + 1) % cfg.eval_every == 0) {
            EvalRecord record;
            record.epoch = epoch;
            record.lr = lr;
            record.train_loss = loss_sum / static_cast<double>(loss_count);
            if (has_val && !val_idx.empty()) {
                std::vector<int> val_pred = predict_labels(model, val_features);
                record.val_wacc = mean_recall_present(val_truth, val_pred, C);
                if (record.val_wacc > result.best_wacc) {
                    result.best_wacc = record.val_wacc;
                    result.best_epoch = epoch;
                    result.best = model;
                }
            } else {
                record.val_wacc = std::numeric_limits<double>::quiet_NaN();
            }
            result.history.push_back(record);
        }
    }

    result.last = model;
    if (result.best_epoch < 0) {
        result.best = result.last;
        result.best_epoch = cfg.max_epochs - 1;
    }
    return result;
}

void save_model(const SoftmaxModel& model, const std::string& path) {
    std::string out = std::to_string(model.classes) + "," + std::to_string(model.dim) + "\n";
    for (int c = 0; c < model.classes; ++c) {
        for (int d = 0; d < model.dim; ++d) {
            if (d) out += ',';
            out += csv::fmt_g17(
                model.weights.at(static_cast<std::size_t>(c), static_cast<std::size_t>(d)));
        }
        out += '\n';
    }
    for (int c = 0; c < model.classes; ++c) {
        if (c) out += ',';
        out += csv::fmt_g17(model.bias[static_cast<std::size_t>(c)]);
    }
    out += '\n';
    csv::atomic_write(path, out);
}

SoftmaxModel load_model(const std::string& path) {
    auto rows = csv::read_file(path);
    if (rows.size() < 2 || rows.front().size() != 2)
        raise(Errc::invalid_field, "model file must start with classes,dim");
    int C = static_cast<int>(csv::parse_int(rows[0][0], "classes"));
    int D = static_cast<int>(csv::parse_int(rows[0][1], "dim"));
    if (C <= 0 || D <= 0 || rows.size() != static_cast<std::size_t>(C) + 2)
        raise(Errc::invalid_field, "model file shape inconsistent with header");
    SoftmaxModel model(C, D);
    for (int c = 0; c < C; ++c) {
        const csv::Row& row = rows[static_cast<std::size_t>(c) + 1];
        if (row.size() != static_cast<std::size_t>(D))
            raise(Errc::invalid_field, "weight row has wrong width");
        for (int d = 0; d < D; ++d)
            model.weights.at(static_cast<std::size_t>(c), static_cast<std::size_t>(d)) =
                csv::parse_double(row[static_cast<std::size_t>(d)], "weight");
    }
    const csv::Row& bias_row = rows.back();
    if (bias_row.size() != static_cast<std::size_t>(C))
        raise(Errc::invalid_field, "bias row has wrong width");
    for (int c = 0; c < C; ++c)
        model.bias[static_cast<std::size_t>(c)] =
            csv::parse_double(bias_row[static_cast<std::size_t>(c)], "bias");
    return model;
}

void save_history(std::span<const EvalRecord> history, const std::string& path) {
    std::string out = "epoch,lr,train_loss,val_wacc\n";
    for (const EvalRecord& r : history) {
        out += std::to_string(r.epoch) + "," + csv::fmt_g9(r.lr) + "," +
               csv::fmt_g9(r.train_loss) + ",";
        out += std::isnan(r.val_wacc) ? "nan" : csv::fmt_g9(r.val_wacc);
        out += '\n';
    }
    csv::atomic_write(path, out);
}

Matrix load_features(const std::string& path, const SampleManifest& manifest) {
    auto rows = csv::read_file(path);
    if (rows.empty() || rows.front().empty() || rows.front()[0] != "sample_id")
        raise(Errc::missing_column, "features file must start with sample_id column");
    const std::size_t D = rows.front().size() - 1;
    if (D == 0) raise(Errc::missing_column, "features file has no feature columns");
    Matrix features(manifest.size(), D);
    std::vector<char> seen(manifest.size(), 0);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const csv::Row& row = rows[r];
        if (row.size() != D + 1)
            raise(Errc::invalid_field, "features row " + std::to_string(r + 1) + " malformed");
        std::size_t idx = manifest.index_of(row[0]);
        if (idx == SampleManifest::npos)
            raise(Errc::unknown_sample_id, "sample_id '" + row[0] + "' not in manifest");
        if (seen[idx]) raise(Errc::duplicate_row, "sample_id '" + row[0] + "' listed twice");
        seen[idx] = 1;
        for (std::size_t d = 0; d < D; ++d)
            features.at(idx, d) = csv::parse_double(row[d + 1], "feature");
    }
    for (std::size_t i = 0; i < manifest.size(); ++i)
        if (!seen[i])
            raise(Errc::invalid_field,
                  "sample_id '" + manifest.samples[i].sample_id + "' missing from features");
    return features;
}

void save_features(const Matrix& features, const SampleManifest& manifest,
                   const std::string& path) {
    if (features.rows != manifest.size())
        raise(Errc::dimension_mismatch, "feature rows do not match manifest");
    std::string out = "sample_id";
    for (std::size_t d = 0; d < features.cols; ++d) out += ",f_" + std::to_string(d);
    out += '\n';
    for (std::size_t s = 0; s < features.rows; ++s) {
        out += manifest.samples[s].sample_id;
        for (std::size_t d = 0; d < features.cols; ++d)
            out += "," + csv::fmt_g17(features.at(s, d));
        out += '\n';
    }
    csv::atomic_write(path, out);
}

}  // namespace imbeval
