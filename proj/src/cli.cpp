#include "imbeval/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "imbeval/balance.hpp"
#include "imbeval/csv.hpp"
#include "imbeval/ensemble.hpp"
#include "imbeval/error.hpp"
#include "imbeval/ingest.hpp"
#include "imbeval/meta.hpp"
#include "imbeval/metrics.hpp"
#include "imbeval/cropper.hpp"
#include "imbeval/parallel.hpp"
#include "imbeval/splits.hpp"
#include "imbeval/trainer.hpp"

namespace imbeval::cli {

namespace {

// Picks the model to operate on when a tensor holds several.
std::size_t select_model(const PredictionTensor& tensor, const std::string& model_id) {
    if (!model_id.empty()) return tensor.model_index(model_id);
    if (tensor.n_models != 1)
        raise(Errc::invalid_argument,
              "predictions contain " + std::to_string(tensor.n_models) +
                  " models; pick one with --model");
    return 0;
}

Matrix flatten_model(const PredictionTensor& tensor, std::size_t m) {
    const std::size_t F = tensor.n_crops * tensor.n_classes;
    Matrix flattened(tensor.n_samples, F);
    for (std::size_t s = 0; s < tensor.n_samples; ++s)
        std::copy_n(&tensor.values[(m * tensor.n_samples + s) * F], F, flattened.row(s).data());
    return flattened;
}

std::vector<int> manifest_labels(const SampleManifest& manifest) {
    std::vector<int> labels;
    labels.reserve(manifest.size());
    for (const Sample& s : manifest.samples) labels.push_back(s.label);
    return labels;
}

void write_metric_report(const SampleManifest& manifest, const Matrix& probs,
                         const std::string& path) {
    std::vector<int> truth = manifest_labels(manifest);
    std::vector<int> predicted(probs.rows);
    for (std::size_t s = 0; s < probs.rows; ++s)
        predicted[s] = static_cast<int>(argmax(probs.row(s)));
    ConfusionMatrix cm = confusion_matrix(truth, predicted, manifest.class_count);
    save_report(wacc(cm), accuracy(cm), mean_auc_ovr(truth, probs), per_class_recall(cm), path);
}

DiagnosisWeights parse_diagnosis_weights(const std::vector<std::string>& entries) {
    DiagnosisWeights dw;
    for (const std::string& entry : entries) {
        auto eq = entry.find('=');
        if (eq == std::string::npos)
            raise(Errc::invalid_argument, "--dw expects name=factor, got '" + entry + "'");
        Diagnosis d = diagnosis_from_string(entry.substr(0, eq));
        dw.set(d, csv::parse_double(entry.substr(eq + 1), "diagnosis factor"));
    }
    return dw;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    apply_thread_env();

    CLI::App app{"Evaluation and ensembling toolkit for class-imbalanced classifiers"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from a key=value config file");
    app.get_config_formatter_base()->valueSeparator('=');

    // ---- split ----------------------------------------------------------
    struct {
        std::string manifest, out;
        int k = 5, classes = 0;
        std::uint64_t seed = 0;
    } split_opt;
    auto* cmd_split =
        app.add_subcommand("split", "Group-aware stratified k-fold assignment");
    cmd_split->add_option("--manifest", split_opt.manifest, "manifest.csv")->required();
    cmd_split->add_option("--k", split_opt.k, "number of folds");
    cmd_split->add_option("--seed", split_opt.seed, "RNG seed");
    cmd_split->add_option("--classes", split_opt.classes, "declared class count (0 = infer)");
    cmd_split->add_option("--out", split_opt.out, "output folds.csv")->required();
    cmd_split->callback([&] {
        SampleManifest manifest = load_manifest(split_opt.manifest, split_opt.classes);
        FoldAssignment folds = stratified_group_kfold(manifest, split_opt.k, split_opt.seed);
        save_folds(manifest, folds, split_opt.out);
    });

    // ---- weights --------------------------------------------------------
    struct {
        std::string counts, manifest, mode = "invfreq", out;
        int classes = 0;
    } weights_opt;
    auto* cmd_weights = app.add_subcommand("weights", "Per-class loss weights");
    cmd_weights->add_option("--counts", weights_opt.counts, "counts.csv");
    cmd_weights->add_option("--manifest", weights_opt.manifest,
                            "manifest.csv (weights from its primary samples)");
    cmd_weights->add_option("--mode", weights_opt.mode, "none|invfreq|invfreq-c");
    cmd_weights->add_option("--classes", weights_opt.classes, "declared class count (0 = infer)");
    cmd_weights->add_option("--out", weights_opt.out, "output weights.csv")->required();
    cmd_weights->callback([&] {
        WeightMode mode = weight_mode_from_string(weights_opt.mode);
        ClassWeights cw;
        if (!weights_opt.counts.empty() && weights_opt.manifest.empty())
            cw = class_weights(load_counts(weights_opt.counts), mode);
        else if (weights_opt.counts.empty() && !weights_opt.manifest.empty())
            cw = combined_dataset_weights(
                load_manifest(weights_opt.manifest, weights_opt.classes), mode);
        else
            raise(Errc::invalid_argument, "give exactly one of --counts or --manifest");
        save_weights(cw, weights_opt.out);
    });

    // ---- crops ----------------------------------------------------------
    struct {
        int size = 224, n = 36, height = 450, width = 600;
        std::string out;
    } crops_opt;
    auto* cmd_crops = app.add_subcommand("crops", "Deterministic evaluation crop grid");
    cmd_crops->add_option("--size", crops_opt.size, "crop side length");
    cmd_crops->add_option("--n", crops_opt.n, "number of crops (perfect square)");
    cmd_crops->add_option("--height", crops_opt.height, "image height");
    cmd_crops->add_option("--width", crops_opt.width, "image width");
    cmd_crops->add_option("--out", crops_opt.out, "output offsets.csv")->required();
    cmd_crops->callback([&] {
        save_offsets(crop_grid(crops_opt.height, crops_opt.width, crops_opt.size, crops_opt.n),
                     crops_opt.out);
    });

    // ---- train ----------------------------------------------------------
    struct {
        std::string manifest, features, folds, out_dir;
        std::string balance = "invfreq", secondary = "add-to-train", sampler;
        std::vector<std::string> dw;
        int fold = -1, classes = 0;
        TrainConfig cfg;
    } train_opt;
    auto* cmd_train = app.add_subcommand("train", "Weighted softmax classifier training");
    cmd_train->add_option("--manifest", train_opt.manifest, "manifest.csv")->required();
    cmd_train->add_option("--features", train_opt.features, "features.csv")->required();
    cmd_train->add_option("--folds", train_opt.folds, "folds.csv from split");
    cmd_train->add_option("--fold", train_opt.fold,
                          "validation fold index (-1 trains on everything)");
    cmd_train->add_option("--secondary", train_opt.secondary, "exclude|add-to-train");
    cmd_train->add_option("--balance", train_opt.balance, "none|invfreq|invfreq-c|batch");
    cmd_train->add_option("--classes", train_opt.classes, "declared class count (0 = infer)");
    cmd_train->add_option("--dw", train_opt.dw, "diagnosis loss factor, name=value (repeatable)");
    cmd_train->add_option("--lr0", train_opt.cfg.lr0, "starting learning rate");
    cmd_train->add_option("--decay", train_opt.cfg.decay, "learning rate decay factor");
    cmd_train->add_option("--first-drop", train_opt.cfg.first_drop, "epoch of first decay");
    cmd_train->add_option("--drop-every", train_opt.cfg.drop_every, "epochs between decays");
    cmd_train->add_option("--epochs", train_opt.cfg.max_epochs, "training epochs");
    cmd_train->add_option("--eval-every", train_opt.cfg.eval_every, "validation cadence");
    cmd_train->add_option("--batch-size", train_opt.cfg.batch_size, "batch size");
    cmd_train->add_option("--seed", train_opt.cfg.seed, "RNG seed");
    cmd_train->add_option("--out-dir", train_opt.out_dir,
                          "directory for model_best.csv, model_last.csv, history.csv")
        ->required();
    cmd_train->callback([&] {
        SampleManifest manifest = load_manifest(train_opt.manifest, train_opt.classes);
        Matrix features = load_features(train_opt.features, manifest);
        FoldAssignment folds;
        bool have_folds = !train_opt.folds.empty();
        if (have_folds) folds = load_folds(train_opt.folds, manifest);
        if (train_opt.fold >= 0 && !have_folds)
            raise(Errc::invalid_argument, "--fold requires --folds");

        ClassWeights cw;
        Sampler sampler = Sampler::shuffled;
        if (train_opt.balance == "batch") {
            cw = ClassWeights::ones(manifest.class_count);
            sampler = Sampler::balanced;
        } else {
            WeightMode mode = weight_mode_from_string(train_opt.balance);
            cw = mode == WeightMode::none ? ClassWeights::ones(manifest.class_count)
                                          : combined_dataset_weights(manifest, mode);
        }
        DiagnosisWeights dw = parse_diagnosis_weights(train_opt.dw);

        TrainResult result =
            train(features, manifest, have_folds ? &folds : nullptr, train_opt.fold,
                  secondary_policy_from_string(train_opt.secondary), cw, dw, train_opt.cfg,
                  sampler);

        namespace fs = std::filesystem;
        fs::create_directories(train_opt.out_dir);
        fs::path dir(train_opt.out_dir);
        save_model(result.best, (dir / "model_best.csv").string());
        save_model(result.last, (dir / "model_last.csv").string());
        save_history(result.history, (dir / "history.csv").string());
        if (result.best_epoch >= 0 && !std::isnan(result.best_wacc) && result.best_wacc >= 0)
            std::cout << "best_epoch," << result.best_epoch << "\nbest_wacc,"
                      << csv::fmt_g9(result.best_wacc) << "\n";
    });

    // ---- evaluate -------------------------------------------------------
    struct {
        std::string manifest, predictions, model, out;
        int classes = 0;
    } eval_opt;
    auto* cmd_eval =
        app.add_subcommand("evaluate", "Crop-averaged metrics for one model's predictions");
    cmd_eval->add_option("--manifest", eval_opt.manifest, "manifest.csv")->required();
    cmd_eval->add_option("--predictions", eval_opt.predictions, "predictions.csv")->required();
    cmd_eval->add_option("--model", eval_opt.model, "model_id to evaluate");
    cmd_eval->add_option("--classes", eval_opt.classes, "declared class count (0 = infer)");
    cmd_eval->add_option("--out", eval_opt.out, "output report.csv")->required();
    cmd_eval->callback([&] {
        SampleManifest manifest = load_manifest(eval_opt.manifest, eval_opt.classes);
        PredictionTensor tensor = load_predictions(eval_opt.predictions, manifest);
        std::size_t m = select_model(tensor, eval_opt.model);
        write_metric_report(manifest, aggregate_models(tensor)[m], eval_opt.out);
    });

    // ---- meta-train -----------------------------------------------------
    struct {
        std::string manifest, predictions, model, gamma = "auto", out;
        double c = 1.0, tol = 1e-3;
        int classes = 0, max_passes = 200, cv = 0;
        std::uint64_t seed = 0;
    } mt_opt;
    auto* cmd_mt = app.add_subcommand(
        "meta-train", "Fit the RBF-SVM stack on flattened crop predictions");
    cmd_mt->add_option("--manifest", mt_opt.manifest, "manifest.csv (labels)")->required();
    cmd_mt->add_option("--predictions", mt_opt.predictions, "validation predictions.csv")
        ->required();
    cmd_mt->add_option("--model", mt_opt.model, "model_id to train on");
    cmd_mt->add_option("--classes", mt_opt.classes, "declared class count (0 = infer)");
    cmd_mt->add_option("--c", mt_opt.c, "SVM regularization C");
    cmd_mt->add_option("--gamma", mt_opt.gamma, "RBF gamma, or 'auto'");
    cmd_mt->add_option("--tol", mt_opt.tol, "KKT tolerance");
    cmd_mt->add_option("--max-passes", mt_opt.max_passes, "SMO sweep limit");
    cmd_mt->add_option("--cv", mt_opt.cv, "also report k-fold CV WACC (0 = off)");
    cmd_mt->add_option("--seed", mt_opt.seed, "RNG seed");
    cmd_mt->add_option("--out", mt_opt.out, "output meta model file")->required();
    cmd_mt->callback([&] {
        SampleManifest manifest = load_manifest(mt_opt.manifest, mt_opt.classes);
        PredictionTensor tensor = load_predictions(mt_opt.predictions, manifest);
        std::size_t m = select_model(tensor, mt_opt.model);
        Matrix flattened = flatten_model(tensor, m);
        std::vector<int> labels = manifest_labels(manifest);
        double gamma = mt_opt.gamma == "auto" ? auto_gamma(flattened)
                                              : csv::parse_double(mt_opt.gamma, "gamma");
        SvmFitOptions options{mt_opt.tol, mt_opt.max_passes, mt_opt.seed};

        MetaModel model = meta_fit(flattened, labels, manifest.class_count, mt_opt.c, gamma,
                                   mt_opt.seed, options);
        save_meta_model(model, mt_opt.out);

        if (mt_opt.cv > 0) {
            int k_used = 0;
            double cv_wacc = meta_cv(flattened, labels, manifest.class_count, mt_opt.cv,
                                     mt_opt.c, gamma, mt_opt.seed, true, &k_used, options);
            if (k_used != mt_opt.cv)
                std::cerr << "warning: folds reduced to " << k_used
                          << " (smallest class)\n";
            std::cout << "cv_wacc," << csv::fmt_g9(cv_wacc) << "\ncv_folds," << k_used << "\n";
        }
        for (const SvmModel& svm : model.per_class)
            if (!svm.converged)
                raise(Errc::no_convergence,
                      "SMO pass limit reached; model written to '" + mt_opt.out + "'");
    });

    // ---- meta-predict ---------------------------------------------------
    struct {
        std::string manifest, predictions, model, meta, out;
        int classes = 0;
    } mp_opt;
    auto* cmd_mp =
        app.add_subcommand("meta-predict", "Predict with a trained meta model");
    cmd_mp->add_option("--manifest", mp_opt.manifest, "manifest.csv")->required();
    cmd_mp->add_option("--predictions", mp_opt.predictions, "predictions.csv")->required();
    cmd_mp->add_option("--model", mp_opt.model, "model_id to predict from");
    cmd_mp->add_option("--classes", mp_opt.classes, "declared class count (0 = infer)");
    cmd_mp->add_option("--meta", mp_opt.meta, "meta model file")->required();
    cmd_mp->add_option("--out", mp_opt.out, "output predictions (one-hot)")->required();
    cmd_mp->callback([&] {
        SampleManifest manifest = load_manifest(mp_opt.manifest, mp_opt.classes);
        PredictionTensor tensor = load_predictions(mp_opt.predictions, manifest);
        MetaModel meta = load_meta_model(mp_opt.meta);
        std::size_t m = select_model(tensor, mp_opt.model);
        Matrix flattened = flatten_model(tensor, m);
        std::vector<int> labels = meta_predict(meta, flattened);
        Matrix onehot(tensor.n_samples, tensor.n_classes);
        for (std::size_t s = 0; s < tensor.n_samples; ++s)
            onehot.at(s, static_cast<std::size_t>(labels[s])) = 1.0;
        save_final_predictions(onehot, manifest, mp_opt.out);
    });

    // ---- ensemble-search ------------------------------------------------
    struct {
        std::string manifest, predictions, rule = "average", out;
        int top_k = 15, classes = 0;
    } search_opt;
    auto* cmd_search =
        app.add_subcommand("ensemble-search", "Exhaustive subset search over ranked models");
    cmd_search->add_option("--manifest", search_opt.manifest, "manifest.csv")->required();
    cmd_search->add_option("--predictions", search_opt.predictions, "predictions.csv")
        ->required();
    cmd_search->add_option("--top-k", search_opt.top_k, "models admitted to the search");
    cmd_search->add_option("--rule", search_opt.rule, "average|vote");
    cmd_search->add_option("--classes", search_opt.classes, "declared class count (0 = infer)");
    cmd_search->add_option("--out", search_opt.out, "output ensemble.csv")->required();
    cmd_search->callback([&] {
        SampleManifest manifest = load_manifest(search_opt.manifest, search_opt.classes);
        PredictionTensor tensor = load_predictions(search_opt.predictions, manifest);
        std::vector<Matrix> per_model = aggregate_models(tensor);
        std::vector<int> truth = manifest_labels(manifest);
        SubsetSearchResult result =
            subset_search(per_model, truth, tensor.model_ids, search_opt.top_k,
                          combine_rule_from_string(search_opt.rule));
        save_ensemble(result.spec, search_opt.out);
        std::cout << "subsets_evaluated," << result.subsets_evaluated << "\n"
                  << "best_wacc," << csv::fmt_g9(result.wacc) << "\n";
        for (const auto& member : result.spec.members)
            std::cout << "member," << member.model_id << "\n";
    });

    // ---- final ----------------------------------------------------------
    struct {
        std::string manifest, full_preds, cv_preds, meta, out, report;
        double full_weight = 5.0;
        int classes = 0;
    } final_opt;
    auto* cmd_final = app.add_subcommand(
        "final", "Crop aggregation, meta prediction and weighted model averaging");
    cmd_final->add_option("--manifest", final_opt.manifest, "manifest.csv")->required();
    cmd_final->add_option("--full-preds", final_opt.full_preds,
                          "predictions.csv of fully trained models");
    cmd_final->add_option("--cv-preds", final_opt.cv_preds,
                          "predictions.csv of cross-validation models");
    cmd_final->add_option("--meta", final_opt.meta, "meta model for the CV pool");
    cmd_final->add_option("--full-weight", final_opt.full_weight,
                          "weight of fully trained models");
    cmd_final->add_option("--classes", final_opt.classes, "declared class count (0 = infer)");
    cmd_final->add_option("--out", final_opt.out, "output final_predictions.csv")->required();
    cmd_final->add_option("--report", final_opt.report, "also write metric report here");
    cmd_final->callback([&] {
        if (final_opt.full_preds.empty() && final_opt.cv_preds.empty())
            raise(Errc::empty_ensemble, "need at least one of --full-preds / --cv-preds");
        SampleManifest manifest = load_manifest(final_opt.manifest, final_opt.classes);
        PredictionTensor full, cv;
        if (!final_opt.full_preds.empty())
            full = load_predictions(final_opt.full_preds, manifest);
        if (!final_opt.cv_preds.empty()) cv = load_predictions(final_opt.cv_preds, manifest);
        MetaModel meta;
        bool have_meta = !final_opt.meta.empty();
        if (have_meta) meta = load_meta_model(final_opt.meta);

        Matrix combined =
            final_predict(full, cv, have_meta ? &meta : nullptr, final_opt.full_weight);
        save_final_predictions(combined, manifest, final_opt.out);
        if (!final_opt.report.empty())
            write_metric_report(manifest, combined, final_opt.report);
    });

    // ---- report ---------------------------------------------------------
    struct {
        std::string manifest, final_preds, out;
        int classes = 0;
    } report_opt;
    auto* cmd_report =
        app.add_subcommand("report", "Metrics from final predictions and the manifest");
    cmd_report->add_option("--manifest", report_opt.manifest, "manifest.csv")->required();
    cmd_report->add_option("--final", report_opt.final_preds, "final_predictions.csv")
        ->required();
    cmd_report->add_option("--classes", report_opt.classes, "declared class count (0 = infer)");
    cmd_report->add_option("--out", report_opt.out, "output report.csv")->required();
    cmd_report->callback([&] {
        SampleManifest manifest = load_manifest(report_opt.manifest, report_opt.classes);
        Matrix probs = load_final_predictions(report_opt.final_preds, manifest);
        write_metric_report(manifest, probs, report_opt.out);
    });

    std::vector<const char*> argv;
    argv.push_back("imbeval");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}

}  // namespace imbeval::cli
