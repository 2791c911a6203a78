#include "tempattn/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <mutex>

#include "tempattn/checkpoint.hpp"
#include "tempattn/csvio.hpp"
#include "tempattn/parallel.hpp"
#include "tempattn/train.hpp"

namespace tempattn::pipeline {

namespace fs = std::filesystem;

namespace {

std::string traj_filename(const std::string& traj_id) { return traj_id + ".trj"; }

model::ModelConfig model_config(const config::RunConfig& cfg) {
    model::ModelConfig m;
    m.encoder = cfg.encoder;
    m.temporal = cfg.temporal;
    return m;
}

}  // namespace

void cmd_generate(const config::RunConfig& cfg) {
    const trajgen::SyntheticSpec& spec = cfg.data;
    spec.validate();
    fs::create_directories(cfg.dataset_dir());

    const int n = spec.n_sequences;
    const int n_apo = static_cast<int>(
        std::lround(spec.class_fraction_apoptosis * static_cast<double>(n)));
    std::vector<std::pair<std::string, Label>> labels(n);

    if (n > 0) {
        parallel_for(n, cfg.threads, [&](int i) {
            Label label = i < n_apo ? Label::Apoptosis : Label::Mitosis;
            Trajectory traj = trajgen::generate_trajectory(spec, label, i);
            traj.validate();
            trajgen::save_trajectory(traj,
                                     cfg.dataset_dir() + "/" + traj_filename(traj.traj_id));
            labels[i] = {traj.traj_id, label};
        });
    }

    std::vector<trajgen::ManifestEntry> entries(n);
    if (n > 0) {
        trajgen::DatasetSplit split =
            trajgen::split_dataset(labels, cfg.split_ratios, cfg.split_seed);
        std::map<std::string, std::string> split_of;
        for (const auto& id : split.train) split_of[id] = "train";
        for (const auto& id : split.val) split_of[id] = "val";
        for (const auto& id : split.test) split_of[id] = "test";
        for (int i = 0; i < n; ++i) {
            entries[i].traj_id = labels[i].first;
            entries[i].path = traj_filename(labels[i].first);
            entries[i].label = labels[i].second;
            entries[i].split = split_of.at(labels[i].first);
        }
    }
    trajgen::write_manifest(cfg.manifest_path(), entries, cfg.hash(), cfg.master_seed);
}

std::vector<Trajectory> load_split(const config::RunConfig& cfg,
                                   const std::string& split, bool keep_masks) {
    auto entries = trajgen::read_manifest(cfg.manifest_path());
    std::vector<const trajgen::ManifestEntry*> wanted;
    for (const auto& e : entries)
        if (split == "all" || e.split == split) wanted.push_back(&e);

    std::vector<Trajectory> out(wanted.size());
    parallel_for(static_cast<int>(wanted.size()), cfg.threads, [&](int i) {
        out[i] = trajgen::load_trajectory(cfg.dataset_dir() + "/" + wanted[i]->path);
        if (!keep_masks) {
            out[i].masks.clear();
            out[i].masks.shrink_to_fit();
        }
    });
    return out;
}

void cmd_train(const config::RunConfig& cfg) {
    auto train_set = load_split(cfg, "train", false);
    auto val_set = load_split(cfg, "val", false);
    if (train_set.empty()) throw Error("no training sequences in " + cfg.manifest_path());

    fs::create_directories(cfg.out_dir);
    CsvWriter log(cfg.train_log_path());
    log.standard_comments(cfg.hash(), cfg.master_seed);
    log.row({"epoch", "train_loss", "val_loss", "val_bacc", "lr", "seconds"});

    train::TrainResult result =
        train::train_loop(train_set, val_set, model_config(cfg), cfg.train, cfg.threads,
                          [&](const train::TrainLogRow& r) {
                              log.row({std::to_string(r.epoch), fnum(r.train_loss),
                                       fnum(r.val_loss), fnum(r.val_bacc), fnum(r.lr),
                                       fnum_fixed(r.seconds, 3)});
                          });

    model::FateModel<float> best(model_config(cfg));
    best.params() = std::move(result.best_params);
    checkpoint::save_model(best, cfg.checkpoint_path(), cfg.model_manifest_path(),
                           cfg.master_seed);
}

void cmd_eval(const config::RunConfig& cfg) {
    auto m = checkpoint::load_model(cfg.checkpoint_path(), cfg.model_manifest_path());
    auto test_set = load_split(cfg, "test", false);
    if (test_set.empty()) throw Error("no test sequences in " + cfg.manifest_path());

    eval::ConfusionMatrix cm = eval::evaluate(m, test_set, cfg.threads);
    fs::create_directories(cfg.out_dir);

    CsvWriter metrics(cfg.out_dir + "/metrics.csv");
    metrics.standard_comments(cfg.hash(), cfg.master_seed);
    metrics.row({"metric", "value"});
    metrics.row({"n_test", std::to_string(cm.total())});
    metrics.row({"bacc", fnum(eval::balanced_accuracy(cm))});
    metrics.row({"f1_macro", fnum(eval::f1_macro(cm))});
    metrics.row({"recall_apoptosis", fnum(eval::recall_apoptosis(cm))});
    metrics.row({"recall_mitosis", fnum(eval::recall_mitosis(cm))});

    CsvWriter conf(cfg.out_dir + "/confusion.csv");
    conf.standard_comments(cfg.hash(), cfg.master_seed);
    conf.row({"true_label", "pred_apoptosis", "pred_mitosis", "frac_pred_apoptosis",
              "frac_pred_mitosis"});
    const double apo_total = static_cast<double>(cm.tp + cm.fn);
    const double mito_total = static_cast<double>(cm.fp + cm.tn);
    conf.row({"apoptosis", std::to_string(cm.tp), std::to_string(cm.fn),
              fnum(cm.tp / apo_total), fnum(cm.fn / apo_total)});
    conf.row({"mitosis", std::to_string(cm.fp), std::to_string(cm.tn),
              fnum(cm.fp / mito_total), fnum(cm.tn / mito_total)});
}

void cmd_sweep(const config::RunConfig& cfg, eval::Protocol protocol,
               const std::vector<int>& ks) {
    auto m = checkpoint::load_model(cfg.checkpoint_path(), cfg.model_manifest_path());
    auto test_set = load_split(cfg, "test", false);
    if (test_set.empty()) throw Error("no test sequences in " + cfg.manifest_path());

    eval::SweepCurve curve = eval::sweep(m, test_set, protocol, ks, cfg.threads);
    fs::create_directories(cfg.out_dir);
    CsvWriter out(cfg.out_dir + "/sweep_" + eval::to_string(protocol) + ".csv");
    out.standard_comments(cfg.hash(), cfg.master_seed);
    out.row({"protocol", "k", "n", "bacc", "f1_macro", "recall_apoptosis",
             "recall_mitosis"});
    for (const auto& pt : curve.points)
        out.row({eval::to_string(protocol), std::to_string(pt.k), std::to_string(pt.n),
                 fnum(pt.bacc), fnum(pt.f1), fnum(pt.recall_apo), fnum(pt.recall_mito)});
}

morphfeat::FeatureTable compute_feature_table(const std::vector<Trajectory>& trajs,
                                              int threads) {
    struct Row {
        int frame;
        morphfeat::FeatureVector fv;
    };
    std::vector<std::vector<Row>> per_traj(trajs.size());
    parallel_for(static_cast<int>(trajs.size()), threads, [&](int i) {
        const Trajectory& traj = trajs[i];
        if (!traj.has_masks()) return;
        const int h = traj.frames.h, w = traj.frames.w;
        for (int t = 0; t < traj.frames.t; ++t) {
            morphfeat::Bitmap mask(h, w);
            const uint8_t* src = traj.mask(t);
            bool any = false;
            for (int k = 0; k < h * w; ++k) {
                mask.px[k] = src[k] != 0;
                any = any || src[k];
            }
            if (!any) continue;  // missing segmentation: row stays absent
            auto labels = morphfeat::connected_components(mask);
            auto region = morphfeat::central_region(labels, w / 2.0, h / 2.0);
            if (!region) continue;
            per_traj[i].push_back(
                {t, morphfeat::compute_features(*region, traj.frames.frame(t),
                                                traj.frames.c, h, w)});
        }
    });
    morphfeat::FeatureTable table;
    for (size_t i = 0; i < trajs.size(); ++i)
        for (auto& row : per_traj[i]) table.insert(trajs[i].traj_id, row.frame, row.fv);
    return table;
}

void cmd_features(const config::RunConfig& cfg) {
    auto trajs = load_split(cfg, "all", true);
    morphfeat::FeatureTable table = compute_feature_table(trajs, cfg.threads);

    fs::create_directories(cfg.out_dir);
    CsvWriter out(cfg.out_dir + "/features.csv");
    out.standard_comments(cfg.hash(), cfg.master_seed);
    std::vector<std::string> header = {"traj_id", "frame"};
    for (const auto& name : morphfeat::feature_names(table.channels())) header.push_back(name);
    out.row(header);
    for (const auto& [key, fv] : table.rows()) {
        std::vector<std::string> row = {key.first, std::to_string(key.second),
                                        fnum(fv.area),        fnum(fv.perimeter),
                                        fnum(fv.equiv_diameter), fnum(fv.eccentricity),
                                        fnum(fv.solidity),    fnum(fv.circularity)};
        for (double v : fv.mean_intensity) row.push_back(fnum(v));
        out.row(row);
    }
}

void cmd_explain(const config::RunConfig& cfg) {
    auto m = checkpoint::load_model(cfg.checkpoint_path(), cfg.model_manifest_path());
    auto test_set = load_split(cfg, "test", true);
    if (test_set.empty()) throw Error("no test sequences in " + cfg.manifest_path());

    // Attention profiles of correctly classified sequences only.
    std::vector<uint8_t> correct(test_set.size(), 0);
    std::vector<std::vector<double>> weights(test_set.size());
    parallel_for(static_cast<int>(test_set.size()), cfg.threads, [&](int i) {
        auto pred = m.predict(test_set[i]);
        correct[i] = pred.label == test_set[i].label;
        weights[i] = std::move(pred.attention.weights);
    });

    std::vector<std::pair<Label, std::vector<double>>> profiles;
    std::vector<Trajectory> kept;
    for (size_t i = 0; i < test_set.size(); ++i) {
        if (!correct[i]) continue;
        profiles.emplace_back(test_set[i].label, weights[i]);
        kept.push_back(std::move(test_set[i]));
    }
    if (profiles.empty()) throw Error("explain: no correctly classified sequences");

    fs::create_directories(cfg.out_dir);
    auto agg = explain::aggregate_attention(profiles, cfg.explain.window);
    {
        CsvWriter out(cfg.out_dir + "/attention_aggregate.csv");
        out.standard_comments(cfg.hash(), cfg.master_seed);
        out.row({"class", "offset_from_end", "mean_weight", "normalized_weight",
                 "n_contributing"});
        for (int c = 0; c < 2; ++c) {
            const auto& cc = agg.per_class[c];
            for (int o = 0; o < agg.window; ++o) {
                if (!cc.n_contributing[o]) continue;
                out.row({to_string(static_cast<Label>(c)), std::to_string(o),
                         fnum(cc.mean[o]), fnum(cc.normalized[o]),
                         std::to_string(cc.n_contributing[o])});
            }
        }
    }

    // Partition per sequence, then feature-difference statistics.
    std::vector<explain::SequencePartition> parts;
    for (size_t i = 0; i < kept.size(); ++i) {
        if (profiles[i].second.size() < 2) continue;
        explain::SequencePartition sp;
        sp.traj_id = kept[i].traj_id;
        sp.label = kept[i].label;
        sp.part = explain::partition_frames(profiles[i].second, cfg.explain.quantile);
        parts.push_back(std::move(sp));
    }
    morphfeat::FeatureTable table = compute_feature_table(kept, cfg.threads);

    explain::EffectParams params;
    params.permutation_iters = cfg.explain.permutation_iters;
    params.bootstrap_resamples = cfg.explain.bootstrap_resamples;
    params.ci_level = cfg.explain.ci_level;
    params.master_seed = cfg.master_seed;
    explain::EffectReport report = explain::effect_report(parts, table, params);

    {
        CsvWriter out(cfg.out_dir + "/effect_sequences.csv");
        out.standard_comments(cfg.hash(), cfg.master_seed);
        out.row({"traj_id", "feature", "n_high", "n_low", "p_value", "cliffs_delta"});
        for (const auto& r : report.records)
            out.row({r.traj_id, r.feature, std::to_string(r.n_high),
                     std::to_string(r.n_low), fnum(r.p_value), fnum(r.delta)});
    }
    {
        CsvWriter out(cfg.out_dir + "/effect_summary.csv");
        out.standard_comments(cfg.hash(), cfg.master_seed);
        out.comment("n_sequences_total=" + std::to_string(parts.size()));
        out.comment("excluded_degenerate=" + std::to_string(report.n_excluded_degenerate));
        out.comment("excluded_missing_features=" +
                    std::to_string(report.n_excluded_missing));
        out.row({"feature", "class", "median_delta", "ci_low", "ci_high", "category",
                 "n_sequences"});
        for (const auto& s : report.summary)
            out.row({s.feature, to_string(s.label), fnum(s.median_delta), fnum(s.ci_low),
                     fnum(s.ci_high), s.category, std::to_string(s.n_sequences)});
    }
}

}  // namespace tempattn::pipeline
