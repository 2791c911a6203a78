#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tempattn/pipeline.hpp"

using namespace tempattn;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    int64_t seed = -1;
    int threads = -1;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Run config file (key = value lines)");
    cmd->add_option("--out", opts.out_dir, "Output directory (default: out)");
    cmd->add_option("--seed", opts.seed, "Master seed override");
    cmd->add_option("--threads", opts.threads,
                    "Worker cap; 0 = all cores (env TEMPATTN_THREADS as fallback)");
    cmd->add_option("overrides", opts.overrides,
                    "Dotted-key overrides, e.g. train.learning_rate=1e-5");
}

config::RunConfig build_config(const CommonOpts& opts) {
    config::RunConfig cfg = opts.config_path.empty()
                                ? config::RunConfig()
                                : config::RunConfig::from_file(opts.config_path);
    for (const auto& kv : opts.overrides) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw Error("override must be key=value: '" + kv + "'");
        cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.seed >= 0) cfg.master_seed = static_cast<uint64_t>(opts.seed);
    if (opts.threads >= 0) {
        cfg.threads = opts.threads;
    } else if (cfg.threads == 0) {
        if (const char* env = std::getenv("TEMPATTN_THREADS")) cfg.threads = std::atoi(env);
    }
    cfg.finalize();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tempattn: temporal-attention cell fate toolkit"};
    app.require_subcommand(1);

    CommonOpts gen_o, train_o, eval_o, sweep_o, explain_o, feat_o;
    auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset + manifest");
    add_common(gen, gen_o);
    auto* tr = app.add_subcommand("train", "Train the classifier on a dataset");
    add_common(tr, train_o);
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
    add_common(ev, eval_o);
    auto* sw = app.add_subcommand("sweep", "Temporal ablation sweep over k values");
    add_common(sw, sweep_o);
    std::string protocol = "truncate_tail";
    std::string k_list_text;
    sw->add_option("--protocol", protocol, "truncate_tail | keep_last");
    sw->add_option("--k-list", k_list_text, "Comma list (0,5,10) or range (0:50:5)");
    auto* ex = app.add_subcommand("explain", "Attention aggregation + effect sizes");
    add_common(ex, explain_o);
    auto* ft = app.add_subcommand("features", "Per-frame morphology feature table");
    add_common(ft, feat_o);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            pipeline::cmd_generate(build_config(gen_o));
        } else if (tr->parsed()) {
            pipeline::cmd_train(build_config(train_o));
        } else if (ev->parsed()) {
            pipeline::cmd_eval(build_config(eval_o));
        } else if (sw->parsed()) {
            config::RunConfig cfg = build_config(sweep_o);
            std::vector<int> ks =
                k_list_text.empty() ? cfg.k_list : config::parse_k_list(k_list_text);
            pipeline::cmd_sweep(cfg, eval::protocol_from_string(protocol), ks);
        } else if (ex->parsed()) {
            pipeline::cmd_explain(build_config(explain_o));
        } else if (ft->parsed()) {
            pipeline::cmd_features(build_config(feat_o));
        }
    } catch (const std::exception& e) {
        nlohmann::json err = {{"error", e.what()}};
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        return 1;
    }
    return 0;
}
