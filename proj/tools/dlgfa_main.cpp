#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "dlgfa/checkpoint.hpp"
#include "dlgfa/config.hpp"
#include "dlgfa/eval.hpp"

namespace fs = std::filesystem;
using namespace dlgfa;

namespace {

constexpr const char* kVersion = "1.0.0";

LongitudinalDataset load_dataset(const DataConfig& dc) {
    if (dc.source == "csv") return load_wide_csv(dc.path);
    const OneBarMode mode =
        dc.mode == "replicate_T" ? OneBarMode::ReplicateT : OneBarMode::RowAsTime;
    return generate_one_bar(dc.n, dc.size, dc.noise_sd, dc.seed, mode, dc.replicate_t);
}

void fill_model_from_data(ModelConfig& mc, const LongitudinalDataset& ds) {
    mc.group_spec = ds.group_spec;
    if (mc.T == 0) mc.T = ds.timesteps();
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    out << "epoch,recon,kl,penalty,objective,zero_columns\n";
    char buf[32];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (std::size_t i = 0; i < history.epochs.size(); ++i) {
        const LossBreakdown& bd = history.epochs[i];
        out << (i + 1) << "," << num(bd.recon_loglik) << "," << num(bd.kl) << ","
            << num(bd.penalty) << "," << num(bd.objective) << "," << history.zero_columns[i] << "\n";
    }
}

void write_manifest(const RunConfig& cfg, const std::string& dir) {
    std::ofstream out(dir + "/manifest");
    if (!out) throw ParseError("cannot write manifest in " + dir);
    out << "# dlgfa " << kVersion << " run manifest; rerun with: dlgfa train --config manifest\n";
    out << render_config(cfg);
}

int cmd_synth(const std::string& out_path, std::size_t n, std::size_t size, double noise_sd,
              std::uint64_t seed, const std::string& mode, std::size_t replicate_t) {
    const OneBarMode m = mode == "replicate_T" ? OneBarMode::ReplicateT : OneBarMode::RowAsTime;
    LongitudinalDataset ds = generate_one_bar(n, size, noise_sd, seed, m, replicate_t);
    save_wide_csv(ds, out_path);
    std::cout << "wrote " << ds.count() << " sequences (" << ds.timesteps() << " x " << ds.dim()
              << ") to " << out_path << "\n";
    return 0;
}

int cmd_train(RunConfig cfg) {
    if (!cfg.seed_given) {
        cfg.optim.seed = std::random_device{}();
        cfg.seed_given = true;
    }
    LongitudinalDataset ds = load_dataset(cfg.data);
    auto [train_ds, val_ds, test_ds] = split_dataset(ds, cfg.data.split);
    fill_model_from_data(cfg.model, train_ds);

    fs::create_directories(cfg.output_dir);
    write_manifest(cfg, cfg.output_dir);

    const std::string ckpt_path = cfg.output_dir + "/model.ckpt";
    EpochCallback on_epoch = [&](std::size_t epoch, const DlgfaModel& model,
                                 const TrainHistory& history) {
        if (cfg.optim.checkpoint_every > 0 && (epoch + 1) % cfg.optim.checkpoint_every == 0) {
            save_checkpoint(model, ckpt_path);
            write_history_csv(history, cfg.output_dir + "/history.csv");
        }
    };
    auto [model, history] = fit(train_ds, cfg.model, cfg.optim, on_epoch);
    save_checkpoint(model, ckpt_path);
    write_history_csv(history, cfg.output_dir + "/history.csv");
    if (!history.epochs.empty()) {
        const LossBreakdown& last = history.epochs.back();
        std::cout << "trained " << history.epochs.size() << " epochs; objective "
                  << last.objective << ", zero columns " << history.zero_columns.back() << "\n";
    }
    std::cout << "checkpoint: " << ckpt_path << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& config_path,
             const std::string& data_path, const std::string& out_dir, std::size_t num_samples,
             std::uint64_t seed) {
    DlgfaModel model = load_checkpoint(ckpt_path);
    LongitudinalDataset ds;
    if (!data_path.empty()) {
        ds = load_wide_csv(data_path);
    } else if (!config_path.empty()) {
        RunConfig cfg = parse_config(config_path);
        LongitudinalDataset full = load_dataset(cfg.data);
        auto [train_ds, val_ds, test_ds] = split_dataset(full, cfg.data.split);
        ds = std::move(test_ds);
    } else {
        throw ParseError("eval: provide --data or --config");
    }
    const double mse = mse_test(model, ds);
    const double ll = test_log_likelihood(model, ds, num_samples, seed);

    fs::create_directories(out_dir);
    std::ofstream out(out_dir + "/metrics.csv");
    if (!out) throw ParseError("cannot write metrics.csv in " + out_dir);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", mse);
    out << "metric,value\nmse_test," << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", ll);
    out << "test_log_likelihood," << buf << "\n";
    std::cout << "mse_test = " << mse << "\ntest_log_likelihood = " << ll << "\n";
    return 0;
}

int cmd_report(const std::string& ckpt_path, std::size_t t, std::size_t top_k,
               const std::string& out_dir) {
    DlgfaModel model = load_checkpoint(ckpt_path);
    SparsityReport rep = sparsity_report(model);
    if (t < 1 || t > rep.T) throw ContractError("report: --t out of range 1.." + std::to_string(rep.T));
    fs::create_directories(out_dir);
    export_sparsity_csv(rep, out_dir + "/sparsity.csv");
    export_heatmap_csv(rep, t - 1, out_dir + "/heatmap_t" + std::to_string(t) + ".csv");
    FactorRanking ranking = top_features_per_factor(rep, t - 1, top_k);
    export_ranking_csv(ranking, out_dir + "/ranking_t" + std::to_string(t) + ".csv");

    std::cout << "factor rankings at t=" << t << ":\n";
    for (std::size_t j = 0; j < ranking.per_factor.size(); ++j) {
        std::cout << "  z" << j << ":";
        for (const auto& [name, norm] : ranking.per_factor[j]) {
            std::cout << " " << name << "(" << norm << ")";
        }
        if (ranking.per_factor[j].empty()) std::cout << " (all zero)";
        std::cout << "\n";
    }
    return 0;
}

int cmd_sweep(RunConfig cfg, const std::string& lambdas_arg) {
    std::vector<double> lambdas;
    std::stringstream ss(lambdas_arg);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) lambdas.push_back(std::stod(item));
    }
    if (lambdas.empty()) throw ParseError("sweep: --lambdas must list at least one value");
    if (!cfg.seed_given) {
        cfg.optim.seed = std::random_device{}();
        cfg.seed_given = true;
    }
    LongitudinalDataset ds = load_dataset(cfg.data);
    auto [train_ds, val_ds, test_ds] = split_dataset(ds, cfg.data.split);
    fill_model_from_data(cfg.model, train_ds);

    fs::create_directories(cfg.output_dir);
    write_manifest(cfg, cfg.output_dir);
    std::vector<SweepRow> rows = lambda_sweep(train_ds, val_ds, cfg.model, cfg.optim, lambdas);
    export_sweep_csv(rows, cfg.output_dir + "/sweep.csv");
    std::cout << "lambda\tmse_val\tloglik_val\tzero_columns\n";
    for (const SweepRow& row : rows) {
        std::cout << row.lambda << "\t" << row.mse_val << "\t" << row.loglik_val << "\t"
                  << row.zero_columns << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DLGFA: recurrent group factor analysis for longitudinal multi-view data"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a one-bar dataset CSV");
    std::string synth_out = "dataset.csv", synth_mode = "row_as_time";
    std::size_t synth_n = 2000, synth_size = 8, synth_rep = 20;
    double synth_noise = 0.05;
    std::uint64_t synth_seed = 0;
    synth->add_option("--out", synth_out, "output CSV path");
    synth->add_option("--n", synth_n, "number of sequences");
    synth->add_option("--size", synth_size, "image side length");
    synth->add_option("--noise-sd", synth_noise, "pixel noise standard deviation");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--mode", synth_mode, "row_as_time or replicate_T");
    synth->add_option("--replicate-t", synth_rep, "timesteps in replicate_T mode");

    // train / sweep share config + overrides
    std::string config_path, out_override;
    double lambda_override = -1.0;
    long long seed_override = -1, epochs_override = -1, iters_override = -1, batch_override = -1;
    auto add_train_opts = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run config file")->required();
        cmd->add_option("--out", out_override, "override output_dir");
        cmd->add_option("--lambda", lambda_override, "override optim.lambda");
        cmd->add_option("--seed", seed_override, "override optim.seed");
        cmd->add_option("--max-epochs", epochs_override, "override optim.max_epochs");
        cmd->add_option("--max-iterations", iters_override, "override optim.max_iterations");
        cmd->add_option("--batch-size", batch_override, "override optim.batch_size");
    };
    auto* train = app.add_subcommand("train", "train a model from a config file");
    add_train_opts(train);
    auto* sweep = app.add_subcommand("sweep", "train one model per lambda, report validation metrics");
    add_train_opts(sweep);
    std::string lambdas_arg;
    sweep->add_option("--lambdas", lambdas_arg, "comma-separated lambda values")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string eval_ckpt, eval_config, eval_data, eval_out = "out";
    std::size_t eval_samples = 1;
    std::uint64_t eval_seed = 0;
    eval->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
    eval->add_option("--config", eval_config, "run config (evaluates on its test split)");
    eval->add_option("--data", eval_data, "dataset CSV (evaluates on the whole file)");
    eval->add_option("--out", eval_out, "output directory");
    eval->add_option("--num-samples", eval_samples, "reparameterization samples for log-likelihood");
    eval->add_option("--seed", eval_seed, "noise seed");

    // report
    auto* report = app.add_subcommand("report", "export sparsity/heatmap/ranking CSVs");
    std::string report_ckpt, report_out = "out";
    std::size_t report_t = 1, report_topk = 5;
    report->add_option("--checkpoint", report_ckpt, "model checkpoint")->required();
    report->add_option("--t", report_t, "timestep (1-based)");
    report->add_option("--top-k", report_topk, "groups listed per factor");
    report->add_option("--out", report_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (*synth) {
            return cmd_synth(synth_out, synth_n, synth_size, synth_noise, synth_seed, synth_mode,
                             synth_rep);
        }
        if (*train || *sweep) {
            RunConfig cfg = parse_config(config_path);
            if (!out_override.empty()) cfg.output_dir = out_override;
            if (lambda_override >= 0.0) cfg.optim.lambda = lambda_override;
            if (seed_override >= 0) {
                cfg.optim.seed = static_cast<std::uint64_t>(seed_override);
                cfg.seed_given = true;
            }
            if (epochs_override >= 0) cfg.optim.max_epochs = static_cast<std::size_t>(epochs_override);
            if (iters_override >= 0) cfg.optim.max_iterations = static_cast<std::size_t>(iters_override);
            if (batch_override > 0) cfg.optim.batch_size = static_cast<std::size_t>(batch_override);
            return *train ? cmd_train(std::move(cfg)) : cmd_sweep(std::move(cfg), lambdas_arg);
        }
        if (*eval) return cmd_eval(eval_ckpt, eval_config, eval_data, eval_out, eval_samples, eval_seed);
        if (*report) return cmd_report(report_ckpt, report_t, report_topk, report_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
