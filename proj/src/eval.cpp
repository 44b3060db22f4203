#include "dlgfa/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>

namespace dlgfa {

namespace {

// Content hash so per-sequence noise does not depend on dataset order.
std::uint64_t sequence_hash(const LongitudinalDataset& ds, std::size_t i) {
    const std::size_t stride = ds.timesteps() * ds.dim();
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t k = 0; k < stride; ++k) {
        const double v = ds.sequences.data()[i * stride + k];
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, sizeof(bits));
        h = (h ^ bits) * 1099511628211ULL;
    }
    return h;
}

Tensor single_sequence_batch(const LongitudinalDataset& ds, std::size_t i) {
    const std::size_t T = ds.timesteps(), d = ds.dim();
    Tensor batch = Tensor::zeros({T, 1, d});
    std::copy(ds.sequences.data().begin() + i * T * d, ds.sequences.data().begin() + (i + 1) * T * d,
              batch.data().begin());
    return batch;
}

void write_number(std::ofstream& out, double v) {
    if (v == 0.0) {
        out << "0";
        return;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
}

}  // namespace

double mse_test(const DlgfaModel& model, const LongitudinalDataset& dataset, NoiseMode mode,
                std::uint64_t seed) {
    dataset.validate();
    const std::size_t N = dataset.count(), T = dataset.timesteps(), d = dataset.dim();
    if (d != model.config().d()) throw DimensionError("mse_test: dataset/model dimension mismatch");
    const std::size_t K = model.config().K;
    const auto& spec = model.config().group_spec;

    double sq_sum = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        Tensor batch = single_sequence_batch(dataset, i);
        Tensor noise = Tensor::zeros({T, 1, K});
        if (mode == NoiseMode::Sampled) {
            std::mt19937_64 rng(seed ^ sequence_hash(dataset, i));
            std::normal_distribution<double> stdnorm(0.0, 1.0);
            for (double& v : noise.data()) v = stdnorm(rng);
        }
        Tape tape;
        SequenceGraph g = model.forward_sequence(tape, batch, noise);
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t gi = 0; gi < spec.group_count(); ++gi) {
                const Tensor& mean = tape.value(g.steps[t].likelihood[gi].mean);  // 1 x d_g
                const std::size_t off = spec.offset(gi);
                for (std::size_t c = 0; c < spec.dims[gi]; ++c) {
                    const double truth = batch.data()[t * d + off + c];
                    const double err = mean[c] - truth;
                    sq_sum += err * err;
                }
            }
        }
    }
    return sq_sum / static_cast<double>(N * T * d);
}

double test_log_likelihood(const DlgfaModel& model, const LongitudinalDataset& dataset,
                           std::size_t num_samples, std::uint64_t seed) {
    if (num_samples == 0) throw ContractError("test_log_likelihood: num_samples must be >= 1");
    dataset.validate();
    const std::size_t N = dataset.count(), T = dataset.timesteps();
    const std::size_t K = model.config().K;

    double total = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const std::uint64_t h = sequence_hash(dataset, i);
        Tensor batch = single_sequence_batch(dataset, i);
        double seq_acc = 0.0;
        for (std::size_t s = 0; s < num_samples; ++s) {
            std::mt19937_64 rng(seed ^ h ^ (0x9e3779b97f4a7c15ULL * (s + 1)));
            std::normal_distribution<double> stdnorm(0.0, 1.0);
            Tensor noise = Tensor::zeros({T, 1, K});
            for (double& v : noise.data()) v = stdnorm(rng);
            LossBreakdown bd = collapsed_elbo(model, batch, noise, 0.0);
            seq_acc += bd.recon_loglik - bd.kl;
        }
        total += seq_acc / static_cast<double>(num_samples);
    }
    return total;
}

SparsityReport sparsity_report(const DlgfaModel& model) {
    const LoadingMatrices& W = model.loadings();
    SparsityReport rep;
    rep.T = W.timesteps();
    rep.G = W.groups();
    rep.K = W.latent_dim();
    rep.group_names = model.config().group_spec.names;
    rep.norms.resize(rep.T * rep.G * rep.K);
    rep.zero_flags.resize(rep.T * rep.G * rep.K);
    for (std::size_t t = 0; t < rep.T; ++t) {
        for (std::size_t g = 0; g < rep.G; ++g) {
            const Tensor& w = W.at(t, g);
            for (std::size_t j = 0; j < rep.K; ++j) {
                bool all_zero = true;
                for (std::size_t r = 0; r < W.rows(); ++r) {
                    if (w.at(r, j) != 0.0) { all_zero = false; break; }
                }
                rep.norms[(t * rep.G + g) * rep.K + j] = W.column_norm(t, g, j);
                rep.zero_flags[(t * rep.G + g) * rep.K + j] = all_zero;
            }
        }
    }
    return rep;
}

FactorRanking top_features_per_factor(const SparsityReport& report, std::size_t t, std::size_t top_k) {
    if (t >= report.T) throw ContractError("top_features_per_factor: t out of range");
    FactorRanking ranking;
    ranking.t = t;
    for (std::size_t j = 0; j < report.K; ++j) {
        std::vector<std::pair<std::string, double>> entries;
        std::vector<std::size_t> order;
        for (std::size_t g = 0; g < report.G; ++g) {
            if (report.norm(t, g, j) > 0.0) order.push_back(g);
        }
        // descending norm, ties broken by group index
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return report.norm(t, a, j) > report.norm(t, b, j);
        });
        if (order.size() > top_k) order.resize(top_k);
        for (std::size_t g : order) entries.emplace_back(report.group_names[g], report.norm(t, g, j));
        ranking.per_factor.push_back(std::move(entries));
    }
    return ranking;
}

void export_heatmap_csv(const SparsityReport& report, std::size_t t, const std::string& path) {
    if (t >= report.T) throw ContractError("export_heatmap_csv: t out of range");
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    out << "group";
    for (std::size_t j = 0; j < report.K; ++j) out << ",z" << j;
    out << "\n";
    for (std::size_t g = 0; g < report.G; ++g) {
        out << report.group_names[g];
        for (std::size_t j = 0; j < report.K; ++j) {
            out << ",";
            write_number(out, report.norm(t, g, j));
        }
        out << "\n";
    }
}

void export_sparsity_csv(const SparsityReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    out << "t,g,group,j,norm,zero\n";
    for (std::size_t t = 0; t < report.T; ++t) {
        for (std::size_t g = 0; g < report.G; ++g) {
            for (std::size_t j = 0; j < report.K; ++j) {
                out << (t + 1) << "," << g << "," << report.group_names[g] << "," << j << ",";
                write_number(out, report.norm(t, g, j));
                out << "," << (report.is_zero(t, g, j) ? 1 : 0) << "\n";
            }
        }
    }
}

void export_ranking_csv(const FactorRanking& ranking, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    out << "t,factor,rank,group,norm\n";
    for (std::size_t j = 0; j < ranking.per_factor.size(); ++j) {
        for (std::size_t r = 0; r < ranking.per_factor[j].size(); ++r) {
            out << (ranking.t + 1) << "," << j << "," << (r + 1) << ","
                << ranking.per_factor[j][r].first << ",";
            write_number(out, ranking.per_factor[j][r].second);
            out << "\n";
        }
    }
}

std::vector<SweepRow> lambda_sweep(const LongitudinalDataset& train, const LongitudinalDataset& val,
                                   const ModelConfig& model_config, const OptimConfig& optim_config,
                                   const std::vector<double>& lambdas) {
    if (lambdas.empty()) throw ContractError("lambda_sweep: empty lambda list");
    std::vector<SweepRow> rows;
    for (double lambda : lambdas) {
        if (lambda < 0.0) throw ContractError("lambda_sweep: lambda must be >= 0");
        OptimConfig cfg = optim_config;
        cfg.lambda = lambda;
        auto [model, history] = fit(train, model_config, cfg);
        SweepRow row;
        row.lambda = lambda;
        row.mse_val = mse_test(model, val);
        row.loglik_val = test_log_likelihood(model, val, 1, cfg.seed);
        row.zero_columns = count_zero_columns(model.loadings());
        rows.push_back(row);
    }
    return rows;
}

void export_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    out << "lambda,mse_val,loglik_val,zero_columns\n";
    for (const SweepRow& row : rows) {
        write_number(out, row.lambda);
        out << ",";
        write_number(out, row.mse_val);
        out << ",";
        write_number(out, row.loglik_val);
        out << "," << row.zero_columns << "\n";
    }
}

}  // namespace dlgfa
