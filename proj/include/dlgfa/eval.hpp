#pragma once

#include "dlgfa/data.hpp"
#include "dlgfa/optim.hpp"

namespace dlgfa {

// Column norms ||W_t[:,j]^(g)|| for every (t, g, j) with exact-zero flags.
struct SparsityReport {
    std::size_t T = 0, G = 0, K = 0;
    std::vector<double> norms;       // t * G * K + g * K + j
    std::vector<bool> zero_flags;    // same indexing; true iff stored column is all 0.0
    std::vector<std::string> group_names;

    double norm(std::size_t t, std::size_t g, std::size_t j) const { return norms[(t * G + g) * K + j]; }
    bool is_zero(std::size_t t, std::size_t g, std::size_t j) const { return zero_flags[(t * G + g) * K + j]; }
};

// Per latent dimension: groups ordered by norm descending, zero norms dropped.
struct FactorRanking {
    std::size_t t = 0;
    std::vector<std::vector<std::pair<std::string, double>>> per_factor;
};

enum class NoiseMode { ZeroNoise, Sampled };

// Mean squared reconstruction error over (sequence, t, feature); ZeroNoise
// decodes at the posterior mean.
double mse_test(const DlgfaModel& model, const LongitudinalDataset& dataset,
                NoiseMode mode = NoiseMode::ZeroNoise, std::uint64_t seed = 0);

// ELBO lower-bound estimate (recon - kl, no penalty) summed over the dataset,
// averaged over reparameterization samples. Noise is derived per sequence from
// the seed and the sequence contents, so the value is order-invariant.
double test_log_likelihood(const DlgfaModel& model, const LongitudinalDataset& dataset,
                           std::size_t num_samples, std::uint64_t seed = 0);

SparsityReport sparsity_report(const DlgfaModel& model);

FactorRanking top_features_per_factor(const SparsityReport& report, std::size_t t, std::size_t top_k);

void export_heatmap_csv(const SparsityReport& report, std::size_t t, const std::string& path);
void export_sparsity_csv(const SparsityReport& report, const std::string& path);
void export_ranking_csv(const FactorRanking& ranking, const std::string& path);

struct SweepRow {
    double lambda = 0.0;
    double mse_val = 0.0;
    double loglik_val = 0.0;
    std::size_t zero_columns = 0;
};

// One model per lambda, same seed, evaluated on the validation split.
std::vector<SweepRow> lambda_sweep(const LongitudinalDataset& train,
                                   const LongitudinalDataset& val,
                                   const ModelConfig& model_config, const OptimConfig& optim_config,
                                   const std::vector<double>& lambdas);

void export_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace dlgfa
