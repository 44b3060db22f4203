#pragma once

#include <cstdint>
#include <random>

#include "dlgfa/data.hpp"
#include "dlgfa/objective.hpp"

namespace dlgfa {

struct OptimConfig {
    double lr_adam = 1e-3;
    double lr_prox = 1e-4;
    double lambda = 0.0;
    std::size_t max_epochs = 100;
    std::size_t max_iterations = 0;  // total batch steps; 0 = bounded by epochs only
    double tol = 1e-5;
    std::uint64_t seed = 0;
    std::size_t batch_size = 64;
    double theta_prior_weight = 0.0;
    std::size_t checkpoint_every = 0;  // epochs; 0 = off

    void validate() const;
};

// Per-parameter Adam moments; beta = (0.9, 0.999), eps = 1e-8. Loading
// matrices never enter this state: they are updated by gradient-plus-prox.
struct AdamState {
    std::map<std::string, std::pair<Tensor, Tensor>> moments;
    long step = 0;
};

struct TrainHistory {
    std::vector<LossBreakdown> epochs;
    std::vector<std::size_t> zero_columns;
};

void adam_step(ParamStore& store, AdamState& state, double lr);

// Column soft-threshold: norms at or below the threshold collapse
// to literal zeros, the rest shrink radially by the threshold.
void prox_group_columns(LoadingMatrices& W, double threshold);

std::size_t count_zero_columns(const LoadingMatrices& W);

// One pass over the dataset: Adam on network parameters, gradient step plus
// prox on every loading matrix, per batch. Returns the epoch-mean breakdown.
// max_batches > 0 truncates the epoch (iteration budget).
LossBreakdown train_epoch(DlgfaModel& model, const LongitudinalDataset& dataset,
                          const OptimConfig& config, AdamState& state, std::mt19937_64& rng,
                          std::uint64_t epoch, std::size_t max_batches = 0);

// Relative change of both the smooth objective and the penalty below tol for
// 10 consecutive epochs.
bool has_converged(const TrainHistory& history, double tol);

using EpochCallback = std::function<void(std::size_t epoch, const DlgfaModel&, const TrainHistory&)>;

std::pair<DlgfaModel, TrainHistory> fit(const LongitudinalDataset& dataset,
                                        const ModelConfig& model_config,
                                        const OptimConfig& optim_config,
                                        const EpochCallback& on_epoch = nullptr);

}  // namespace dlgfa
