#include "dlgfa/optim.hpp"

#include <cmath>

namespace dlgfa {

void OptimConfig::validate() const {
    if (lr_adam <= 0.0 || lr_prox <= 0.0) throw ContractError("optim config: learning rates must be > 0");
    if (lambda < 0.0) throw ContractError("optim config: lambda must be >= 0");
    if (tol <= 0.0) throw ContractError("optim config: tol must be > 0");
    if (batch_size == 0) throw ContractError("optim config: batch size must be >= 1");
}

namespace {
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
}

void adam_step(ParamStore& store, AdamState& state, double lr) {
    if (state.moments.empty()) {
        for (const auto& name : store.names()) {
            state.moments.emplace(name, std::make_pair(Tensor::zeros(store.param(name).shape()),
                                                       Tensor::zeros(store.param(name).shape())));
        }
    } else if (state.moments.size() != store.size()) {
        throw ContractError("adam_step: state does not match parameter store");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
    for (const auto& name : store.names()) {
        auto it = state.moments.find(name);
        if (it == state.moments.end()) throw ContractError("adam_step: missing moments for " + name);
        Tensor& p = store.param(name);
        const Tensor& g = store.grad(name);
        Tensor& m = it->second.first;
        Tensor& v = it->second.second;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
        }
    }
}

void prox_group_columns(LoadingMatrices& W, double threshold) {
    if (threshold < 0.0) throw ContractError("prox_group_columns: threshold must be >= 0");
    if (threshold == 0.0) return;
    const std::size_t p = W.rows(), K = W.latent_dim();
    for (std::size_t t = 0; t < W.timesteps(); ++t) {
        for (std::size_t g = 0; g < W.groups(); ++g) {
            Tensor& w = W.at(t, g);
            for (std::size_t j = 0; j < K; ++j) {
                double norm2 = 0.0;
                for (std::size_t r = 0; r < p; ++r) norm2 += w.at(r, j) * w.at(r, j);
                const double norm = std::sqrt(norm2);
                if (norm <= threshold) {
                    for (std::size_t r = 0; r < p; ++r) w.at(r, j) = 0.0;
                } else {
                    const double factor = (norm - threshold) / norm;
                    for (std::size_t r = 0; r < p; ++r) w.at(r, j) *= factor;
                }
            }
        }
    }
}

std::size_t count_zero_columns(const LoadingMatrices& W) {
    std::size_t zeros = 0;
    for (std::size_t t = 0; t < W.timesteps(); ++t) {
        for (std::size_t g = 0; g < W.groups(); ++g) {
            const Tensor& w = W.at(t, g);
            for (std::size_t j = 0; j < W.latent_dim(); ++j) {
                bool all_zero = true;
                for (std::size_t r = 0; r < W.rows(); ++r) {
                    if (w.at(r, j) != 0.0) { all_zero = false; break; }
                }
                if (all_zero) ++zeros;
            }
        }
    }
    return zeros;
}

LossBreakdown train_epoch(DlgfaModel& model, const LongitudinalDataset& dataset,
                          const OptimConfig& config, AdamState& state, std::mt19937_64& rng,
                          std::uint64_t epoch, std::size_t max_batches) {
    config.validate();
    const std::size_t T = dataset.timesteps();
    const std::size_t K = model.config().K;
    std::vector<Tensor> batches =
        make_batches(dataset, config.batch_size, config.seed * 2654435761ULL + epoch + 1);
    if (max_batches > 0 && batches.size() > max_batches) batches.resize(max_batches);

    std::normal_distribution<double> stdnorm(0.0, 1.0);
    LossBreakdown mean{};
    for (const Tensor& batch : batches) {
        const std::size_t B = batch.shape()[1];
        Tensor noise = Tensor::zeros({T, B, K});
        for (double& v : noise.data()) v = stdnorm(rng);

        ElboGraph g = build_collapsed_elbo(model, batch, noise, config.lambda,
                                           config.theta_prior_weight);
        if (!std::isfinite(g.breakdown.objective)) {
            throw NumericError("training aborted: non-finite objective at epoch " +
                               std::to_string(epoch));
        }
        Tape::Var loss = g.tape.scale(g.smooth, -1.0);
        g.tape.backward(loss, model.params());
        adam_step(model.params(), state, config.lr_adam);

        for (std::size_t t = 0; t < g.seq.w_vars.size(); ++t) {
            for (std::size_t gi = 0; gi < g.seq.w_vars[t].size(); ++gi) {
                Tensor& w = model.loadings().at(t, gi);
                const Tensor& wg = g.tape.grad(g.seq.w_vars[t][gi]);
                for (std::size_t i = 0; i < w.size(); ++i) w[i] -= config.lr_prox * wg[i];
            }
        }
        prox_group_columns(model.loadings(), config.lr_prox * config.lambda);

        mean.recon_loglik += g.breakdown.recon_loglik;
        mean.kl += g.breakdown.kl;
        mean.penalty += g.breakdown.penalty;
    }
    const double nb = static_cast<double>(batches.size());
    if (nb > 0) {
        mean.recon_loglik /= nb;
        mean.kl /= nb;
        mean.penalty /= nb;
    }
    mean.objective = mean.recon_loglik - mean.kl - mean.penalty;
    return mean;
}

bool has_converged(const TrainHistory& history, double tol) {
    constexpr std::size_t kWindow = 10;
    const std::size_t n = history.epochs.size();
    if (n < kWindow + 1) return false;
    for (std::size_t i = n - kWindow; i < n; ++i) {
        const LossBreakdown& prev = history.epochs[i - 1];
        const LossBreakdown& cur = history.epochs[i];
        const double s_prev = prev.recon_loglik - prev.kl;
        const double s_cur = cur.recon_loglik - cur.kl;
        const double ds = std::abs(s_cur - s_prev) / (std::abs(s_prev) + 1e-12);
        const double dp = std::abs(cur.penalty - prev.penalty) / (std::abs(prev.penalty) + 1e-12);
        if (ds >= tol || dp >= tol) return false;
    }
    return true;
}

std::pair<DlgfaModel, TrainHistory> fit(const LongitudinalDataset& dataset,
                                        const ModelConfig& model_config,
                                        const OptimConfig& optim_config,
                                        const EpochCallback& on_epoch) {
    model_config.validate();
    optim_config.validate();
    DlgfaModel model = DlgfaModel::init(model_config, optim_config.seed);
    TrainHistory history;
    AdamState state;
    std::mt19937_64 rng(optim_config.seed ^ 0x9e3779b97f4a7c15ULL);

    std::size_t iterations = 0;
    for (std::size_t epoch = 0; epoch < optim_config.max_epochs; ++epoch) {
        std::size_t budget = 0;
        if (optim_config.max_iterations > 0) {
            if (iterations >= optim_config.max_iterations) break;
            budget = optim_config.max_iterations - iterations;
        }
        LossBreakdown bd = train_epoch(model, dataset, optim_config, state, rng, epoch, budget);
        iterations += (dataset.count() + optim_config.batch_size - 1) / optim_config.batch_size;
        if (budget > 0) iterations = std::min(iterations, optim_config.max_iterations);
        history.epochs.push_back(bd);
        history.zero_columns.push_back(count_zero_columns(model.loadings()));
        if (on_epoch) on_epoch(epoch, model, history);
        if (has_converged(history, optim_config.tol)) break;
    }
    return {std::move(model), std::move(history)};
}

}  // namespace dlgfa
