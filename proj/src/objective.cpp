#include "dlgfa/objective.hpp"

#include <cmath>

namespace dlgfa {

namespace {
const double kHalfLog2Pi = 0.5 * std::log(2.0 * M_PI);

void check_gaussian(const GaussianParams& p, const char* who) {
    if (!p.mean.same_shape(p.scale)) {
        throw DimensionError(std::string(who) + ": mean/scale shape mismatch");
    }
    for (double s : p.scale.data()) {
        if (!(s > 0.0)) throw ContractError(std::string(who) + ": scale must be strictly positive");
    }
}
}  // namespace

double kl_diag_gaussian(const GaussianParams& q, const GaussianParams& p) {
    check_gaussian(q, "kl_diag_gaussian");
    check_gaussian(p, "kl_diag_gaussian");
    if (!q.mean.same_shape(p.mean)) throw DimensionError("kl_diag_gaussian: q/p shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < q.mean.size(); ++i) {
        const double mq = q.mean[i], sq = q.scale[i];
        const double mp = p.mean[i], sp = p.scale[i];
        acc += std::log(sp / sq) + (sq * sq + (mq - mp) * (mq - mp)) / (2.0 * sp * sp) - 0.5;
    }
    return acc;
}

double logpdf_diag_gaussian(const Tensor& x, const GaussianParams& p) {
    check_gaussian(p, "logpdf_diag_gaussian");
    if (!x.same_shape(p.mean)) throw DimensionError("logpdf_diag_gaussian: x/mean shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = (x[i] - p.mean[i]) / p.scale[i];
        acc += -kHalfLog2Pi - std::log(p.scale[i]) - 0.5 * r * r;
    }
    return acc;
}

double group_lasso_penalty(const LoadingMatrices& W, double lambda) {
    if (lambda < 0.0) throw ContractError("group_lasso_penalty: lambda must be >= 0");
    double acc = 0.0;
    for (std::size_t t = 0; t < W.timesteps(); ++t) {
        for (std::size_t g = 0; g < W.groups(); ++g) {
            for (std::size_t j = 0; j < W.latent_dim(); ++j) {
                acc += W.column_norm(t, g, j);
            }
        }
    }
    return lambda * acc;
}

Tape::Var kl_diag_gaussian(Tape& tape, const GaussianVars& q, const GaussianVars& p) {
    // log(sp/sq) + (sq^2 + (mq-mp)^2) / (2 sp^2) - 1/2, summed
    Tape::Var log_ratio = tape.sub(p.log_scale, q.log_scale);
    Tape::Var dm = tape.sub(q.mean, p.mean);
    Tape::Var num = tape.add(tape.mul(q.scale, q.scale), tape.mul(dm, dm));
    Tape::Var den = tape.scale(tape.mul(p.scale, p.scale), 2.0);
    Tape::Var elem = tape.add_const(tape.add(log_ratio, tape.div(num, den)), -0.5);
    return tape.sum_all(elem);
}

Tape::Var logpdf_diag_gaussian(Tape& tape, Tape::Var x, const GaussianVars& p) {
    Tape::Var r = tape.div(tape.sub(x, p.mean), p.scale);
    Tape::Var quad = tape.scale(tape.mul(r, r), -0.5);
    Tape::Var elem = tape.add_const(tape.sub(quad, p.log_scale), -kHalfLog2Pi);
    return tape.sum_all(elem);
}

ElboGraph build_collapsed_elbo(const DlgfaModel& model, const Tensor& batch, const Tensor& noise,
                               double lambda, double theta_prior_weight) {
    ElboGraph g;
    Tape& tape = g.tape;
    g.seq = model.forward_sequence(tape, batch, noise);

    const std::size_t T = g.seq.steps.size();
    Tape::Var recon = -1, kl = -1;
    for (std::size_t t = 0; t < T; ++t) {
        const StepVars& step = g.seq.steps[t];
        Tape::Var step_kl = kl_diag_gaussian(tape, step.posterior, step.prior);
        kl = (kl < 0) ? step_kl : tape.add(kl, step_kl);
        const auto& spec = model.config().group_spec;
        Tensor x_t = slice_timestep(batch, t);
        const std::size_t B = x_t.rows();
        for (std::size_t gi = 0; gi < spec.group_count(); ++gi) {
            // group slice of x_t
            const std::size_t off = spec.offset(gi), dg = spec.dims[gi];
            Tensor xg = Tensor::zeros({B, dg});
            for (std::size_t r = 0; r < B; ++r) {
                for (std::size_t c = 0; c < dg; ++c) xg.at(r, c) = x_t.at(r, off + c);
            }
            Tape::Var lp = logpdf_diag_gaussian(tape, tape.leaf(std::move(xg)), step.likelihood[gi]);
            recon = (recon < 0) ? lp : tape.add(recon, lp);
        }
    }
    g.recon = recon;
    g.kl = kl;
    g.smooth = tape.sub(recon, kl);
    if (theta_prior_weight > 0.0) {
        Tape::Var ridge = -1;
        for (const auto& name : model.params().names()) {
            Tape::Var p = tape.param(model.params(), name);
            Tape::Var s = tape.sum_all(tape.mul(p, p));
            ridge = (ridge < 0) ? s : tape.add(ridge, s);
        }
        g.smooth = tape.sub(g.smooth, tape.scale(ridge, 0.5 * theta_prior_weight));
    }

    g.breakdown.recon_loglik = tape.value(recon)[0];
    g.breakdown.kl = tape.value(kl)[0];
    g.breakdown.penalty = group_lasso_penalty(model.loadings(), lambda);
    g.breakdown.objective = g.breakdown.recon_loglik - g.breakdown.kl - g.breakdown.penalty;
    return g;
}

LossBreakdown collapsed_elbo(const DlgfaModel& model, const Tensor& batch, const Tensor& noise,
                             double lambda, double theta_prior_weight) {
    return build_collapsed_elbo(model, batch, noise, lambda, theta_prior_weight).breakdown;
}

}  // namespace dlgfa
