#pragma once

#include "dlgfa/model.hpp"

namespace dlgfa {

// Terms of the collapsed bound, in nats per batch.
struct LossBreakdown {
    double recon_loglik = 0.0;
    double kl = 0.0;
    double penalty = 0.0;
    double objective = 0.0;  // recon_loglik - kl - penalty
};

// --- plain-tensor forms ---
double kl_diag_gaussian(const GaussianParams& q, const GaussianParams& p);
double logpdf_diag_gaussian(const Tensor& x, const GaussianParams& p);
double group_lasso_penalty(const LoadingMatrices& W, double lambda);

// --- tape forms (summed over batch rows and dimensions) ---
Tape::Var kl_diag_gaussian(Tape& tape, const GaussianVars& q, const GaussianVars& p);
Tape::Var logpdf_diag_gaussian(Tape& tape, Tape::Var x, const GaussianVars& p);

struct ElboGraph {
    Tape tape;
    SequenceGraph seq;
    Tape::Var recon = -1;
    Tape::Var kl = -1;
    // recon - kl (minus the optional quadratic network prior); the group-lasso
    // penalty is excluded here and handled by the proximal update.
    Tape::Var smooth = -1;
    LossBreakdown breakdown;
};

// Single-sample estimate of the collapsed bound on one T x B x d batch.
// theta_prior_weight > 0 adds -w/2 * sum ||params||^2 to the smooth part.
ElboGraph build_collapsed_elbo(const DlgfaModel& model, const Tensor& batch, const Tensor& noise,
                               double lambda, double theta_prior_weight = 0.0);

LossBreakdown collapsed_elbo(const DlgfaModel& model, const Tensor& batch, const Tensor& noise,
                             double lambda, double theta_prior_weight = 0.0);

}  // namespace dlgfa
