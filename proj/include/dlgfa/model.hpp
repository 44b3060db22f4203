#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlgfa/autodiff.hpp"
#include "dlgfa/tensor.hpp"

namespace dlgfa {

// Partition of the observed feature vector into G named views.
struct GroupSpec {
    std::vector<std::size_t> dims;
    std::vector<std::string> names;

    std::size_t group_count() const { return dims.size(); }
    std::size_t total_dim() const;
    std::size_t offset(std::size_t g) const;
    void validate() const;

    static GroupSpec uniform(std::size_t groups, std::size_t dim_each, const std::string& prefix = "g");
};

struct ModelConfig {
    std::size_t K = 8;   // latent dimension
    std::size_t H = 16;  // recurrent state dimension
    std::size_t p = 1;   // rows of each loading matrix
    std::size_t T = 8;   // maximum sequence length
    GroupSpec group_spec;
    bool static_mode = false;          // drop the recurrence entirely
    std::size_t x_feat = 0;            // width of the x feature extractor (0: use d)
    std::size_t z_feat = 0;            // width of the z feature extractor (0: use K)
    std::size_t z_feat_hidden = 0;     // hidden width of the z extractor MLP (0: use K)
    std::size_t enc_hidden = 0;        // relu hidden width for encoder/prior (0: linear heads)
    bool decoders_per_timestep = false;

    std::size_t d() const { return group_spec.total_dim(); }
    std::size_t x_feat_eff() const { return x_feat ? x_feat : d(); }
    std::size_t z_feat_eff() const { return z_feat ? z_feat : K; }
    std::size_t z_hidden_eff() const { return z_feat_hidden ? z_feat_hidden : K; }
    void validate() const;
};

// Diagonal Gaussian as (mean, scale) tensors; scale is sigma, not variance.
struct GaussianParams {
    Tensor mean;
    Tensor scale;
};

// T x G grid of p x K latent-to-group maps. Zeroed columns are stored as
// literal 0.0.
class LoadingMatrices {
public:
    LoadingMatrices() = default;
    LoadingMatrices(std::size_t T, std::size_t G, std::size_t p, std::size_t K);

    Tensor& at(std::size_t t, std::size_t g);
    const Tensor& at(std::size_t t, std::size_t g) const;
    std::size_t timesteps() const { return T_; }
    std::size_t groups() const { return G_; }
    std::size_t rows() const { return p_; }
    std::size_t latent_dim() const { return K_; }

    double column_norm(std::size_t t, std::size_t g, std::size_t j) const;

private:
    std::size_t T_ = 0, G_ = 0, p_ = 0, K_ = 0;
    std::vector<Tensor> w_;
};

// Gaussian head variables on a tape (mean, log sigma, sigma).
struct GaussianVars {
    Tape::Var mean;
    Tape::Var log_scale;
    Tape::Var scale;
};

struct StepVars {
    GaussianVars prior;
    GaussianVars posterior;
    Tape::Var z;
    std::vector<GaussianVars> likelihood;  // per group, B x d_g
    Tape::Var h;
};

struct SequenceGraph {
    std::vector<StepVars> steps;
    std::vector<std::vector<Tape::Var>> w_vars;  // [t][g] loading leaves
};

class DlgfaModel {
public:
    DlgfaModel() = default;
    // Networks: scaled-normal weights, zero biases; loadings N(0, 0.01^2).
    static DlgfaModel init(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    LoadingMatrices& loadings() { return loadings_; }
    const LoadingMatrices& loadings() const { return loadings_; }

    // --- graph builders; x/h/z are row-batch matrices on the tape ---
    Tape::Var feature_extract_x(Tape& tape, Tape::Var x) const;
    Tape::Var feature_extract_z(Tape& tape, Tape::Var z) const;
    GaussianVars prior_params(Tape& tape, Tape::Var h_prev) const;
    // Encoder input is [feature_extract_x(x); h_prev]; with static_mode the
    // hidden state is replaced by zeros so the output ignores h_prev.
    GaussianVars encode(Tape& tape, Tape::Var x, Tape::Var h_prev) const;
    static Tape::Var reparameterize(Tape& tape, const GaussianVars& q, Tape::Var noise);
    // Returns the likelihood head and the loading-matrix leaf used for it.
    std::pair<GaussianVars, Tape::Var> decode_group(Tape& tape, std::size_t g, std::size_t t,
                                                    Tape::Var z, Tape::Var h_prev) const;
    Tape::Var recurrence_step(Tape& tape, Tape::Var x, Tape::Var z, Tape::Var h_prev) const;

    // Runs the full per-timestep loop on batch (T x B x d) with noise
    // (T x B x K), h_0 = 0.
    SequenceGraph forward_sequence(Tape& tape, const Tensor& batch, const Tensor& noise) const;

    std::string decoder_prefix(std::size_t t, std::size_t g) const;

private:
    GaussianVars gaussian_head(Tape& tape, Tape::Var input, const std::string& prefix) const;

    ModelConfig config_;
    ParamStore params_;
    LoadingMatrices loadings_;
};

// Slice timestep t out of a T x B x d tensor as a B x d matrix.
Tensor slice_timestep(const Tensor& batch, std::size_t t);

}  // namespace dlgfa
