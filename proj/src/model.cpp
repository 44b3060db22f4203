#include "dlgfa/model.hpp"

#include <cmath>
#include <random>

namespace dlgfa {

std::size_t GroupSpec::total_dim() const {
    std::size_t d = 0;
    for (std::size_t dg : dims) d += dg;
    return d;
}

std::size_t GroupSpec::offset(std::size_t g) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < g; ++i) off += dims[i];
    return off;
}

void GroupSpec::validate() const {
    if (dims.empty()) throw ContractError("group spec: need at least one group");
    if (names.size() != dims.size()) throw ContractError("group spec: names/dims length mismatch");
    for (std::size_t dg : dims) {
        if (dg == 0) throw ContractError("group spec: group dimension must be >= 1");
    }
}

GroupSpec GroupSpec::uniform(std::size_t groups, std::size_t dim_each, const std::string& prefix) {
    GroupSpec spec;
    for (std::size_t g = 0; g < groups; ++g) {
        spec.dims.push_back(dim_each);
        spec.names.push_back(prefix + std::to_string(g));
    }
    return spec;
}

void ModelConfig::validate() const {
    group_spec.validate();
    if (K == 0 || H == 0 || p == 0 || T == 0) {
        throw ContractError("model config: K, H, p, T must all be >= 1");
    }
}

LoadingMatrices::LoadingMatrices(std::size_t T, std::size_t G, std::size_t p, std::size_t K)
    : T_(T), G_(G), p_(p), K_(K) {
    w_.reserve(T * G);
    for (std::size_t i = 0; i < T * G; ++i) w_.push_back(Tensor::zeros({p, K}));
}

Tensor& LoadingMatrices::at(std::size_t t, std::size_t g) {
    if (t >= T_ || g >= G_) throw ContractError("loading matrix index out of range");
    return w_[t * G_ + g];
}

const Tensor& LoadingMatrices::at(std::size_t t, std::size_t g) const {
    if (t >= T_ || g >= G_) throw ContractError("loading matrix index out of range");
    return w_[t * G_ + g];
}

double LoadingMatrices::column_norm(std::size_t t, std::size_t g, std::size_t j) const {
    const Tensor& w = at(t, g);
    double acc = 0.0;
    for (std::size_t r = 0; r < p_; ++r) {
        const double v = w.at(r, j);
        acc += v * v;
    }
    return std::sqrt(acc);
}

namespace {

Tensor random_weight(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(cols)));
    Tensor w = Tensor::zeros({rows, cols});
    for (double& v : w.data()) v = dist(rng);
    return w;
}

void add_affine(ParamStore& ps, const std::string& prefix, std::size_t out, std::size_t in,
                std::mt19937_64& rng) {
    ps.add(prefix + "/W", random_weight(out, in, rng));
    ps.add(prefix + "/b", Tensor::zeros({1, out}));
}

}  // namespace

std::string DlgfaModel::decoder_prefix(std::size_t t, std::size_t g) const {
    if (config_.decoders_per_timestep) {
        return "dec/t" + std::to_string(t) + "/g" + std::to_string(g);
    }
    return "dec/g" + std::to_string(g);
}

DlgfaModel DlgfaModel::init(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    DlgfaModel m;
    m.config_ = config;
    std::mt19937_64 rng(seed);

    const std::size_t d = config.d();
    const std::size_t K = config.K, H = config.H;
    const std::size_t xf = config.x_feat_eff();
    const std::size_t zf = config.z_feat_eff();
    const std::size_t zh = config.z_hidden_eff();
    const std::size_t G = config.group_spec.group_count();

    ParamStore& ps = m.params_;
    add_affine(ps, "phi_x", xf, d, rng);
    add_affine(ps, "phi_z/l1", zh, K, rng);
    add_affine(ps, "phi_z/l2", zf, zh, rng);

    auto add_head = [&](const std::string& prefix, std::size_t in) {
        if (config.enc_hidden) {
            add_affine(ps, prefix + "/hid", config.enc_hidden, in, rng);
            in = config.enc_hidden;
        }
        add_affine(ps, prefix + "/mu", K, in, rng);
        add_affine(ps, prefix + "/ls", K, in, rng);
    };
    add_head("prior", H);
    add_head("enc", xf + H);

    const std::size_t gru_in = xf + zf + H;
    add_affine(ps, "gru/r", H, gru_in, rng);
    add_affine(ps, "gru/u", H, gru_in, rng);
    add_affine(ps, "gru/c", H, gru_in, rng);

    const std::size_t dec_t = config.decoders_per_timestep ? config.T : 1;
    for (std::size_t t = 0; t < dec_t; ++t) {
        for (std::size_t g = 0; g < G; ++g) {
            const std::string prefix = m.decoder_prefix(t, g);
            const std::size_t dg = config.group_spec.dims[g];
            add_affine(ps, prefix, dg, config.p + H, rng);
            ps.add(prefix + "/bls", Tensor::zeros({1, dg}));
        }
    }

    m.loadings_ = LoadingMatrices(config.T, G, config.p, K);
    std::normal_distribution<double> wdist(0.0, 0.01);
    for (std::size_t t = 0; t < config.T; ++t) {
        for (std::size_t g = 0; g < G; ++g) {
            for (double& v : m.loadings_.at(t, g).data()) v = wdist(rng);
        }
    }
    return m;
}

Tape::Var DlgfaModel::feature_extract_x(Tape& tape, Tape::Var x) const {
    if (tape.value(x).cols() != config_.d()) {
        throw DimensionError("feature_extract_x: expected width " + std::to_string(config_.d()));
    }
    return tape.affine(x, tape.param(params_, "phi_x/W"), tape.param(params_, "phi_x/b"));
}

Tape::Var DlgfaModel::feature_extract_z(Tape& tape, Tape::Var z) const {
    if (tape.value(z).cols() != config_.K) {
        throw DimensionError("feature_extract_z: expected width " + std::to_string(config_.K));
    }
    Tape::Var hid = tape.relu(
        tape.affine(z, tape.param(params_, "phi_z/l1/W"), tape.param(params_, "phi_z/l1/b")));
    return tape.affine(hid, tape.param(params_, "phi_z/l2/W"), tape.param(params_, "phi_z/l2/b"));
}

GaussianVars DlgfaModel::gaussian_head(Tape& tape, Tape::Var input, const std::string& prefix) const {
    Tape::Var feats = input;
    if (config_.enc_hidden) {
        feats = tape.relu(tape.affine(feats, tape.param(params_, prefix + "/hid/W"),
                                      tape.param(params_, prefix + "/hid/b")));
    }
    GaussianVars out;
    out.mean = tape.affine(feats, tape.param(params_, prefix + "/mu/W"),
                           tape.param(params_, prefix + "/mu/b"));
    out.log_scale = tape.affine(feats, tape.param(params_, prefix + "/ls/W"),
                                tape.param(params_, prefix + "/ls/b"));
    out.scale = tape.exp(out.log_scale);
    return out;
}

GaussianVars DlgfaModel::prior_params(Tape& tape, Tape::Var h_prev) const {
    if (tape.value(h_prev).cols() != config_.H) {
        throw DimensionError("prior_params: expected width " + std::to_string(config_.H));
    }
    return gaussian_head(tape, h_prev, "prior");
}

GaussianVars DlgfaModel::encode(Tape& tape, Tape::Var x, Tape::Var h_prev) const {
    Tape::Var feats = feature_extract_x(tape, x);
    Tape::Var h = h_prev;
    if (config_.static_mode) {
        h = tape.leaf(Tensor::zeros({tape.value(x).rows(), config_.H}));
    } else if (tape.value(h_prev).cols() != config_.H) {
        throw DimensionError("encode: hidden state width mismatch");
    }
    return gaussian_head(tape, tape.concat_cols(feats, h), "enc");
}

Tape::Var DlgfaModel::reparameterize(Tape& tape, const GaussianVars& q, Tape::Var noise) {
    if (!tape.value(noise).same_shape(tape.value(q.mean))) {
        throw DimensionError("reparameterize: noise shape must match mean");
    }
    return tape.add(q.mean, tape.mul(q.scale, noise));
}

std::pair<GaussianVars, Tape::Var> DlgfaModel::decode_group(Tape& tape, std::size_t g, std::size_t t,
                                                            Tape::Var z, Tape::Var h_prev) const {
    const std::size_t G = config_.group_spec.group_count();
    if (g >= G || t >= config_.T) throw ContractError("decode_group: index out of range");
    const std::size_t B = tape.value(z).rows();

    Tape::Var w = tape.leaf(loadings_.at(t, g));
    Tape::Var u = tape.matmul_nt(z, w);  // B x p
    Tape::Var h = h_prev;
    if (config_.static_mode) h = tape.leaf(Tensor::zeros({B, config_.H}));
    Tape::Var pre = tape.tanh(tape.concat_cols(u, h));

    const std::string prefix = decoder_prefix(t, g);
    GaussianVars out;
    out.mean = tape.affine(pre, tape.param(params_, prefix + "/W"), tape.param(params_, prefix + "/b"));
    out.log_scale = tape.broadcast_rows(tape.param(params_, prefix + "/bls"), B);
    out.scale = tape.exp(out.log_scale);
    return {out, w};
}

Tape::Var DlgfaModel::recurrence_step(Tape& tape, Tape::Var x, Tape::Var z, Tape::Var h_prev) const {
    const std::size_t B = tape.value(x).rows();
    if (config_.static_mode) return tape.leaf(Tensor::zeros({B, config_.H}));

    Tape::Var fx = feature_extract_x(tape, x);
    Tape::Var fz = feature_extract_z(tape, z);
    Tape::Var in = tape.concat_cols(tape.concat_cols(fx, fz), h_prev);
    Tape::Var r = tape.sigmoid(
        tape.affine(in, tape.param(params_, "gru/r/W"), tape.param(params_, "gru/r/b")));
    Tape::Var u = tape.sigmoid(
        tape.affine(in, tape.param(params_, "gru/u/W"), tape.param(params_, "gru/u/b")));
    Tape::Var gated = tape.concat_cols(tape.concat_cols(fx, fz), tape.mul(r, h_prev));
    Tape::Var cand = tape.tanh(
        tape.affine(gated, tape.param(params_, "gru/c/W"), tape.param(params_, "gru/c/b")));
    // h' = (1 - u) h + u c
    Tape::Var keep = tape.mul(tape.add_const(tape.scale(u, -1.0), 1.0), h_prev);
    return tape.add(keep, tape.mul(u, cand));
}

Tensor slice_timestep(const Tensor& batch, std::size_t t) {
    if (batch.shape().size() != 3) throw DimensionError("expected T x B x d tensor");
    const std::size_t T = batch.shape()[0], B = batch.shape()[1], d = batch.shape()[2];
    if (t >= T) throw DimensionError("timestep out of range");
    Tensor out = Tensor::zeros({B, d});
    std::copy(batch.data().begin() + t * B * d, batch.data().begin() + (t + 1) * B * d,
              out.data().begin());
    return out;
}

SequenceGraph DlgfaModel::forward_sequence(Tape& tape, const Tensor& batch, const Tensor& noise) const {
    if (batch.shape().size() != 3 || noise.shape().size() != 3) {
        throw DimensionError("forward_sequence: batch and noise must be rank 3");
    }
    const std::size_t T = batch.shape()[0], B = batch.shape()[1], d = batch.shape()[2];
    if (T > config_.T) {
        throw DimensionError("sequence length " + std::to_string(T) + " exceeds model T=" +
                             std::to_string(config_.T));
    }
    if (d != config_.d()) throw DimensionError("forward_sequence: feature width mismatch");
    if (noise.shape()[0] != T || noise.shape()[1] != B || noise.shape()[2] != config_.K) {
        throw DimensionError("forward_sequence: noise must be T x B x K");
    }
    const std::size_t G = config_.group_spec.group_count();

    SequenceGraph out;
    Tape::Var h = tape.leaf(Tensor::zeros({B, config_.H}));
    for (std::size_t t = 0; t < T; ++t) {
        StepVars step;
        Tape::Var x = tape.leaf(slice_timestep(batch, t));
        Tape::Var eps = tape.leaf(slice_timestep(noise, t));
        step.prior = prior_params(tape, h);
        step.posterior = encode(tape, x, h);
        step.z = reparameterize(tape, step.posterior, eps);
        std::vector<Tape::Var> ws;
        for (std::size_t g = 0; g < G; ++g) {
            auto [lik, w] = decode_group(tape, g, t, step.z, h);
            step.likelihood.push_back(lik);
            ws.push_back(w);
        }
        h = recurrence_step(tape, x, step.z, h);
        step.h = h;
        out.steps.push_back(std::move(step));
        out.w_vars.push_back(std::move(ws));
    }
    return out;
}

}  // namespace dlgfa
