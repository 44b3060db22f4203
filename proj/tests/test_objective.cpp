#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "dlgfa/objective.hpp"

using namespace dlgfa;

namespace {

GaussianParams gauss(std::vector<double> mean, std::vector<double> scale) {
    GaussianParams p;
    p.mean = Tensor::vec(std::move(mean));
    p.scale = Tensor::vec(std::move(scale));
    return p;
}

// Deterministic varied fill so hand-set parameters are asymmetric.
void fill(Tensor& t, double phase) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = 0.4 * std::sin(1.7 * static_cast<double>(i) + phase);
    }
}

using Vec = std::vector<double>;

// y = W x + b with W row-major out x in.
Vec affine_ref(const Vec& x, const Tensor& w, const Tensor& b) {
    Vec y(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) {
        double acc = b[i];
        for (std::size_t j = 0; j < w.cols(); ++j) acc += w.at(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

Vec concat(const Vec& a, const Vec& b) {
    Vec out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

// Plain-loop reimplementation of the whole bound for B = 1 sequences; used as
// the independent oracle against the tape-built version.
LossBreakdown reference_elbo(const DlgfaModel& m, const Tensor& batch, const Tensor& noise,
                             double lambda) {
    const ParamStore& ps = m.params();
    const ModelConfig& cfg = m.config();
    const std::size_t T = batch.shape()[0], d = batch.shape()[2], K = cfg.K, H = cfg.H;
    const double half_log_2pi = 0.5 * std::log(2.0 * M_PI);
    auto net = [&](const Vec& x, const std::string& prefix) {
        return affine_ref(x, ps.param(prefix + "/W"), ps.param(prefix + "/b"));
    };

    double recon = 0.0, kl = 0.0;
    Vec h(H, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        Vec x(batch.data().begin() + t * d, batch.data().begin() + (t + 1) * d);
        Vec eps(noise.data().begin() + t * K, noise.data().begin() + (t + 1) * K);

        Vec mu_p = net(h, "prior/mu"), ls_p = net(h, "prior/ls");
        Vec fx = net(x, "phi_x");
        Vec enc_in = concat(fx, h);
        Vec mu_q = net(enc_in, "enc/mu"), ls_q = net(enc_in, "enc/ls");
        Vec z(K);
        for (std::size_t j = 0; j < K; ++j) {
            const double sq = std::exp(ls_q[j]), sp = std::exp(ls_p[j]);
            z[j] = mu_q[j] + sq * eps[j];
            kl += (ls_p[j] - ls_q[j]) +
                  (sq * sq + (mu_q[j] - mu_p[j]) * (mu_q[j] - mu_p[j])) / (2.0 * sp * sp) - 0.5;
        }

        for (std::size_t g = 0; g < cfg.group_spec.group_count(); ++g) {
            const Tensor& w = m.loadings().at(t, g);
            Vec u(cfg.p);
            for (std::size_t r = 0; r < cfg.p; ++r) {
                double acc = 0.0;
                for (std::size_t j = 0; j < K; ++j) acc += w.at(r, j) * z[j];
                u[r] = acc;
            }
            Vec pre = concat(u, h);
            for (double& v : pre) v = std::tanh(v);
            const std::string prefix = m.decoder_prefix(t, g);
            Vec mean = net(pre, prefix);
            const Tensor& bls = ps.param(prefix + "/bls");
            const std::size_t off = cfg.group_spec.offset(g);
            for (std::size_t c = 0; c < cfg.group_spec.dims[g]; ++c) {
                const double s = std::exp(bls[c]);
                const double r = (x[off + c] - mean[c]) / s;
                recon += -half_log_2pi - bls[c] - 0.5 * r * r;
            }
        }

        Vec hid = net(z, "phi_z/l1");
        for (double& v : hid) v = std::max(v, 0.0);
        Vec fz = net(hid, "phi_z/l2");
        Vec in = concat(concat(fx, fz), h);
        Vec r = net(in, "gru/r"), ug = net(in, "gru/u");
        for (double& v : r) v = 1.0 / (1.0 + std::exp(-v));
        for (double& v : ug) v = 1.0 / (1.0 + std::exp(-v));
        Vec rh(H);
        for (std::size_t i = 0; i < H; ++i) rh[i] = r[i] * h[i];
        Vec cand = net(concat(concat(fx, fz), rh), "gru/c");
        for (double& v : cand) v = std::tanh(v);
        for (std::size_t i = 0; i < H; ++i) h[i] = (1.0 - ug[i]) * h[i] + ug[i] * cand[i];
    }

    double pen = 0.0;
    for (std::size_t t = 0; t < m.loadings().timesteps(); ++t) {
        for (std::size_t g = 0; g < m.loadings().groups(); ++g) {
            for (std::size_t j = 0; j < K; ++j) pen += m.loadings().column_norm(t, g, j);
        }
    }
    LossBreakdown out;
    out.recon_loglik = recon;
    out.kl = kl;
    out.penalty = lambda * pen;
    out.objective = recon - kl - out.penalty;
    return out;
}

DlgfaModel toy_model() {
    ModelConfig cfg;
    cfg.K = 2;
    cfg.H = 2;
    cfg.p = 1;
    cfg.T = 2;
    cfg.group_spec.dims = {1, 2};
    cfg.group_spec.names = {"a", "b"};
    DlgfaModel m = DlgfaModel::init(cfg, 1);
    double phase = 0.0;
    for (const auto& name : m.params().names()) {
        fill(m.params().param(name), phase);
        phase += 0.9;
    }
    for (std::size_t t = 0; t < 2; ++t) {
        for (std::size_t g = 0; g < 2; ++g) {
            fill(m.loadings().at(t, g), phase);
            phase += 0.9;
        }
    }
    return m;
}

}  // namespace

TEST_CASE("kl of identical gaussians is zero") {
    GaussianParams q = gauss({0.3, -1.2}, {0.7, 2.0});
    CHECK(kl_diag_gaussian(q, q) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("kl unit-variance mean shift") {
    // KL(N(0,1) || N(1,1)) = 1/2
    CHECK(kl_diag_gaussian(gauss({0}, {1}), gauss({1}, {1})) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("kl matches numerical quadrature") {
    const double mq = 0.3, sq = 0.8, mp = -0.5, sp = 1.3;
    auto logpdf = [](double x, double m, double s) {
        const double r = (x - m) / s;
        return -0.5 * std::log(2.0 * M_PI) - std::log(s) - 0.5 * r * r;
    };
    double quad = 0.0;
    const double lo = -12.0, hi = 12.0;
    const std::size_t n = 400000;
    const double hstep = (hi - lo) / static_cast<double>(n);
    for (std::size_t i = 0; i <= n; ++i) {
        const double x = lo + hstep * static_cast<double>(i);
        const double lq = logpdf(x, mq, sq);
        const double wgt = (i == 0 || i == n) ? 0.5 : 1.0;
        quad += wgt * std::exp(lq) * (lq - logpdf(x, mp, sp));
    }
    quad *= hstep;
    CHECK(kl_diag_gaussian(gauss({mq}, {sq}), gauss({mp}, {sp})) ==
          doctest::Approx(quad).epsilon(1e-8));
}

TEST_CASE("kl additivity across dimensions") {
    const double k1 = kl_diag_gaussian(gauss({0.2}, {0.5}), gauss({-0.1}, {1.1}));
    const double k2 = kl_diag_gaussian(gauss({1.5}, {2.0}), gauss({0.0}, {0.3}));
    const double both = kl_diag_gaussian(gauss({0.2, 1.5}, {0.5, 2.0}), gauss({-0.1, 0.0}, {1.1, 0.3}));
    CHECK(both == doctest::Approx(k1 + k2).epsilon(1e-13));
}

TEST_CASE("kl input validation") {
    CHECK_THROWS_AS(kl_diag_gaussian(gauss({0}, {0.0}), gauss({0}, {1})), ContractError);
    CHECK_THROWS_AS(kl_diag_gaussian(gauss({0, 0}, {1, 1}), gauss({0}, {1})), DimensionError);
}

TEST_CASE("logpdf at the mean of a standard gaussian") {
    const double v = logpdf_diag_gaussian(Tensor::vec({0.0}), gauss({0}, {1}));
    CHECK(v == doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-13));
}

TEST_CASE("logpdf hand value") {
    // N(1, 2^2) at x = 3: -log(2) - 0.5 log(2 pi) - 0.5
    const double v = logpdf_diag_gaussian(Tensor::vec({3.0}), gauss({1}, {2}));
    CHECK(v == doctest::Approx(-std::log(2.0) - 0.5 * std::log(2.0 * M_PI) - 0.5).epsilon(1e-13));
}

TEST_CASE("tape kl and logpdf match the plain forms") {
    GaussianParams q = gauss({0.4, -0.3, 1.0}, {0.6, 1.4, 0.9});
    GaussianParams p = gauss({-0.2, 0.5, 0.0}, {1.2, 0.8, 2.1});
    const Tensor x = Tensor::vec({0.1, -1.0, 2.0});

    Tape tape;
    auto lift = [&](const GaussianParams& gp) {
        GaussianVars v;
        v.mean = tape.leaf(gp.mean);
        Tensor ls = gp.scale;
        for (double& s : ls.data()) s = std::log(s);
        v.log_scale = tape.leaf(ls);
        v.scale = tape.exp(v.log_scale);
        return v;
    };
    GaussianVars qv = lift(q), pv = lift(p);
    CHECK(tape.value(kl_diag_gaussian(tape, qv, pv))[0] ==
          doctest::Approx(kl_diag_gaussian(q, p)).epsilon(1e-12));
    CHECK(tape.value(logpdf_diag_gaussian(tape, tape.leaf(x), pv))[0] ==
          doctest::Approx(logpdf_diag_gaussian(x, p)).epsilon(1e-12));
}

TEST_CASE("group lasso penalty hand value and homogeneity") {
    LoadingMatrices W(1, 2, 2, 2);
    W.at(0, 0) = Tensor::matrix(2, 2, {3, 0, 4, 0});   // column norms 5, 0
    W.at(0, 1) = Tensor::matrix(2, 2, {1, 2, 0, 0});   // column norms 1, 2
    CHECK(group_lasso_penalty(W, 1.0) == doctest::Approx(8.0).epsilon(1e-13));
    CHECK(group_lasso_penalty(W, 2.5) == doctest::Approx(20.0).epsilon(1e-13));
    CHECK(group_lasso_penalty(W, 0.0) == 0.0);
    CHECK_THROWS_AS(group_lasso_penalty(W, -1.0), ContractError);
}

TEST_CASE("collapsed bound matches independent term-by-term oracle") {
    DlgfaModel m = toy_model();
    Tensor batch = Tensor::zeros({2, 1, 3});
    batch.data() = {0.9, -0.3, 0.5, 0.1, 1.2, -0.7};
    Tensor noise = Tensor::zeros({2, 1, 2});
    noise.data() = {0.5, -1.1, 0.2, 0.8};
    const double lambda = 5.0;

    LossBreakdown got = collapsed_elbo(m, batch, noise, lambda);
    LossBreakdown want = reference_elbo(m, batch, noise, lambda);
    CHECK(got.recon_loglik == doctest::Approx(want.recon_loglik).epsilon(1e-10));
    CHECK(got.kl == doctest::Approx(want.kl).epsilon(1e-10));
    CHECK(got.penalty == doctest::Approx(want.penalty).epsilon(1e-10));
    CHECK(got.objective == doctest::Approx(want.objective).epsilon(1e-10));
}

TEST_CASE("collapsed bound oracle agrees for 20 random inputs") {
    DlgfaModel m = toy_model();
    std::mt19937_64 rng(42);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        Tensor batch = Tensor::zeros({2, 1, 3});
        Tensor noise = Tensor::zeros({2, 1, 2});
        for (double& v : batch.data()) v = dist(rng);
        for (double& v : noise.data()) v = dist(rng);
        LossBreakdown got = collapsed_elbo(m, batch, noise, 1.7);
        LossBreakdown want = reference_elbo(m, batch, noise, 1.7);
        CAPTURE(rep);
        CHECK(got.objective == doctest::Approx(want.objective).epsilon(1e-10));
    }
}

TEST_CASE("batch bound is the sum over its sequences") {
    DlgfaModel m = toy_model();
    std::mt19937_64 rng(3);
    std::normal_distribution<double> dist(0.0, 1.0);
    const std::size_t B = 3;
    Tensor batch = Tensor::zeros({2, B, 3});
    Tensor noise = Tensor::zeros({2, B, 2});
    for (double& v : batch.data()) v = dist(rng);
    for (double& v : noise.data()) v = dist(rng);

    LossBreakdown whole = collapsed_elbo(m, batch, noise, 0.0);
    double recon = 0.0, kl = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        Tensor sb = Tensor::zeros({2, 1, 3});
        Tensor sn = Tensor::zeros({2, 1, 2});
        for (std::size_t t = 0; t < 2; ++t) {
            for (std::size_t c = 0; c < 3; ++c) sb.data()[t * 3 + c] = batch.data()[(t * B + b) * 3 + c];
            for (std::size_t c = 0; c < 2; ++c) sn.data()[t * 2 + c] = noise.data()[(t * B + b) * 2 + c];
        }
        LossBreakdown one = collapsed_elbo(m, sb, sn, 0.0);
        recon += one.recon_loglik;
        kl += one.kl;
    }
    CHECK(whole.recon_loglik == doctest::Approx(recon).epsilon(1e-10));
    CHECK(whole.kl == doctest::Approx(kl).epsilon(1e-10));
}

TEST_CASE("smooth part gradient passes the finite difference oracle") {
    DlgfaModel m = toy_model();
    Tensor batch = Tensor::zeros({2, 1, 3});
    batch.data() = {0.9, -0.3, 0.5, 0.1, 1.2, -0.7};
    Tensor noise = Tensor::zeros({2, 1, 2});
    noise.data() = {0.5, -1.1, 0.2, 0.8};
    auto loss = [&](ParamStore& store) {
        (void)store;  // the store is the model's own parameter set
        ElboGraph g = build_collapsed_elbo(m, batch, noise, 0.0);
        g.tape.backward(g.smooth, m.params());
        return g.breakdown.recon_loglik - g.breakdown.kl;
    };
    CHECK(finite_diff_check(loss, m.params(), 1e-6) < 1e-4);
}

TEST_CASE("loading gradients match finite differences") {
    DlgfaModel m = toy_model();
    Tensor batch = Tensor::zeros({2, 1, 3});
    batch.data() = {0.9, -0.3, 0.5, 0.1, 1.2, -0.7};
    Tensor noise = Tensor::zeros({2, 1, 2});
    noise.data() = {0.5, -1.1, 0.2, 0.8};

    ElboGraph g = build_collapsed_elbo(m, batch, noise, 0.0);
    g.tape.backward(g.smooth, m.params());
    const double eps = 1e-6;
    for (std::size_t t = 0; t < 2; ++t) {
        for (std::size_t gi = 0; gi < 2; ++gi) {
            const Tensor& wg = g.tape.grad(g.seq.w_vars[t][gi]);
            Tensor& w = m.loadings().at(t, gi);
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double keep = w[i];
                w[i] = keep + eps;
                const LossBreakdown up = collapsed_elbo(m, batch, noise, 0.0);
                w[i] = keep - eps;
                const LossBreakdown dn = collapsed_elbo(m, batch, noise, 0.0);
                w[i] = keep;
                const double fd = ((up.recon_loglik - up.kl) - (dn.recon_loglik - dn.kl)) / (2.0 * eps);
                CHECK(std::abs(wg[i] - fd) / (std::abs(fd) + 1e-8) < 1e-4);
            }
        }
    }
}

TEST_CASE("quadratic network prior lowers the smooth objective") {
    DlgfaModel m = toy_model();
    Tensor batch = Tensor::zeros({2, 1, 3});
    batch.data() = {0.9, -0.3, 0.5, 0.1, 1.2, -0.7};
    Tensor noise = Tensor::zeros({2, 1, 2});
    noise.data() = {0.5, -1.1, 0.2, 0.8};

    ElboGraph base = build_collapsed_elbo(m, batch, noise, 0.0, 0.0);
    ElboGraph ridge = build_collapsed_elbo(m, batch, noise, 0.0, 0.1);
    double sq = 0.0;
    for (const auto& name : m.params().names()) {
        for (double v : m.params().param(name).data()) sq += v * v;
    }
    const double base_v = base.tape.value(base.smooth)[0];
    const double ridge_v = ridge.tape.value(ridge.smooth)[0];
    CHECK(ridge_v == doctest::Approx(base_v - 0.05 * sq).epsilon(1e-10));
}
