#include "dlgfa/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace dlgfa {

void RunConfig::validate() const {
    if (data.source != "synthetic" && data.source != "csv") {
        throw ParseError("config: data.source must be 'synthetic' or 'csv'");
    }
    if (data.source == "csv" && data.path.empty()) {
        throw ParseError("config: data.path is required for data.source = csv");
    }
    if (data.mode != "row_as_time" && data.mode != "replicate_T") {
        throw ParseError("config: data.mode must be 'row_as_time' or 'replicate_T'");
    }
    if (data.noise_sd < 0.0) throw ParseError("config: data.noise_sd must be >= 0");
    if (data.size < 2) throw ParseError("config: data.size must be >= 2");
    if (optim.lr_adam <= 0.0) throw ParseError("config: optim.lr_adam must be > 0");
    if (optim.lr_prox <= 0.0) throw ParseError("config: optim.lr_prox must be > 0");
    if (optim.lambda < 0.0) throw ParseError("config: optim.lambda must be >= 0");
    if (optim.tol <= 0.0) throw ParseError("config: optim.tol must be > 0");
    if (optim.batch_size == 0) throw ParseError("config: optim.batch_size must be >= 1");
    if (data.split.train <= 0.0 || data.split.val <= 0.0 || data.split.test <= 0.0 ||
        std::abs(data.split.train + data.split.val + data.split.test - 1.0) > 1e-9) {
        throw ParseError("config: data.split fractions must be positive and sum to 1");
    }
    if (output_dir.empty()) throw ParseError("config: output_dir must not be empty");
}

namespace {

struct KeyContext {
    std::string key;
    std::string value;
    std::size_t line;
    const std::string* origin;

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(*origin + ":" + std::to_string(line) + ": key '" + key + "': " + what);
    }

    double as_real() const {
        char* end = nullptr;
        const double v = std::strtod(value.c_str(), &end);
        if (end == value.c_str() || *end != '\0') fail("expected a number, got '" + value + "'");
        return v;
    }
    std::size_t as_count() const {
        const double v = as_real();
        if (v < 0 || v != std::floor(v)) fail("expected a non-negative integer");
        return static_cast<std::size_t>(v);
    }
    std::uint64_t as_seed() const { return static_cast<std::uint64_t>(as_count()); }
    bool as_bool() const {
        if (value == "true") return true;
        if (value == "false") return false;
        fail("expected true or false");
    }
    std::string as_string() const { return value; }
};

std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::map<std::string, std::function<void(const KeyContext&)>> handlers = {
        {"model.K", [&](const KeyContext& k) { cfg.model.K = k.as_count(); }},
        {"model.H", [&](const KeyContext& k) { cfg.model.H = k.as_count(); }},
        {"model.p", [&](const KeyContext& k) { cfg.model.p = k.as_count(); }},
        {"model.T", [&](const KeyContext& k) { cfg.model.T = k.as_count(); }},
        {"model.static_mode", [&](const KeyContext& k) { cfg.model.static_mode = k.as_bool(); }},
        {"model.x_feat", [&](const KeyContext& k) { cfg.model.x_feat = k.as_count(); }},
        {"model.z_feat", [&](const KeyContext& k) { cfg.model.z_feat = k.as_count(); }},
        {"model.z_feat_hidden", [&](const KeyContext& k) { cfg.model.z_feat_hidden = k.as_count(); }},
        {"model.enc_hidden", [&](const KeyContext& k) { cfg.model.enc_hidden = k.as_count(); }},
        {"model.decoders_per_timestep",
         [&](const KeyContext& k) { cfg.model.decoders_per_timestep = k.as_bool(); }},
        {"optim.lr_adam",
         [&](const KeyContext& k) {
             cfg.optim.lr_adam = k.as_real();
             if (cfg.optim.lr_adam <= 0.0) k.fail("must be > 0");
         }},
        {"optim.lr_prox",
         [&](const KeyContext& k) {
             cfg.optim.lr_prox = k.as_real();
             if (cfg.optim.lr_prox <= 0.0) k.fail("must be > 0");
         }},
        {"optim.lambda",
         [&](const KeyContext& k) {
             cfg.optim.lambda = k.as_real();
             if (cfg.optim.lambda < 0.0) k.fail("must be >= 0");
         }},
        {"optim.max_epochs", [&](const KeyContext& k) { cfg.optim.max_epochs = k.as_count(); }},
        {"optim.max_iterations", [&](const KeyContext& k) { cfg.optim.max_iterations = k.as_count(); }},
        {"optim.tol",
         [&](const KeyContext& k) {
             cfg.optim.tol = k.as_real();
             if (cfg.optim.tol <= 0.0) k.fail("must be > 0");
         }},
        {"optim.seed",
         [&](const KeyContext& k) {
             cfg.optim.seed = k.as_seed();
             cfg.seed_given = true;
         }},
        {"optim.batch_size",
         [&](const KeyContext& k) {
             cfg.optim.batch_size = k.as_count();
             if (cfg.optim.batch_size == 0) k.fail("must be >= 1");
         }},
        {"optim.theta_prior_weight",
         [&](const KeyContext& k) {
             cfg.optim.theta_prior_weight = k.as_real();
             if (cfg.optim.theta_prior_weight < 0.0) k.fail("must be >= 0");
         }},
        {"optim.checkpoint_every", [&](const KeyContext& k) { cfg.optim.checkpoint_every = k.as_count(); }},
        {"data.source", [&](const KeyContext& k) { cfg.data.source = k.as_string(); }},
        {"data.path", [&](const KeyContext& k) { cfg.data.path = k.as_string(); }},
        {"data.n", [&](const KeyContext& k) { cfg.data.n = k.as_count(); }},
        {"data.size", [&](const KeyContext& k) { cfg.data.size = k.as_count(); }},
        {"data.noise_sd",
         [&](const KeyContext& k) {
             cfg.data.noise_sd = k.as_real();
             if (cfg.data.noise_sd < 0.0) k.fail("must be >= 0");
         }},
        {"data.seed", [&](const KeyContext& k) { cfg.data.seed = k.as_seed(); }},
        {"data.mode", [&](const KeyContext& k) { cfg.data.mode = k.as_string(); }},
        {"data.replicate_t", [&](const KeyContext& k) { cfg.data.replicate_t = k.as_count(); }},
        {"data.split.train", [&](const KeyContext& k) { cfg.data.split.train = k.as_real(); }},
        {"data.split.val", [&](const KeyContext& k) { cfg.data.split.val = k.as_real(); }},
        {"data.split.test", [&](const KeyContext& k) { cfg.data.split.test = k.as_real(); }},
        {"data.split.seed", [&](const KeyContext& k) { cfg.data.split.seed = k.as_seed(); }},
        {"output_dir", [&](const KeyContext& k) { cfg.output_dir = k.as_string(); }},
    };

    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = strip(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        KeyContext ctx;
        ctx.key = strip(line.substr(0, eq));
        ctx.value = strip(line.substr(eq + 1));
        ctx.line = line_no;
        ctx.origin = &origin;
        if (ctx.value.size() >= 2 && ctx.value.front() == '"' && ctx.value.back() == '"') {
            ctx.value = ctx.value.substr(1, ctx.value.size() - 2);
        }
        auto it = handlers.find(ctx.key);
        if (it == handlers.end()) {
            throw ParseError(origin + ":" + std::to_string(line_no) + ": unknown key '" + ctx.key + "'");
        }
        it->second(ctx);
    }

    if (cfg.data.source.empty()) {
        throw ParseError(origin + ": missing required key 'data.source'");
    }
    cfg.validate();
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

std::string render_config(const RunConfig& cfg) {
    std::ostringstream out;
    auto real = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    out << "model.K = " << cfg.model.K << "\n";
    out << "model.H = " << cfg.model.H << "\n";
    out << "model.p = " << cfg.model.p << "\n";
    out << "model.T = " << cfg.model.T << "\n";
    out << "model.static_mode = " << (cfg.model.static_mode ? "true" : "false") << "\n";
    out << "model.x_feat = " << cfg.model.x_feat << "\n";
    out << "model.z_feat = " << cfg.model.z_feat << "\n";
    out << "model.z_feat_hidden = " << cfg.model.z_feat_hidden << "\n";
    out << "model.enc_hidden = " << cfg.model.enc_hidden << "\n";
    out << "model.decoders_per_timestep = " << (cfg.model.decoders_per_timestep ? "true" : "false")
        << "\n";
    out << "optim.lr_adam = " << real(cfg.optim.lr_adam) << "\n";
    out << "optim.lr_prox = " << real(cfg.optim.lr_prox) << "\n";
    out << "optim.lambda = " << real(cfg.optim.lambda) << "\n";
    out << "optim.max_epochs = " << cfg.optim.max_epochs << "\n";
    out << "optim.max_iterations = " << cfg.optim.max_iterations << "\n";
    out << "optim.tol = " << real(cfg.optim.tol) << "\n";
    out << "optim.seed = " << cfg.optim.seed << "\n";
    out << "optim.batch_size = " << cfg.optim.batch_size << "\n";
    out << "optim.theta_prior_weight = " << real(cfg.optim.theta_prior_weight) << "\n";
    out << "optim.checkpoint_every = " << cfg.optim.checkpoint_every << "\n";
    out << "data.source = \"" << cfg.data.source << "\"\n";
    if (!cfg.data.path.empty()) out << "data.path = \"" << cfg.data.path << "\"\n";
    out << "data.n = " << cfg.data.n << "\n";
    out << "data.size = " << cfg.data.size << "\n";
    out << "data.noise_sd = " << real(cfg.data.noise_sd) << "\n";
    out << "data.seed = " << cfg.data.seed << "\n";
    out << "data.mode = \"" << cfg.data.mode << "\"\n";
    out << "data.replicate_t = " << cfg.data.replicate_t << "\n";
    out << "data.split.train = " << real(cfg.data.split.train) << "\n";
    out << "data.split.val = " << real(cfg.data.split.val) << "\n";
    out << "data.split.test = " << real(cfg.data.split.test) << "\n";
    out << "data.split.seed = " << cfg.data.split.seed << "\n";
    out << "output_dir = \"" << cfg.output_dir << "\"\n";
    return out.str();
}

}  // namespace dlgfa
