#include "dlgfa/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace dlgfa {

namespace {

using nlohmann::json;

std::string encode_doubles(const std::vector<double>& values) {
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(values.size() * 16);
    for (double v : values) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        for (int shift = 60; shift >= 0; shift -= 4) out += hex[(bits >> shift) & 0xF];
    }
    return out;
}

std::vector<double> decode_doubles(const std::string& s) {
    if (s.size() % 16 != 0) throw ParseError("checkpoint: malformed double array");
    std::vector<double> out(s.size() / 16);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits = 0;
        for (std::size_t k = 0; k < 16; ++k) {
            const char c = s[i * 16 + k];
            std::uint64_t nibble;
            if (c >= '0' && c <= '9') nibble = c - '0';
            else if (c >= 'a' && c <= 'f') nibble = 10 + (c - 'a');
            else throw ParseError("checkpoint: invalid hex digit");
            bits = (bits << 4) | nibble;
        }
        std::memcpy(&out[i], &bits, sizeof(double));
    }
    return out;
}

json tensor_to_json(const Tensor& t) {
    return json{{"shape", t.shape()}, {"data", encode_doubles(t.data())}};
}

Tensor tensor_from_json(const json& j) {
    return Tensor(j.at("shape").get<std::vector<std::size_t>>(),
                  decode_doubles(j.at("data").get<std::string>()));
}

}  // namespace

void save_checkpoint(const DlgfaModel& model, const std::string& path) {
    const ModelConfig& c = model.config();
    json j;
    j["format"] = "dlgfa-checkpoint-v1";
    j["config"] = {
        {"K", c.K}, {"H", c.H}, {"p", c.p}, {"T", c.T},
        {"static_mode", c.static_mode},
        {"x_feat", c.x_feat}, {"z_feat", c.z_feat}, {"z_feat_hidden", c.z_feat_hidden},
        {"enc_hidden", c.enc_hidden},
        {"decoders_per_timestep", c.decoders_per_timestep},
        {"group_dims", c.group_spec.dims},
        {"group_names", c.group_spec.names},
    };
    json params = json::object();
    for (const auto& name : model.params().names()) {
        params[name] = tensor_to_json(model.params().param(name));
    }
    j["params"] = params;
    json loadings = json::array();
    for (std::size_t t = 0; t < c.T; ++t) {
        json row = json::array();
        for (std::size_t g = 0; g < c.group_spec.group_count(); ++g) {
            row.push_back(tensor_to_json(model.loadings().at(t, g)));
        }
        loadings.push_back(std::move(row));
    }
    j["loadings"] = loadings;

    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    out << j.dump();
    if (!out) throw ParseError("write failed: " + path);
}

DlgfaModel load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (j.value("format", "") != "dlgfa-checkpoint-v1") {
        throw ParseError(path + ": not a dlgfa checkpoint");
    }
    const json& cj = j.at("config");
    ModelConfig c;
    c.K = cj.at("K").get<std::size_t>();
    c.H = cj.at("H").get<std::size_t>();
    c.p = cj.at("p").get<std::size_t>();
    c.T = cj.at("T").get<std::size_t>();
    c.static_mode = cj.at("static_mode").get<bool>();
    c.x_feat = cj.at("x_feat").get<std::size_t>();
    c.z_feat = cj.at("z_feat").get<std::size_t>();
    c.z_feat_hidden = cj.at("z_feat_hidden").get<std::size_t>();
    c.enc_hidden = cj.at("enc_hidden").get<std::size_t>();
    c.decoders_per_timestep = cj.at("decoders_per_timestep").get<bool>();
    c.group_spec.dims = cj.at("group_dims").get<std::vector<std::size_t>>();
    c.group_spec.names = cj.at("group_names").get<std::vector<std::string>>();

    DlgfaModel model = DlgfaModel::init(c, 0);
    const json& params = j.at("params");
    for (const auto& name : model.params().names()) {
        if (!params.contains(name)) throw ParseError(path + ": missing parameter " + name);
        Tensor t = tensor_from_json(params.at(name));
        if (!t.same_shape(model.params().param(name))) {
            throw ParseError(path + ": shape mismatch for parameter " + name);
        }
        model.params().param(name) = std::move(t);
    }
    if (params.size() != model.params().size()) {
        throw ParseError(path + ": unexpected extra parameters");
    }
    const json& loadings = j.at("loadings");
    for (std::size_t t = 0; t < c.T; ++t) {
        for (std::size_t g = 0; g < c.group_spec.group_count(); ++g) {
            Tensor w = tensor_from_json(loadings.at(t).at(g));
            if (!w.same_shape(model.loadings().at(t, g))) {
                throw ParseError(path + ": loading matrix shape mismatch");
            }
            model.loadings().at(t, g) = std::move(w);
        }
    }
    return model;
}

}  // namespace dlgfa
