#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dlgfa/checkpoint.hpp"
#include "dlgfa/eval.hpp"

namespace py = pybind11;
using namespace dlgfa;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<std::size_t> shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = static_cast<std::size_t>(a.shape(i));
    std::vector<double> data(a.data(), a.data() + a.size());
    return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

GroupSpec spec_from_args(const std::vector<std::size_t>& dims,
                         const std::vector<std::string>& names) {
    GroupSpec spec;
    spec.dims = dims;
    if (names.empty()) {
        for (std::size_t g = 0; g < dims.size(); ++g) spec.names.push_back("g" + std::to_string(g));
    } else {
        spec.names = names;
    }
    spec.validate();
    return spec;
}

LongitudinalDataset dataset_from_array(const py::array_t<double>& sequences,
                                       const std::vector<std::size_t>& group_dims,
                                       const std::vector<std::string>& group_names) {
    LongitudinalDataset ds;
    ds.sequences = tensor_from_array(sequences);
    ds.group_spec = spec_from_args(group_dims, group_names);
    for (std::size_t i = 0; i < ds.count(); ++i) ds.subject_ids.push_back("s" + std::to_string(i));
    for (std::size_t t = 0; t < ds.timesteps(); ++t) ds.time_index.push_back(std::to_string(t + 1));
    ds.validate();
    return ds;
}

ModelConfig model_config_from_kwargs(const LongitudinalDataset& ds, std::size_t k, std::size_t h,
                                     std::size_t p, bool static_mode) {
    ModelConfig mc;
    mc.K = k;
    mc.H = h;
    mc.p = p;
    mc.T = ds.timesteps();
    mc.group_spec = ds.group_spec;
    mc.static_mode = static_mode;
    return mc;
}

py::dict history_to_dict(const TrainHistory& history) {
    py::list recon, kl, penalty, objective, zeros;
    for (const LossBreakdown& e : history.epochs) {
        recon.append(e.recon_loglik);
        kl.append(e.kl);
        penalty.append(e.penalty);
        objective.append(e.objective);
    }
    for (std::size_t z : history.zero_columns) zeros.append(z);
    py::dict out;
    out["recon"] = recon;
    out["kl"] = kl;
    out["penalty"] = penalty;
    out["objective"] = objective;
    out["zero_columns"] = zeros;
    return out;
}

}  // namespace

PYBIND11_MODULE(_dlgfa, m) {
    m.doc() = "Recurrent group factor analysis for longitudinal multi-view data";

    py::register_exception<Error>(m, "DlgfaError");

    py::class_<LongitudinalDataset>(m, "Dataset")
        .def(py::init(&dataset_from_array), py::arg("sequences"), py::arg("group_dims"),
             py::arg("group_names") = std::vector<std::string>{})
        .def_property_readonly("sequences",
                               [](const LongitudinalDataset& ds) { return array_from_tensor(ds.sequences); })
        .def_property_readonly("group_dims",
                               [](const LongitudinalDataset& ds) { return ds.group_spec.dims; })
        .def_property_readonly("group_names",
                               [](const LongitudinalDataset& ds) { return ds.group_spec.names; })
        .def_readonly("subject_ids", &LongitudinalDataset::subject_ids)
        .def("__len__", &LongitudinalDataset::count)
        .def_property_readonly("timesteps", &LongitudinalDataset::timesteps)
        .def_property_readonly("dim", &LongitudinalDataset::dim);

    py::class_<DlgfaModel>(m, "Model")
        .def_property_readonly("k", [](const DlgfaModel& m_) { return m_.config().K; })
        .def_property_readonly("timesteps", [](const DlgfaModel& m_) { return m_.config().T; })
        .def_property_readonly("groups",
                               [](const DlgfaModel& m_) { return m_.config().group_spec.group_count(); })
        .def("loading",
             [](const DlgfaModel& m_, std::size_t t, std::size_t g) {
                 return array_from_tensor(m_.loadings().at(t, g));
             },
             py::arg("t"), py::arg("g"))
        .def("column_norms",
             [](const DlgfaModel& m_) {
                 SparsityReport rep = sparsity_report(m_);
                 Tensor t(std::vector<std::size_t>{rep.T, rep.G, rep.K}, rep.norms);
                 return array_from_tensor(t);
             })
        .def("zero_columns",
             [](const DlgfaModel& m_) { return count_zero_columns(m_.loadings()); })
        .def("parameter",
             [](const DlgfaModel& m_, const std::string& name) {
                 return array_from_tensor(m_.params().param(name));
             },
             py::arg("name"))
        .def("parameter_names", [](const DlgfaModel& m_) { return m_.params().names(); })
        .def("save", &save_checkpoint, py::arg("path"));

    m.def("generate_one_bar",
          [](std::size_t n, std::size_t size, double noise_sd, std::uint64_t seed,
             const std::string& mode, std::size_t replicate_t) {
              const OneBarMode m_ =
                  mode == "replicate_T" ? OneBarMode::ReplicateT : OneBarMode::RowAsTime;
              return generate_one_bar(n, size, noise_sd, seed, m_, replicate_t);
          },
          py::arg("n"), py::arg("size"), py::arg("noise_sd") = 0.05, py::arg("seed") = 0,
          py::arg("mode") = "row_as_time", py::arg("replicate_t") = 20);

    m.def("load_csv", &load_wide_csv, py::arg("path"));
    m.def("save_csv", &save_wide_csv, py::arg("dataset"), py::arg("path"));

    m.def("split",
          [](const LongitudinalDataset& ds, double train, double val, double test,
             std::uint64_t seed) {
              SplitSpec spec;
              spec.train = train;
              spec.val = val;
              spec.test = test;
              spec.seed = seed;
              return split_dataset(ds, spec);
          },
          py::arg("dataset"), py::arg("train") = 0.8, py::arg("val") = 0.1, py::arg("test") = 0.1,
          py::arg("seed") = 0);

    m.def("fit",
          [](const LongitudinalDataset& ds, std::size_t k, std::size_t h, double lam,
             std::size_t max_epochs, std::size_t max_iterations, std::size_t batch_size,
             double lr_adam, double lr_prox, double tol, std::uint64_t seed, bool static_mode) {
              ModelConfig mc = model_config_from_kwargs(ds, k, h, 1, static_mode);
              OptimConfig oc;
              oc.lambda = lam;
              oc.max_epochs = max_epochs;
              oc.max_iterations = max_iterations;
              oc.batch_size = batch_size;
              oc.lr_adam = lr_adam;
              oc.lr_prox = lr_prox;
              oc.tol = tol;
              oc.seed = seed;
              auto [model, history] = fit(ds, mc, oc);
              return py::make_tuple(std::move(model), history_to_dict(history));
          },
          py::arg("dataset"), py::arg("k") = 8, py::arg("h") = 16, py::arg("lam") = 0.0,
          py::arg("max_epochs") = 100, py::arg("max_iterations") = 0, py::arg("batch_size") = 64,
          py::arg("lr_adam") = 1e-3, py::arg("lr_prox") = 1e-4, py::arg("tol") = 1e-5,
          py::arg("seed") = 0, py::arg("static_mode") = false);

    m.def("elbo",
          [](const DlgfaModel& model, const py::array_t<double>& batch,
             const py::array_t<double>& noise, double lam) {
              LossBreakdown bd =
                  collapsed_elbo(model, tensor_from_array(batch), tensor_from_array(noise), lam);
              py::dict out;
              out["recon"] = bd.recon_loglik;
              out["kl"] = bd.kl;
              out["penalty"] = bd.penalty;
              out["objective"] = bd.objective;
              return out;
          },
          py::arg("model"), py::arg("batch"), py::arg("noise"), py::arg("lam") = 0.0);

    m.def("mse",
          [](const DlgfaModel& model, const LongitudinalDataset& ds, bool sampled,
             std::uint64_t seed) {
              return mse_test(model, ds, sampled ? NoiseMode::Sampled : NoiseMode::ZeroNoise, seed);
          },
          py::arg("model"), py::arg("dataset"), py::arg("sampled") = false, py::arg("seed") = 0);

    m.def("log_likelihood",
          [](const DlgfaModel& model, const LongitudinalDataset& ds, std::size_t num_samples,
             std::uint64_t seed) { return test_log_likelihood(model, ds, num_samples, seed); },
          py::arg("model"), py::arg("dataset"), py::arg("num_samples") = 1, py::arg("seed") = 0);

    m.def("prox_columns",
          [](const py::array_t<double>& w, double threshold) {
              Tensor t = tensor_from_array(w);
              if (t.shape().size() != 2) throw ContractError("prox_columns: expected a 2-d array");
              LoadingMatrices W(1, 1, t.rows(), t.cols());
              W.at(0, 0) = std::move(t);
              prox_group_columns(W, threshold);
              return array_from_tensor(W.at(0, 0));
          },
          py::arg("w"), py::arg("threshold"));

    m.def("load", &load_checkpoint, py::arg("path"));
}
