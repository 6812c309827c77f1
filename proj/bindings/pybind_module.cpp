#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "crsfl/config.hpp"
#include "crsfl/engine.hpp"
#include "crsfl/metrics.hpp"
#include "crsfl/privacy.hpp"
#include "crsfl/samplers.hpp"
#include "crsfl/wire.hpp"

namespace py = pybind11;

namespace {

py::dict run_to_dict(const crsfl::RunResult& result) {
  py::list history;
  for (const crsfl::RoundMetrics& r : result.history) {
    py::dict row;
    row["round"] = r.round;
    row["train_loss"] = r.train_loss;
    row["eval_accuracy"] =
        r.eval_accuracy ? py::object(py::float_(*r.eval_accuracy))
                        : py::object(py::none());
    row["eval_ce_loss"] =
        r.eval_ce_loss ? py::object(py::float_(*r.eval_ce_loss))
                       : py::object(py::none());
    row["download_bytes"] = r.download_bytes;
    row["upload_bytes"] = r.upload_bytes;
    row["m"] = r.m;
    history.append(std::move(row));
  }
  py::dict out;
  out["history"] = std::move(history);
  out["final_accuracy"] = result.final_accuracy;
  out["ot_bytes"] = crsfl::overall_transmission(result.history);
  out["resolved_k"] = result.resolved_k;
  out["model_dim"] = result.model_dim;
  out["csv"] = crsfl::render_csv(result.history);
  return out;
}

}  // namespace

PYBIND11_MODULE(_crsfl, m) {
  m.doc() = "Conditional-random-sampling federated learning simulator";

  py::register_exception<crsfl::ConfigError>(m, "ConfigError",
                                             PyExc_ValueError);
  py::register_exception<crsfl::CertificateRefused>(m, "CertificateRefused",
                                                    PyExc_ValueError);
  py::register_exception<crsfl::MalformedPayload>(m, "MalformedPayload",
                                                  PyExc_ValueError);

  m.def("squared_l2", [](const std::vector<double>& v) {
    return crsfl::squared_l2(v);
  });

  py::class_<crsfl::SparseEntry>(m, "SparseEntry")
      .def(py::init<std::uint32_t, double>())
      .def_readwrite("index", &crsfl::SparseEntry::index)
      .def_readwrite("value", &crsfl::SparseEntry::value)
      .def("__repr__", [](const crsfl::SparseEntry& e) {
        return "SparseEntry(" + std::to_string(e.index) + ", " +
               std::to_string(e.value) + ")";
      });

  py::class_<crsfl::SparseUpdate>(m, "SparseUpdate")
      .def(py::init<>())
      .def_readwrite("dim", &crsfl::SparseUpdate::dim)
      .def_readwrite("entries", &crsfl::SparseUpdate::entries)
      .def_readwrite("threshold", &crsfl::SparseUpdate::threshold)
      .def_property(
          "codec_id",
          [](const crsfl::SparseUpdate& u) {
            return static_cast<std::uint8_t>(u.codec);
          },
          [](crsfl::SparseUpdate& u, std::uint8_t id) {
            u.codec = static_cast<crsfl::Codec>(id);
          })
      .def("__eq__", [](const crsfl::SparseUpdate& a,
                        const crsfl::SparseUpdate& b) { return a == b; });

  m.def("densify", &crsfl::densify);
  m.def("serialize", [](const crsfl::SparseUpdate& u) {
    auto bytes = crsfl::serialize(u);
    return py::bytes(reinterpret_cast<const char*>(bytes.data()),
                     bytes.size());
  });
  m.def("deserialize", [](const py::bytes& raw) {
    std::string_view view = raw;
    return crsfl::deserialize(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(view.data()), view.size()));
  });
  m.def("payload_bytes", &crsfl::payload_bytes);
  m.def("dense_broadcast_bytes", &crsfl::dense_broadcast_bytes);

  m.def("inclusion_probability", &crsfl::inclusion_probability,
        py::arg("g_j"), py::arg("tau"), py::arg("p"));
  m.def(
      "crs_sample",
      [](const std::vector<double>& g, std::uint32_t k, double p,
         std::uint64_t seed, bool fixed_p_scaling) {
        crsfl::RngStream rng(seed);
        crsfl::SamplerConfig cfg;
        cfg.kind = crsfl::SamplerKind::kCrs;
        cfg.k = k;
        cfg.p = p;
        cfg.epsilon = 1.0;  // structural placeholder; admissibility is the
                            // caller's concern here
        cfg.crs_fixed_p_scaling = fixed_p_scaling;
        return crsfl::crs_sample(g, cfg, rng);
      },
      py::arg("g"), py::arg("k"), py::arg("p"), py::arg("seed"),
      py::arg("fixed_p_scaling") = false);
  m.def(
      "crs_sample_with_coefficients",
      [](const std::vector<double>& g, std::uint32_t k, double p,
         const std::vector<double>& alphas, bool fixed_p_scaling) {
        return crsfl::crs_sample(g, k, p, alphas, fixed_p_scaling);
      },
      py::arg("g"), py::arg("k"), py::arg("p"), py::arg("alphas"),
      py::arg("fixed_p_scaling") = false);
  m.def(
      "minmax_sample",
      [](const std::vector<double>& g, std::uint32_t k, std::uint64_t seed) {
        crsfl::RngStream rng(seed);
        return crsfl::minmax_sample(g, k, rng);
      },
      py::arg("g"), py::arg("k"), py::arg("seed"));
  m.def(
      "poisson_sample",
      [](const std::vector<double>& g, double p, std::uint64_t seed) {
        crsfl::RngStream rng(seed);
        return crsfl::poisson_sample(g, p, rng);
      },
      py::arg("g"), py::arg("p"), py::arg("seed"));
  m.def("gspar_probabilities", [](const std::vector<double>& g,
                                  std::uint32_t k) {
    return crsfl::gspar_probabilities(g, k);
  });
  m.def(
      "gspar_sample",
      [](const std::vector<double>& g, std::uint32_t k, std::uint64_t seed) {
        crsfl::RngStream rng(seed);
        return crsfl::gspar_sample(g, k, rng);
      },
      py::arg("g"), py::arg("k"), py::arg("seed"));
  m.def(
      "topk_sample",
      [](const std::vector<double>& g, std::uint32_t k,
         std::vector<double> residual, bool feedback) {
        crsfl::SamplerState state;
        state.residual = std::move(residual);
        auto update = crsfl::topk_sample(g, k, state, feedback);
        return py::make_tuple(update, state.residual);
      },
      py::arg("g"), py::arg("k"),
      py::arg("residual") = std::vector<double>(), py::arg("feedback") = true);
  m.def("identity_sample", [](const std::vector<double>& g) {
    return crsfl::identity_sample(g);
  });

  py::class_<crsfl::PrivacyCertificate>(m, "PrivacyCertificate")
      .def_readonly("epsilon", &crsfl::PrivacyCertificate::epsilon)
      .def_readonly("p", &crsfl::PrivacyCertificate::p)
      .def_readonly("k", &crsfl::PrivacyCertificate::k)
      .def_readonly("d", &crsfl::PrivacyCertificate::d)
      .def_readonly("delta_bound", &crsfl::PrivacyCertificate::delta_bound)
      .def_readonly("log_delta_bound",
                    &crsfl::PrivacyCertificate::log_delta_bound)
      .def_readonly("issued", &crsfl::PrivacyCertificate::issued)
      .def_readonly("weak_delta", &crsfl::PrivacyCertificate::weak_delta)
      .def_readonly("reason", &crsfl::PrivacyCertificate::reason);

  m.def("max_sampling_probability", &crsfl::max_sampling_probability,
        py::arg("epsilon"));
  m.def("max_sampling_size", &crsfl::max_sampling_size, py::arg("epsilon"),
        py::arg("p"), py::arg("d"));
  m.def("admissibility_ratio", &crsfl::admissibility_ratio, py::arg("d"),
        py::arg("k"), py::arg("p"));
  m.def("kl_bernoulli", &crsfl::kl_bernoulli, py::arg("a"), py::arg("p"));
  m.def("delta_bound", &crsfl::delta_bound, py::arg("d"), py::arg("k"),
        py::arg("p"));
  m.def("log_delta_bound", &crsfl::log_delta_bound, py::arg("d"),
        py::arg("k"), py::arg("p"));
  m.def("binomial_tail", &crsfl::binomial_tail, py::arg("d"), py::arg("p"),
        py::arg("k"));
  m.def("issue_certificate", &crsfl::issue_certificate, py::arg("epsilon"),
        py::arg("p"), py::arg("k"), py::arg("d"));
  m.def(
      "laplace_perturb",
      [](const std::vector<double>& v, double scale, std::uint64_t seed) {
        crsfl::RngStream rng(seed);
        return crsfl::laplace_perturb(v, scale, rng);
      },
      py::arg("v"), py::arg("scale"), py::arg("seed"));

  m.def("accuracy_per_ot", &crsfl::accuracy_per_ot, py::arg("final_accuracy"),
        py::arg("ot_bytes"));

  m.def(
      "run_experiment",
      [](const std::string& config_text) {
        return run_to_dict(
            crsfl::run_experiment(crsfl::parse_config_text(config_text)));
      },
      py::arg("config_text"),
      "Run a full experiment from config text; returns per-round metrics.");
  m.def(
      "run_experiment_file",
      [](const std::string& path) {
        return run_to_dict(crsfl::run_experiment(crsfl::parse_config(path)));
      },
      py::arg("path"));
}
