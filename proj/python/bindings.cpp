#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mcslab/harness.hpp"

namespace py = pybind11;
using namespace mcslab;

namespace {

std::vector<VdbEntry> entries_from_arrays(
    const Eigen::MatrixXd& keys, const std::vector<double>& values) {
  if (keys.rows() != static_cast<Eigen::Index>(values.size()))
    throw ContractError("keys and values must have matching first dimension");
  std::vector<VdbEntry> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i].key.values = keys.row(static_cast<Eigen::Index>(i)).transpose();
    out[i].value = values[i];
  }
  return out;
}

py::list hits_to_list(const std::vector<SearchHit>& hits) {
  py::list out;
  for (const auto& h : hits)
    out.append(py::make_tuple(h.id, h.distance, h.value));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "MCS selection laboratory for uplink MU-MIMO-OFDM";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<ContractError>(m, "ContractError");
  py::register_exception<NumericError>(m, "NumericErrorEx");
  py::register_exception<StateError>(m, "StateError");

  py::class_<Constellation>(m, "Constellation")
      .def_static("make", &Constellation::make, py::arg("q"),
                  py::arg("es") = 1.0)
      .def_readonly("q", &Constellation::q)
      .def_readonly("s", &Constellation::s)
      .def_readonly("es", &Constellation::es)
      .def_property_readonly(
          "points", [](const Constellation& c) { return c.points.matrix(); })
      .def_readonly("labels", &Constellation::labels)
      .def("bit_of", &Constellation::bit_of);

  py::class_<PsiTable>(m, "PsiTable")
      .def_readonly("q", &PsiTable::q)
      .def_readonly("snr_grid_db", &PsiTable::snr_grid_db)
      .def_readonly("mi", &PsiTable::mi);

  m.def("modulate",
        [](const std::vector<std::uint8_t>& bits, const Constellation& c) {
          return modulate(bits, c);
        });
  m.def("posterior_llrs",
        [](const Eigen::VectorXd& weights, const Constellation& c) {
          SymbolPosterior p;
          p.weights = weights.array();
          return Eigen::VectorXd(posterior_llrs(p, c).matrix());
        });
  m.def("measure_tb_mi",
        [](const std::vector<double>& llrs,
           const std::vector<std::uint8_t>& bits) {
          return measure_tb_mi(llrs, bits);
        });
  m.def("build_psi_table", &build_psi_table, py::arg("q"), py::arg("snr_grid_db"),
        py::arg("n_symbols"), py::arg("seed"));
  m.def("psi_eval", &psi_eval);
  m.def("psi_inverse", &psi_inverse);

  py::class_<ChannelConfig>(m, "ChannelConfig")
      .def(py::init<>())
      .def_readwrite("n_rx", &ChannelConfig::n_rx)
      .def_readwrite("n_ue", &ChannelConfig::n_ue)
      .def_readwrite("n_subcarriers", &ChannelConfig::n_subcarriers)
      .def_readwrite("n_taps", &ChannelConfig::n_taps)
      .def_readwrite("fft_size", &ChannelConfig::fft_size)
      .def_readwrite("pdp_decay", &ChannelConfig::pdp_decay)
      .def_readwrite("seed", &ChannelConfig::seed);

  py::class_<ChannelRealization>(m, "ChannelRealization")
      .def_property_readonly(
          "h", [](const ChannelRealization& r) { return r.h; })
      .def_readonly("config", &ChannelRealization::config)
      .def_readonly("seed", &ChannelRealization::seed);

  m.def("generate_channel", &generate_channel);

  m.def("lmmse_sinr", [](const Eigen::MatrixXcd& h, double rho) {
    return Eigen::VectorXd(lmmse_sinr(h, rho).matrix());
  });
  m.def("zf_sinr", [](const Eigen::MatrixXcd& h, double rho) {
    return Eigen::VectorXd(zf_sinr(h, rho).matrix());
  });

  py::class_<EpConfig>(m, "EpConfig")
      .def(py::init<>())
      .def_readwrite("t_iters", &EpConfig::t_iters)
      .def_readwrite("damping", &EpConfig::damping)
      .def_readwrite("variance_floor", &EpConfig::variance_floor);

  m.def("ep_detect",
        [](const Eigen::VectorXcd& y, const Eigen::MatrixXcd& h, double n0,
           const Constellation& c, const EpConfig& cfg) {
          const auto posts = ep_detect(y, h, n0, c, cfg);
          Eigen::MatrixXd out(static_cast<Eigen::Index>(posts.size()), c.q);
          for (std::size_t i = 0; i < posts.size(); ++i)
            out.row(static_cast<Eigen::Index>(i)) =
                posts[i].weights.matrix().transpose();
          return out;
        },
        "Per-user module-A posterior weights (M x Q)");

  py::class_<LdpcCode>(m, "LdpcCode")
      .def_readonly("n", &LdpcCode::n)
      .def_readonly("k", &LdpcCode::k)
      .def_readonly("rate", &LdpcCode::rate);
  m.def("build_code", &build_code);
  m.def("encode", &encode);
  m.def("decode", [](const LdpcCode& code, const std::vector<double>& llrs,
                     int max_iters) {
    const auto r = decode(code, llrs, max_iters);
    return py::make_tuple(r.info, r.converged);
  });

  py::class_<ExitCurve>(m, "ExitCurve")
      .def_readonly("mcs_index", &ExitCurve::mcs_index)
      .def_readonly("points", &ExitCurve::points);
  py::class_<SnrBlerCurve>(m, "SnrBlerCurve")
      .def_readonly("mcs_index", &SnrBlerCurve::mcs_index)
      .def_readonly("points", &SnrBlerCurve::points);
  m.def("build_exit_curve", &build_exit_curve);
  m.def("build_snr_bler_curve", &build_snr_bler_curve);
  m.def("predict_bler",
        [](const ExitCurve& c, double mi) { return predict_bler(c, mi); });
  m.def("predict_bler_snr", [](const SnrBlerCurve& c, double snr_db) {
    return predict_bler(c, snr_db);
  });

  py::class_<FlatIndex>(m, "FlatIndex")
      .def_property_readonly("size", &FlatIndex::size);
  py::class_<IvfPqIndex>(m, "IvfPqIndex")
      .def_property_readonly("size", &IvfPqIndex::size)
      .def_readonly("k_ivf", &IvfPqIndex::k_ivf)
      .def_readonly("d_sub", &IvfPqIndex::d_sub);

  m.def("build_flat",
        [](const Eigen::MatrixXd& keys, const std::vector<double>& values) {
          return build_flat(entries_from_arrays(keys, values));
        });
  m.def("flat_search",
        [](const FlatIndex& idx, const Eigen::VectorXd& query, int k) {
          FeatureVector q;
          q.values = query;
          return hits_to_list(flat_search(idx, q, k));
        });
  m.def("build_ivfpq",
        [](const Eigen::MatrixXd& keys, const std::vector<double>& values,
           int k_ivf, int d_sub, std::uint64_t seed) {
          return build_ivfpq(entries_from_arrays(keys, values), k_ivf, d_sub,
                             seed);
        });
  m.def("ann_search",
        [](const IvfPqIndex& idx, const Eigen::VectorXd& query, int k,
           int p_ivf, bool exact) {
          FeatureVector q;
          q.values = query;
          return hits_to_list(ann_search(idx, q, k, p_ivf, exact));
        },
        py::arg("index"), py::arg("query"), py::arg("k"), py::arg("p_ivf"),
        py::arg("exact_distance_hook") = false);
  m.def("predict_mi_topk",
        [](const IvfPqIndex& idx, const Eigen::VectorXd& query, int k,
           int p_ivf) {
          FeatureVector q;
          q.values = query;
          return predict_mi_topk(idx, q, k, p_ivf);
        });
  m.def("search_op_count", &search_op_count);
  m.def("save_index", &save_index);
  m.def("load_index", &load_index);

  m.def("extract_feature",
        [](const ChannelRealization& h, double rho, int q, const PsiTable& psi,
           int user) {
          return Eigen::VectorXd(extract_feature(h, rho, q, psi, user).values);
        });
  m.def("predicted_mi_lmmse", &predicted_mi_lmmse);
  m.def("effective_sinr_zf", &effective_sinr_zf);

  py::class_<SimConfig>(m, "SimConfig")
      .def_static("from_file", &SimConfig::from_file)
      .def_static("from_json_text", &SimConfig::from_json_text)
      .def("to_json_text", &SimConfig::to_json_text);

  py::class_<ArtifactSet>(m, "ArtifactSet");

  m.def("run_offline", &run_offline, py::arg("config"),
        py::arg("parts") = static_cast<unsigned>(kOfflineAll),
        py::call_guard<py::gil_scoped_release>());
  m.def("load_artifacts", &load_artifacts, py::arg("config"),
        py::arg("parts") = static_cast<unsigned>(kOfflineAll));
  m.def("run_throughput",
        [](const SimConfig& config, const std::string& pipeline,
           const std::string& detector, const ArtifactSet& art) {
          const auto rep =
              run_throughput(config, pipeline_from_string(pipeline),
                             detector_from_string(detector), art);
          py::list per_snr;
          for (const auto& s : rep.per_snr) {
            py::dict d;
            d["snr_db"] = s.snr_db;
            d["tau_sys_mbps_mean"] = s.tau_sys_mean;
            d["tau_sys_mbps_samples"] = s.tau_sys_mbps;
            d["realized_bler"] = s.realized_bler;
            per_snr.append(d);
          }
          return per_snr;
        },
        py::call_guard<py::gil_scoped_release>());
}
