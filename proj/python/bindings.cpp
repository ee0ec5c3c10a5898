#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "maser/channel.hpp"
#include "maser/cli.hpp"
#include "maser/dynamics.hpp"
#include "maser/params.hpp"
#include "maser/propagator.hpp"
#include "maser/resonance.hpp"
#include "maser/spectral.hpp"

namespace py = pybind11;
using namespace maser;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

BandedState initial_state(const std::string& name, const ModelParams& p, int d_max, double alpha) {
  if (name == "coherent") return coherent_state(alpha, p.n_max, d_max);
  if (name == "thermal") return BandedState::diagonal(thermal_state(p).values, d_max);
  if (name == "ground") {
    std::vector<double> g(static_cast<size_t>(p.n_max) + 1, 0.0);
    g[0] = 1.0;
    return BandedState::diagonal(g, d_max);
  }
  throw ValidationError("initial must be ground, thermal or coherent");
}

}  // namespace

PYBIND11_MODULE(_maser, m) {
  m.doc() = "Reduced cavity dynamics of the one-atom maser";
  m.attr("__version__") = MASER_VERSION;

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<BudgetExceeded>(m, "BudgetExceeded", PyExc_RuntimeError);

  py::class_<PhysicalParams>(m, "PhysicalParams")
      .def(py::init([](double omega, double omega0, double lambda, double tau, double beta, int n_max) {
             PhysicalParams p{omega, omega0, lambda, tau, beta, n_max};
             p.validate();
             return p;
           }),
           py::kw_only(), py::arg("omega") = 1.0, py::arg("omega0") = 1.0, py::arg("lambda_") = 0.0,
           py::arg("tau") = 1.0, py::arg("beta") = 1.0, py::arg("n_max") = 16)
      .def_readwrite("omega", &PhysicalParams::omega)
      .def_readwrite("omega0", &PhysicalParams::omega0)
      .def_readwrite("lambda_", &PhysicalParams::lambda)
      .def_readwrite("tau", &PhysicalParams::tau)
      .def_readwrite("beta", &PhysicalParams::beta)
      .def_readwrite("n_max", &PhysicalParams::n_max);

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init([](double eta, double xi, double beta_omega0, double omega_tau, int n_max) {
             ModelParams p{eta, xi, beta_omega0, omega_tau, n_max};
             p.validate();
             return p;
           }),
           py::kw_only(), py::arg("eta") = 0.0, py::arg("xi") = 1.0, py::arg("beta_omega0") = 1.0,
           py::arg("omega_tau") = 1.0, py::arg("n_max") = 16)
      .def_static("from_physical", &ModelParams::from_physical)
      .def_readwrite("eta", &ModelParams::eta)
      .def_readwrite("xi", &ModelParams::xi)
      .def_readwrite("beta_omega0", &ModelParams::beta_omega0)
      .def_readwrite("omega_tau", &ModelParams::omega_tau)
      .def_readwrite("n_max", &ModelParams::n_max)
      .def("with_n_max", &ModelParams::with_n_max)
      .def("__repr__", [](const ModelParams& p) {
        return "ModelParams(eta=" + cli::format_double(p.eta) + ", xi=" + cli::format_double(p.xi) +
               ", beta_omega0=" + cli::format_double(p.beta_omega0) +
               ", omega_tau=" + cli::format_double(p.omega_tau) + ", n_max=" + std::to_string(p.n_max) + ")";
      });

  m.def("dimensionless", [](const PhysicalParams& p) {
    const Dimensionless d = dimensionless(p);
    return py::make_tuple(d.eta, d.xi);
  });
  m.def("d_function", py::overload_cast<long, const ModelParams&>(&d_function), py::arg("n"), py::arg("params"));
  m.def("thermal_state", [](const ModelParams& p) { return to_array(thermal_state(p).values); });

  m.def("propagator", [](const ModelParams& p) { return build_propagator(p).to_dense(); },
        "Dense 2(n_max+1) x 2(n_max+1) interaction propagator");
  m.def("apply_channel",
        [](const Eigen::MatrixXcd& rho, const ModelParams& p) {
          if (rho.rows() != p.n_max + 1 || rho.cols() != p.n_max + 1)
            throw ValidationError("rho must be (n_max+1) x (n_max+1)");
          const ChannelOutput out = apply_channel(BandedState::from_dense(rho, p.n_max), kraus_trace_picture(p));
          return py::make_tuple(out.state.to_dense(), out.leakage);
        },
        py::arg("rho"), py::arg("params"), "One step of the reduced channel; returns (rho', leakage)");
  m.def("sector_operator",
        [](int d, const ModelParams& p, const std::string& picture) {
          const SectorOperator op = picture == "hs" ? sector_operator_hs(d, p) : sector_operator_trace(d, p);
          return py::dict(py::arg("diag") = op.diag, py::arg("lower") = op.lower, py::arg("upper") = op.upper);
        },
        py::arg("d"), py::arg("params"), py::arg("picture") = "hs");

  py::class_<ResonanceReport>(m, "ResonanceReport")
      .def_readonly("resonances", &ResonanceReport::resonances)
      .def_property_readonly("classification",
                             [](const ResonanceReport& r) { return std::string(to_string(r.classification)); })
      .def_property_readonly("quasi_sites", [](const ResonanceReport& r) { return r.quasi.sites; })
      .def_property_readonly("quasi_d_values", [](const ResonanceReport& r) { return r.quasi.d_values; })
      .def_property_readonly("fit_slope",
                             [](const ResonanceReport& r) -> py::object {
                               if (!r.quasi.fit.available) return py::none();
                               return py::float_(r.quasi.fit.slope);
                             })
      .def("label", &ResonanceReport::label);
  m.def(
      "resonances",
      [](double eta, double xi, double beta_omega0, long bound) {
        return resonance_report(eta, xi, beta_omega0, bound);
      },
      py::arg("eta"), py::arg("xi"), py::arg("beta_omega0") = 1.0, py::arg("bound") = 10000);
  m.def(
      "resonances_exact",
      [](const std::string& eta, const std::string& xi, double beta_omega0, long bound) {
        return resonance_report_exact(Rational::parse(eta), Rational::parse(xi), beta_omega0, bound);
      },
      py::arg("eta"), py::arg("xi"), py::arg("beta_omega0") = 1.0, py::arg("bound") = 10000);

  m.def(
      "l0_spectrum",
      [](const ModelParams& p, std::vector<long> zeroed) {
        const SpectrumReport r = l0_spectrum(p, zeroed);
        return py::dict(py::arg("eigenvalues") = to_array(r.eigenvalues), py::arg("top") = r.top,
                        py::arg("top_multiplicity") = r.top_multiplicity, py::arg("gap") = r.gap);
      },
      py::arg("params"), py::arg("zeroed") = std::vector<long>{});
  m.def(
      "gap_scan",
      [](const ModelParams& p, std::vector<int> n_max_list, std::vector<long> zeroed) {
        py::list rows;
        for (const GapRow& r : gap_scan(p, n_max_list, zeroed))
          rows.append(py::dict(py::arg("n_max") = r.n_max, py::arg("lambda2") = r.lambda2,
                               py::arg("lambda_min") = r.lambda_min,
                               py::arg("multiplicity_at_one") = r.multiplicity_at_one, py::arg("gap") = r.gap));
        return rows;
      },
      py::arg("params"), py::arg("n_max_list"), py::arg("zeroed") = std::vector<long>{});

  m.def(
      "simulate",
      [](const ModelParams& p, long steps, const std::string& initial, double alpha, int d_max,
         double stop_below) {
        IterateOptions o;
        o.stop_below = stop_below;
        const Trajectory t = iterate(initial_state(initial, p, d_max, alpha), p, steps, o);
        std::vector<double> step, dist, leak;
        for (const StepRecord& r : t.records) {
          step.push_back(static_cast<double>(r.step));
          dist.push_back(r.trace_distance);
          leak.push_back(r.leakage);
        }
        return py::dict(py::arg("step") = to_array(step), py::arg("trace_distance") = to_array(dist),
                        py::arg("leakage") = to_array(leak), py::arg("steps_run") = t.steps_run,
                        py::arg("exact") = t.exact_distance);
      },
      py::arg("params"), py::arg("steps"), py::arg("initial") = "ground", py::arg("alpha") = 1.0,
      py::arg("d_max") = 0, py::arg("stop_below") = 0.0);
  m.def("mixing_budget", &mixing_budget, py::arg("gap"), py::arg("tol"), py::arg("cap") = 10000000L);

  m.def(
      "metastable_lifetime",
      [](const ModelParams& p, std::vector<long> quasi, int k, double threshold, long budget) {
        LifetimeOptions o;
        o.threshold = threshold;
        o.budget = budget;
        const LifetimeResult r = metastable_lifetime(p, quasi, k, o);
        return py::dict(py::arg("k") = r.k, py::arg("m_k") = r.m_k, py::arg("steps") = r.steps,
                        py::arg("reached") = r.reached, py::arg("infinite") = r.infinite);
      },
      py::arg("params"), py::arg("quasi"), py::arg("k"), py::arg("threshold") = 0.5, py::arg("budget") = 1000000L);
  m.def(
      "slow_mixing_witness",
      [](const ModelParams& p, std::vector<long> quasi, const std::string& epsilon, long budget) {
        WitnessOptions o;
        o.budget = budget;
        const WitnessResult r = slow_mixing_witness(p, quasi, epsilon_sequence(epsilon), o);
        if (!r.found) return py::dict(py::arg("found") = false);
        return py::dict(py::arg("found") = true, py::arg("k") = r.witness.k, py::arg("d") = r.witness.d,
                        py::arg("m_k") = r.witness.m_k, py::arg("constant") = r.witness.constant);
      },
      py::arg("params"), py::arg("quasi"), py::arg("epsilon") = "inverse", py::arg("budget") = 10000L);

  m.def(
      "run_experiment",
      [](const std::string& kind, const std::string& config_text, const std::filesystem::path& out,
         bool overwrite) {
        const cli::RunResult r = cli::run_experiment(cli::parse_kind(kind), config_text, {out, overwrite});
        return py::make_tuple(r.exit_code, r.message, r.files);
      },
      py::arg("kind"), py::arg("config_text"), py::arg("out"), py::arg("overwrite") = false,
      "Runs a JSON config like the command-line tool; returns (exit_code, message, files)");
}
