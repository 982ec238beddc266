#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cdnlb/cost.hpp"
#include "cdnlb/dual.hpp"
#include "cdnlb/experiment.hpp"
#include "cdnlb/fastcontrol.hpp"
#include "cdnlb/greedy.hpp"
#include "cdnlb/io.hpp"

namespace py = pybind11;
using namespace cdnlb;

namespace {

Vector broadcast(const py::object& v, Index n, const char* name) {
  if (py::isinstance<py::float_>(v) || py::isinstance<py::int_>(v)) return Vector::Constant(n, v.cast<double>());
  Vector out = v.cast<Vector>();
  if (out.size() != n) throw Error(ErrorCode::DimensionMismatch, std::string(name) + " has the wrong length");
  return out;
}

py::dict report_dict(const ConvergenceReport& r) {
  py::dict d;
  py::list traj;
  for (const auto& row : r.trajectory) {
    py::dict e;
    e["k"] = row.k;
    e["cost"] = row.cost;
    e["dual_obj"] = row.dual_obj;
    e["grad_norm"] = row.grad_norm;
    e["mu"] = row.mu;
    e["x"] = row.x;
    e["S"] = row.s;
    e["S_obs"] = row.s_obs;
    traj.append(e);
  }
  d["trajectory"] = traj;
  d["grad_norms_sq"] = r.grad_norms_sq;
  d["best_cost"] = r.best_cost;
  d["best_x"] = r.best_x;
  d["best_k"] = r.best_k;
  d["best_dual"] = r.best_dual;
  d["iterations"] = r.iterations;
  d["converged"] = r.converged;
  d["norm_bound"] = r.norm_bound;
  d["bound_violations"] = r.bound_violations;
  d["mu"] = r.final_state.mu;
  return d;
}

py::dict trajectory_dict(const Trajectory& t) {
  py::dict d;
  d["t"] = t.t;
  d["x"] = t.x;
  d["S"] = t.s;
  d["converged"] = t.converged;
  d["residual"] = t.residual;
  return d;
}

Trajectory trajectory_from(const py::dict& d) {
  Trajectory t;
  t.t = d["t"].cast<std::vector<double>>();
  t.x = d["x"].cast<std::vector<Vector>>();
  t.s = d["S"].cast<std::vector<Vector>>();
  t.converged = d["converged"].cast<bool>();
  t.residual = d.contains("residual") ? d["residual"].cast<double>() : 0.0;
  t.clamp_eps = d.contains("clamp_eps") ? d["clamp_eps"].cast<double>() : 1e-12;
  return t;
}

OdeConfig ode_config(double beta_sens, double dt, double horizon, double steady_tol, long stride) {
  OdeConfig c;
  c.beta_sens = beta_sens;
  c.dt = dt;
  c.horizon = horizon;
  c.steady_tol = steady_tol;
  c.record_stride = stride;
  return c;
}

}  // namespace

PYBIND11_MODULE(_cdnlb, m) {
  m.doc() = "Load management for two-layer anycast CDNs";

  static py::exception<Error> exc(m, "CdnlbError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = exc;
      PyErr_SetObject(err.ptr(), py::make_tuple(e.what(), to_string(e.code()), e.row(), e.col()).ptr());
    }
  });

  py::class_<CorrelationMatrix>(m, "CorrelationMatrix")
      .def_static("identity", &CorrelationMatrix::identity)
      .def_property_readonly("matrix", &CorrelationMatrix::matrix)
      .def_property_readonly("size", &CorrelationMatrix::size);
  m.def("validate_correlation", &validate_correlation, py::arg("C"), py::arg("tol") = kRowSumTolerance);

  py::class_<SystemInstance>(m, "SystemInstance")
      .def(py::init([](const Matrix& c, const Vector& a, const py::object& t, const py::object& eta,
                       const py::object& theta, const py::object& d, const py::object& gamma_cost) {
             CorrelationMatrix cm = validate_correlation(c);
             const Index n = cm.size();
             CostParams k{broadcast(eta, n, "eta"), broadcast(theta, n, "theta"), broadcast(d, n, "d"),
                          broadcast(gamma_cost, n, "gamma_cost")};
             return SystemInstance(std::move(cm), a, broadcast(t, n, "capacities"), std::move(k));
           }),
           py::arg("C"), py::arg("arrivals"), py::arg("capacities"), py::arg("eta") = 1.0,
           py::arg("theta") = 10.0, py::arg("d") = 0.5, py::arg("gamma_cost") = 1.0)
      .def_property_readonly("C", [](const SystemInstance& s) { return s.correlation().matrix(); })
      .def_property_readonly("arrivals", &SystemInstance::arrivals)
      .def_property_readonly("capacities", &SystemInstance::capacities)
      .def_property_readonly("size", &SystemInstance::size)
      .def("load_matrix", &SystemInstance::load_matrix)
      .def("to_json", [](const SystemInstance& s) { return instance_to_json(s); });

  m.def("load_instance", [](const std::string& p) { return load_instance(p); });
  m.def("parse_instance", [](const std::string& text) { return parse_instance(text); });

  m.def("load_map", [](const SystemInstance& s, const Vector& x) {
    return load_map(s.correlation(), s.arrivals(), x);
  });
  m.def("effective_self_correlation", [](const Matrix& c, std::vector<Index> g1, std::vector<Index> g2) {
    return effective_self_correlation(validate_correlation(c), g1, g2);
  });

  m.def("proxy_cost", &proxy_cost, py::arg("eta"), py::arg("T"), py::arg("S"));
  m.def("offload_cost", [](double theta, double d, double gamma_cost, double a, double x) {
    return offload_cost(NodeCosts{1.0, theta, d, gamma_cost}, a, x);
  }, py::arg("theta"), py::arg("d"), py::arg("gamma_cost"), py::arg("A"), py::arg("x"));
  m.def("total_cost", &total_cost);
  m.def("operating_cost", &operating_cost);
  m.def("solve_sub_S", &solve_sub_S, py::arg("eta"), py::arg("T"), py::arg("mu"));
  m.def("solve_sub_x", py::overload_cast<double, double, double, double, double>(&solve_sub_x),
        py::arg("theta"), py::arg("d"), py::arg("gamma_cost"), py::arg("A"), py::arg("beta"));
  m.def("minimize_scalar_convex", &minimize_scalar_convex, py::arg("f"), py::arg("lo"), py::arg("hi"),
        py::arg("tol") = 1e-8);

  m.def("beta_projection", [](const Matrix& c, const Vector& mu) {
    return beta_projection(validate_correlation(c), mu);
  });
  m.def("step_size", &step_size, py::arg("epsilon"), py::arg("A_max"), py::arg("T_max"), py::arg("N"));
  m.def("supergradient_norm_bound", &supergradient_norm_bound);
  m.def("run_dual", [](const SystemInstance& s, double epsilon, long max_iters, double stop_tol, long stride) {
    DualOptions o;
    o.max_iters = max_iters;
    o.stop_tol = stop_tol;
    o.record_stride = stride;
    return report_dict(run_dual(s, StepSizePolicy::for_epsilon(epsilon, s), o));
  }, py::arg("instance"), py::arg("epsilon") = 0.1, py::arg("max_iters") = 20000, py::arg("stop_tol") = 0.0,
        py::arg("stride") = 1);
  m.def("reference_optimum", [](const SystemInstance& s, double tol, const std::string& mode) {
    if (mode != "grid" && mode != "pg") throw py::value_error("mode must be 'grid' or 'pg'");
    const ReferenceOptimum r =
        reference_optimum(s, tol, mode == "grid" ? OracleMode::Grid : OracleMode::ProjectedGradient);
    return py::make_tuple(r.x, r.cost);
  }, py::arg("instance"), py::arg("tol") = 1e-3, py::arg("mode") = "grid");

  m.def("generation_rates", [](double mu, const Vector& row, const Vector& col, double gamma) {
    std::vector<double> out;
    for (Rate r : generation_rates(mu, row, col, gamma)) out.push_back(static_cast<double>(r));
    return out;
  });
  m.def("deliver_exact", [](const Matrix& c, const Vector& mu, double gamma) {
    const CorrelationMatrix cm = validate_correlation(c);
    RateMatrix rates(cm.size());
    const Matrix& mm = cm.matrix();
    for (Index i = 0; i < cm.size(); ++i) {
      rates.set_row(i, generation_rates(mu(i), mm.row(i).transpose(), mm.col(i), gamma, i));
    }
    AnycastChannel ch = AnycastChannel::exact();
    std::vector<double> out;
    for (Rate r : ch.deliver(rates, cm)) out.push_back(static_cast<double>(r));
    return out;
  }, py::arg("C"), py::arg("mu"), py::arg("gamma") = 1.0);
  m.def("run_distributed", [](const SystemInstance& s, double epsilon, double gamma, long max_iters,
                              const std::string& mode, double scale, std::uint64_t seed, long stride) {
    DualOptions o;
    o.max_iters = max_iters;
    o.record_stride = stride;
    if (mode != "exact" && mode != "sampled") throw py::value_error("mode must be 'exact' or 'sampled'");
    ChannelConfig ch;
    ch.mode = mode == "exact" ? AnycastChannel::Mode::ExactRate : AnycastChannel::Mode::SampledPackets;
    ch.scale = scale;
    ch.seed = seed;
    const DistributedReport r = run_distributed(s, StepSizePolicy::for_epsilon(epsilon, s), gamma, o, ch);
    py::dict d = report_dict(r.dual);
    d["reception"] = r.reception;
    d["overhead"] = r.overhead;
    d["total_overhead"] = r.total_overhead;
    return d;
  }, py::arg("instance"), py::arg("epsilon") = 0.1, py::arg("gamma") = 1.0, py::arg("max_iters") = 20000,
        py::arg("mode") = "exact", py::arg("scale") = 1e6, py::arg("seed") = 1, py::arg("stride") = 1);

  m.def("vector_field", &vector_field, py::arg("instance"), py::arg("beta_sens"), py::arg("x"));
  m.def("jacobian", &jacobian, py::arg("instance"), py::arg("beta_sens"), py::arg("x"));
  m.def("integrate", [](const SystemInstance& s, const Vector& x0, double beta_sens, double dt, double horizon,
                        double steady_tol, long stride) {
    return trajectory_dict(integrate(s, ode_config(beta_sens, dt, horizon, steady_tol, stride), x0));
  }, py::arg("instance"), py::arg("x0"), py::arg("beta_sens") = 1.0, py::arg("dt") = 0.01,
        py::arg("horizon") = 1e4, py::arg("steady_tol") = 1e-8, py::arg("stride") = 1);
  m.def("classify_fixed_point", [](const SystemInstance& s, const Vector& x, double beta_sens) {
    const FixedPointReport r = classify_fixed_point(s, x, beta_sens);
    return py::make_tuple(to_string(r.classification), r.eigenvalues, r.residual);
  }, py::arg("instance"), py::arg("x"), py::arg("beta_sens") = 1.0);
  m.def("find_fixed_points", [](const SystemInstance& s) {
    py::list out;
    for (const auto& r : find_fixed_points(s)) out.append(py::make_tuple(r.x, to_string(r.classification)));
    return out;
  });
  m.def("stability_polytope_check", &stability_polytope_check);
  m.def("two_node_classify", [](double alpha, double beta, std::array<double, 2> a, std::array<double, 2> t) {
    const TwoNodeReport r = two_node_classify(alpha, beta, a, t);
    return py::make_tuple(to_string(r.verdict), r.uncontrollable);
  });
  m.def("detect_uncontrollable_overload", [](const py::dict& traj, const Vector& t, double x_tol, double s_tol) {
    return detect_uncontrollable_overload(trajectory_from(traj), t, x_tol, s_tol);
  }, py::arg("trajectory"), py::arg("capacities"), py::arg("x_tol") = 1e-3, py::arg("s_tol") = 1e-6);

  m.def("generate_instance", [](const std::string& config_json, std::size_t grid_index, long trial) {
    return generate_instance(parse_config(config_json), grid_index, trial);
  }, py::arg("config_json"), py::arg("grid_index"), py::arg("trial"));
  m.def("run_sweep", [](const std::string& config_json) {
    const ExperimentConfig cfg = parse_config(config_json);
    const SweepResult res = run_sweep(cfg);
    std::ostringstream os;
    write_summary_csv(os, res, cfg.seed);
    return os.str();
  }, py::arg("config_json"), "Runs a sweep and returns the summary CSV text.");
}
