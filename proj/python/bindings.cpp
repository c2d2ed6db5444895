#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <span>
#include <vector>

#include "kbo/core.hpp"
#include "kbo/diagnostics.hpp"
#include "kbo/dynamics.hpp"
#include "kbo/estimators.hpp"
#include "kbo/experiment.hpp"
#include "kbo/mlbench.hpp"
#include "kbo/objective.hpp"
#include "kbo/solver.hpp"

namespace py = pybind11;
using namespace kbo;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vec(const Array& a) { return {a.data(), a.data() + a.size()}; }

py::array_t<double> to_array(std::span<const double> v) { return py::array_t<double>(v.size(), v.data()); }

py::array_t<double> to_matrix(std::span<const double> v, std::size_t dim) {
  const auto rows = static_cast<py::ssize_t>(dim ? v.size() / dim : 0);
  py::array_t<double> out({rows, static_cast<py::ssize_t>(dim)});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

ParticleEnsemble ensemble_from(const Array& positions) {
  if (positions.ndim() != 2) throw ConfigError("positions must be a 2-D array (N, d)");
  return ParticleEnsemble(to_vec(positions), static_cast<std::size_t>(positions.shape(1)));
}

// Runs release the GIL; Python objectives take it back per evaluation.
Objective python_objective(std::string name, std::size_t dim, py::function fn, std::vector<double> lo,
                           std::vector<double> hi) {
  auto holder = std::make_shared<py::function>(std::move(fn));
  auto eval = [holder](std::span<const double> x) {
    py::gil_scoped_acquire gil;
    return (*holder)(to_array(x)).cast<double>();
  };
  return Objective(std::move(name), dim, eval, std::move(lo), std::move(hi));
}

py::dict trace_dict(const RunResult& r) {
  std::vector<double> step, time, count, variance, best;
  std::vector<double> valpha;
  for (const auto& row : r.trace) {
    step.push_back(static_cast<double>(row.step));
    time.push_back(row.time);
    count.push_back(static_cast<double>(row.count));
    variance.push_back(row.variance);
    best.push_back(row.best_energy);
    valpha.insert(valpha.end(), row.valpha.begin(), row.valpha.end());
  }
  py::dict d;
  d["step"] = to_array(step);
  d["time"] = to_array(time);
  d["count"] = to_array(count);
  d["variance"] = to_array(variance);
  d["best_energy"] = to_array(best);
  d["valpha"] = to_matrix(valpha, r.dim);
  return d;
}

}  // namespace

PYBIND11_MODULE(pykbo, m) {
  m.doc() = "Kinetic binary-interaction optimizer";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::enum_<Diffusion>(m, "Diffusion")
      .value("isotropic", Diffusion::isotropic)
      .value("anisotropic", Diffusion::anisotropic);
  py::enum_<Pairing>(m, "Pairing")
      .value("random_partner", Pairing::random_partner)
      .value("permutation", Pairing::permutation);
  py::enum_<Driver>(m, "Driver").value("nanbu", Driver::nanbu).value("bird", Driver::bird);
  py::enum_<Termination>(m, "Termination")
      .value("max_iters", Termination::max_iters)
      .value("stalled", Termination::stalled);

  py::class_<ReductionConfig>(m, "ReductionConfig")
      .def(py::init<>())
      .def_readwrite("mu", &ReductionConfig::mu)
      .def_readwrite("t_r", &ReductionConfig::t_r)
      .def_readwrite("n_min", &ReductionConfig::n_min);

  py::class_<KboConfig>(m, "KboConfig")
      .def(py::init<>())
      .def_readwrite("lambda1", &KboConfig::lambda1)
      .def_readwrite("lambda2", &KboConfig::lambda2)
      .def_readwrite("sigma1", &KboConfig::sigma1)
      .def_readwrite("sigma2", &KboConfig::sigma2)
      .def_readwrite("alpha", &KboConfig::alpha)
      .def_readwrite("beta", &KboConfig::beta)
      .def_readwrite("epsilon", &KboConfig::epsilon)
      .def_readwrite("diffusion", &KboConfig::diffusion)
      .def_readwrite("n_stall", &KboConfig::n_stall)
      .def_readwrite("delta_stall", &KboConfig::delta_stall)
      .def_readwrite("max_iters", &KboConfig::max_iters)
      .def_readwrite("reduction", &KboConfig::reduction)
      .def_readwrite("seed", &KboConfig::seed)
      .def_readwrite("rescale", &KboConfig::rescale)
      .def_readwrite("pairing", &KboConfig::pairing)
      .def_readwrite("record_every", &KboConfig::record_every)
      .def("validate", &KboConfig::validate)
      .def("warnings", &KboConfig::warnings);

  py::class_<InitLaw>(m, "InitLaw")
      .def_static("uniform", &InitLaw::uniform, py::arg("lo"), py::arg("hi"))
      .def_static("gaussian", &InitLaw::gaussian, py::arg("mean"), py::arg("std"));

  m.def(
      "ensemble_init",
      [](std::size_t n, std::size_t dim, const InitLaw& law, std::uint64_t seed) {
        const auto e = ensemble_init(n, dim, law, seed);
        return to_matrix(e.positions(), dim);
      },
      py::arg("n"), py::arg("dim"), py::arg("law"), py::arg("seed"), "Initial particles as an (n, dim) array.");

  m.def(
      "rescale_to_domain",
      [](const Array& u, const Array& lo, const Array& hi) {
        return to_array(rescale_to_domain(to_vec(u), to_vec(lo), to_vec(hi)));
      },
      py::arg("u"), py::arg("lo"), py::arg("hi"));
  m.def(
      "rescale_from_domain",
      [](const Array& x, const Array& lo, const Array& hi) {
        return to_array(rescale_from_domain(to_vec(x), to_vec(lo), to_vec(hi)));
      },
      py::arg("x"), py::arg("lo"), py::arg("hi"));

  py::class_<Objective>(m, "Objective")
      .def(py::init(&python_objective), py::arg("name"), py::arg("dim"), py::arg("fn"), py::arg("lower"),
           py::arg("upper"))
      .def("__call__", [](const Objective& o, const Array& x) { return o(to_vec(x)); })
      .def_property_readonly("name", &Objective::name)
      .def_property_readonly("dim", &Objective::dim)
      .def_property_readonly("lower", [](const Objective& o) { return to_array(o.lower()); })
      .def_property_readonly("upper", [](const Objective& o) { return to_array(o.upper()); })
      .def_property_readonly("minimizer",
                             [](const Objective& o) -> py::object {
                               if (!o.minimizer()) return py::none();
                               return to_array(*o.minimizer());
                             })
      .def_property_readonly("min_value", [](const Objective& o) { return o.min_value(); })
      .def("set_minimizer", [](Objective& o, const Array& x, double value) { o.set_minimizer(to_vec(x), value); });

  m.def("benchmark_names", &benchmark_names);
  m.def(
      "benchmark",
      [](const std::string& name, std::size_t dim, std::optional<std::uint64_t> shift_seed) {
        return benchmark(name, dim, BenchmarkOptions{shift_seed});
      },
      py::arg("name"), py::arg("dim"), py::arg("shift_seed") = py::none());

  py::class_<SampleObjective>(m, "SampleObjective")
      .def(py::init<std::size_t, double, std::uint64_t>(), py::arg("n"), py::arg("noise_std"), py::arg("seed"))
      .def("value", &SampleObjective::value)
      .def("gradient", &SampleObjective::gradient)
      .def_property_readonly("minimizer", &SampleObjective::minimizer)
      .def("as_objective", &SampleObjective::as_objective);

  m.def(
      "consensus_point",
      [](const Array& positions, const Array& energies, double alpha) {
        if (positions.ndim() != 2) throw ConfigError("positions must be a 2-D array (N, d)");
        const auto dim = static_cast<std::size_t>(positions.shape(1));
        return to_array(consensus_point(to_vec(positions), to_vec(energies), dim, alpha).point);
      },
      py::arg("positions"), py::arg("energies"), py::arg("alpha"));
  m.def(
      "pair_best",
      [](const Array& v, const Array& v_star, double e_v, double e_star, double beta) {
        return to_array(pair_best(to_vec(v), to_vec(v_star), e_v, e_star, beta));
      },
      py::arg("v"), py::arg("v_star"), py::arg("e_v"), py::arg("e_star"), py::arg("beta"));
  m.def("gamma_weight", &gamma_weight, py::arg("e_v"), py::arg("e_star"), py::arg("beta"));

  m.def(
      "collide",
      [](const Array& v, const Array& v_star, double e_v, double e_star, const Array& v_alpha,
         const KboConfig& cfg, std::uint64_t seed, std::uint64_t stream) {
        RngStream rng(seed, stream);
        auto r = collide(to_vec(v), to_vec(v_star), e_v, e_star, to_vec(v_alpha), CollisionParams::from(cfg), rng);
        return py::make_tuple(to_array(r.v), to_array(r.v_star));
      },
      py::arg("v"), py::arg("v_star"), py::arg("e_v"), py::arg("e_star"), py::arg("v_alpha"), py::arg("cfg"),
      py::arg("seed"), py::arg("stream") = 0, "Binary collision; returns (v', v*').");

  py::class_<RunResult>(m, "RunResult")
      .def_property_readonly("final_estimate", [](const RunResult& r) { return to_array(r.final_estimate); })
      .def_property_readonly("final_positions",
                             [](const RunResult& r) { return to_matrix(r.final_positions, r.dim); })
      .def_readonly("termination", &RunResult::termination)
      .def_readonly("wall_steps", &RunResult::wall_steps)
      .def_readonly("iterations", &RunResult::iterations)
      .def_readonly("avg_particles", &RunResult::avg_particles)
      .def_property_readonly("trace", &trace_dict);

  m.def(
      "run_nanbu",
      [](const KboConfig& cfg, const Objective& obj, const Array& positions) {
        auto init = ensemble_from(positions);
        py::gil_scoped_release release;
        return run_nanbu(cfg, obj, std::move(init));
      },
      py::arg("cfg"), py::arg("objective"), py::arg("positions"));
  m.def(
      "run_bird",
      [](const KboConfig& cfg, const Objective& obj, const Array& positions) {
        auto init = ensemble_from(positions);
        py::gil_scoped_release release;
        return run_bird(cfg, obj, std::move(init));
      },
      py::arg("cfg"), py::arg("objective"), py::arg("positions"));

  m.def(
      "check_success",
      [](const Array& valpha, const Array& x_star) { return check_success(to_vec(valpha), to_vec(x_star)); },
      py::arg("valpha"), py::arg("x_star"));
  m.def("reduced_count", &reduced_count, py::arg("n"), py::arg("s_prev"), py::arg("s_hat"), py::arg("mu"),
        py::arg("n_min"));

  py::class_<TheoryInputs>(m, "TheoryInputs")
      .def(py::init<>())
      .def_readwrite("e_max", &TheoryInputs::e_max)
      .def_readwrite("e_min", &TheoryInputs::e_min)
      .def_readwrite("c1", &TheoryInputs::c1)
      .def_readwrite("c2", &TheoryInputs::c2)
      .def_readwrite("v0", &TheoryInputs::v0)
      .def_readwrite("log_w0", &TheoryInputs::log_w0);
  py::class_<TheoryParams>(m, "TheoryParams")
      .def_readonly("C_beta", &TheoryParams::C_beta)
      .def_readonly("C_alpha", &TheoryParams::C_alpha)
      .def_readonly("kappa", &TheoryParams::kappa)
      .def_readonly("mu", &TheoryParams::mu)
      .def_readonly("nu", &TheoryParams::nu)
      .def_readonly("micro_rate", &TheoryParams::micro_rate)
      .def_readonly("macro_rate", &TheoryParams::macro_rate)
      .def_readonly("micro_condition", &TheoryParams::micro_condition)
      .def_readonly("macro_condition", &TheoryParams::macro_condition);
  m.def("theory_params", &theory_params, py::arg("cfg"), py::arg("dim"), py::arg("inputs"));
  m.def(
      "moments",
      [](const Array& positions) {
        const auto r = moments(ensemble_from(positions));
        return py::make_tuple(to_array(r.mean), r.variance, r.second_moment);
      },
      py::arg("positions"), "Returns (mean, variance, second_moment).");

  py::class_<ExperimentSpec>(m, "ExperimentSpec")
      .def(py::init<>())
      .def_readwrite("objective", &ExperimentSpec::objective)
      .def_readwrite("dim", &ExperimentSpec::dim)
      .def_readwrite("shift_seed", &ExperimentSpec::shift_seed)
      .def_readwrite("driver", &ExperimentSpec::driver)
      .def_readwrite("kbo", &ExperimentSpec::kbo)
      .def_readwrite("particles", &ExperimentSpec::particles)
      .def_readwrite("runs", &ExperimentSpec::runs)
      .def_readwrite("init", &ExperimentSpec::init)
      .def_readwrite("output_dir", &ExperimentSpec::output_dir)
      .def_readwrite("write_traces", &ExperimentSpec::write_traces)
      .def("validate", &ExperimentSpec::validate);
  m.def("parse_experiment", &parse_experiment, py::arg("json_text"));
  m.def("run_seed", &run_seed, py::arg("master"), py::arg("index"));

  py::class_<Summary>(m, "Summary")
      .def_readonly("runs", &Summary::runs)
      .def_readonly("successes", &Summary::successes)
      .def_readonly("success_rate", &Summary::success_rate)
      .def_readonly("mean_iters", &Summary::mean_iters)
      .def_readonly("mean_iters_successful", &Summary::mean_iters_successful)
      .def_readonly("mean_l2_error", &Summary::mean_l2_error)
      .def_readonly("mean_final_fval", &Summary::mean_final_fval)
      .def_readonly("mean_avg_particles", &Summary::mean_avg_particles)
      .def_readonly("terminations", &Summary::terminations);
  m.def(
      "run_experiment",
      [](const ExperimentSpec& spec) {
        py::gil_scoped_release release;
        return run_experiment(spec);
      },
      py::arg("spec"));

  py::class_<DatasetPair>(m, "DatasetPair")
      .def_property_readonly("train_size", [](const DatasetPair& d) { return d.train.size(); })
      .def_property_readonly("validation_size", [](const DatasetPair& d) { return d.validation.size(); });
  m.def("synth_blobs", &synth_blobs, py::arg("classes"), py::arg("n_per_class"), py::arg("features"),
        py::arg("sep"), py::arg("seed"));

  py::class_<SgdConfig>(m, "SgdConfig")
      .def(py::init<>())
      .def_readwrite("gamma", &SgdConfig::gamma)
      .def_readwrite("batch", &SgdConfig::batch)
      .def_readwrite("epochs", &SgdConfig::epochs)
      .def_readwrite("tol", &SgdConfig::tol);
  py::class_<KboTrainConfig>(m, "KboTrainConfig")
      .def(py::init<>())
      .def_readwrite("kbo", &KboTrainConfig::kbo)
      .def_readwrite("particles", &KboTrainConfig::particles)
      .def_readwrite("particle_batch", &KboTrainConfig::particle_batch)
      .def_readwrite("data_batch", &KboTrainConfig::data_batch)
      .def_readwrite("epochs", &KboTrainConfig::epochs)
      .def_readwrite("sweeps", &KboTrainConfig::sweeps)
      .def_readwrite("global_consensus", &KboTrainConfig::global_consensus)
      .def_readwrite("init_std", &KboTrainConfig::init_std);
  py::class_<TrainResult>(m, "TrainResult")
      .def_property_readonly("params", [](const TrainResult& r) { return to_array(r.params.flat()); })
      .def_readonly("accuracy", &TrainResult::accuracy)
      .def_readonly("loss", &TrainResult::loss)
      .def_readonly("final_particles", &TrainResult::final_particles)
      .def_readonly("avg_particles", &TrainResult::avg_particles);
  m.def(
      "kbo_train",
      [](const DatasetPair& data, const KboTrainConfig& cfg) {
        py::gil_scoped_release release;
        return kbo_train(data.train, data.validation, cfg);
      },
      py::arg("data"), py::arg("cfg"));
  m.def(
      "sgd_train",
      [](const DatasetPair& data, const SgdConfig& cfg, std::uint64_t seed, double init_std) {
        py::gil_scoped_release release;
        return sgd_train(data.train, data.validation, cfg, seed, init_std);
      },
      py::arg("data"), py::arg("cfg"), py::arg("seed"), py::arg("init_std") = 1.0);
}
