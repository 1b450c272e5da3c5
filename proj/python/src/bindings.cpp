#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "hpf/breaks.hpp"
#include "hpf/diagnostics.hpp"
#include "hpf/pipeline.hpp"
#include "hpf/scenario.hpp"

namespace py = pybind11;
using namespace hpf;

namespace {

tskit::ArimaSpec make_spec(py::tuple order, int seasonal_q, bool intercept) {
  if (order.size() != 3) throw ValidationError("order must be (p, d, q)");
  tskit::ArimaSpec s{order[0].cast<int>(), order[1].cast<int>(), order[2].cast<int>(), seasonal_q, 12, intercept};
  s.validate();
  return s;
}

Matrix exog_or_empty(const std::optional<Matrix>& x, std::size_t n) {
  return x ? *x : Matrix(static_cast<Eigen::Index>(n), 0);
}

py::dict fit_dict(const tskit::ArimaFit& f) {
  py::dict d;
  d["order"] = py::make_tuple(f.spec.p, f.spec.d, f.spec.q);
  d["seasonal_q"] = f.spec.seasonal_q;
  d["phi"] = f.params.arma.phi;
  d["theta"] = f.params.arma.theta;
  d["seasonal_theta"] = f.params.arma.seasonal_theta;
  d["intercept"] = f.params.intercept;
  d["beta"] = f.params.beta;
  d["sigma2"] = f.params.sigma2;
  d["param_names"] = f.param_names;
  d["std_errors"] = f.std_errors;
  d["loglik"] = f.loglik;
  d["aicc"] = f.aicc;
  d["nobs"] = f.nobs;
  d["residuals"] = f.residuals;
  d["converged"] = f.converged;
  d["message"] = f.message;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Regional house-price factor model: time-series kit, scenarios, breaks and the pipeline driver";
  m.attr("__version__") = HPF_VERSION;

  static py::exception<Error> err(m, "HpfError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::handle(err.ptr())(e.what());
      inst.attr("code") = e.code();
      PyErr_SetObject(err.ptr(), inst.ptr());
    }
  });

  m.def(
      "loglik",
      [](const std::vector<double>& y, py::tuple order, std::vector<double> phi, std::vector<double> theta,
         double seasonal_theta, double intercept, double sigma2, const std::optional<Matrix>& exog,
         std::vector<double> beta, bool with_intercept) {
        const auto spec = make_spec(order, seasonal_theta != 0.0 ? 1 : 0, with_intercept);
        tskit::ArimaParams p;
        p.arma = {std::move(phi), std::move(theta), seasonal_theta};
        p.intercept = intercept;
        p.sigma2 = sigma2;
        p.beta = std::move(beta);
        return tskit::loglik(spec, p, y, exog_or_empty(exog, y.size()));
      },
      py::arg("y"), py::arg("order"), py::arg("phi") = std::vector<double>{}, py::arg("theta") = std::vector<double>{},
      py::arg("seasonal_theta") = 0.0, py::arg("intercept") = 0.0, py::arg("sigma2") = 1.0,
      py::arg("exog") = py::none(), py::arg("beta") = std::vector<double>{}, py::arg("with_intercept") = true,
      "Exact Gaussian log-likelihood of a regression with ARIMA errors");

  m.def(
      "fit_arima",
      [](const std::vector<double>& y, py::tuple order, int seasonal_q, bool intercept,
         const std::optional<Matrix>& exog) {
        return fit_dict(tskit::fit(make_spec(order, seasonal_q, intercept), y, exog_or_empty(exog, y.size())));
      },
      py::arg("y"), py::arg("order"), py::arg("seasonal_q") = 0, py::arg("intercept") = true,
      py::arg("exog") = py::none(), "Maximum-likelihood fit; returns a dict of estimates");

  m.def(
      "forecast_sd",
      [](py::tuple order, std::vector<double> phi, std::vector<double> theta, double sigma2, int h) {
        tskit::ArimaParams p;
        p.arma = {std::move(phi), std::move(theta), 0.0};
        p.sigma2 = sigma2;
        const auto fan = tskit::forecast_fan(make_spec(order, 0, true), p, h);
        std::vector<double> sd;
        for (int k = 1; k <= h; ++k) sd.push_back(fan.sd_at(k));
        return sd;
      },
      py::arg("order"), py::arg("phi"), py::arg("theta"), py::arg("sigma2"), py::arg("h"),
      "Forecast standard deviations for horizons 1..h from known parameters");

  m.def("ar_root_moduli", [](const std::vector<double>& phi) { return tskit::ar_root_moduli(phi); }, py::arg("phi"));

  m.def(
      "ljung_box",
      [](const std::vector<double>& x, int lag) {
        const auto r = tskit::ljung_box(x, lag);
        return py::make_tuple(r.statistic, r.p_value);
      },
      py::arg("x"), py::arg("lag"), "(Q, p-value)");

  m.def(
      "adf",
      [](const std::vector<double>& y, int max_lags) {
        const auto r = tskit::adf_test(y, max_lags);
        py::dict d;
        d["statistic"] = r.statistic;
        d["p_value"] = r.p_value;
        d["used_lag"] = r.used_lag;
        d["nobs"] = r.nobs;
        return d;
      },
      py::arg("y"), py::arg("max_lags") = 12);

  m.def(
      "binary_segmentation",
      [](const std::vector<double>& y, int n_bkps, const std::string& cost, int min_size, bool refine) {
        breaks::Cost c;
        if (cost == "linear") c = breaks::Cost::linear_trend;
        else if (cost == "mean") c = breaks::Cost::mean_shift;
        else throw ValidationError("cost must be 'linear' or 'mean'");
        return breaks::binary_segmentation(y, n_bkps, c, min_size, refine).breakpoints;
      },
      py::arg("y"), py::arg("n_bkps"), py::arg("cost") = "linear", py::arg("min_size") = 12, py::arg("refine") = true,
      "Breakpoints as first indexes of new segments");

  m.def("scenario_map", &scenario::scenario_map, py::arg("f_M"), py::arg("beta"));
  m.def("doubling_time", &scenario::doubling_time, py::arg("T_M"), py::arg("beta"));
  m.def(
      "uncertainty_band",
      [](double lambda, double gamma, double s_ps, double s_l, double s_eps) {
        const auto b = scenario::uncertainty_band(lambda, gamma, s_ps, s_l, s_eps);
        py::dict d;
        d["x95_factors"] = b.x95_factors;
        d["x95_total"] = b.x95_total;
        d["share_mining"] = b.share_mining;
        d["share_lifestyle"] = b.share_lifestyle;
        d["share_idio"] = b.share_idio;
        return d;
      },
      py::arg("lambda_"), py::arg("gamma"), py::arg("sigma_ps"), py::arg("sigma_l"), py::arg("sigma_eps") = 0.0);

  m.def(
      "run",
      [](const std::string& command, const std::vector<std::string>& sets, const std::string& output_dir,
         const std::string& run_id, int threads) {
        pipeline::Config cfg;
        for (const auto& s : sets) cfg.set(s);
        cfg.output_dir = output_dir;
        cfg.run_id = run_id;
        cfg.threads = threads;
        std::ostringstream log;
        {
          py::gil_scoped_release release;
          pipeline::run(command, cfg, log);
        }
        return py::make_tuple(cfg.run_dir().string(), log.str());
      },
      py::arg("command"), py::arg("sets") = std::vector<std::string>{}, py::arg("output_dir") = "out",
      py::arg("run_id") = "default", py::arg("threads") = 1,
      "Runs a pipeline command; returns (run directory, log text)");

  m.def("config_keys", [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& k : pipeline::key_docs()) out.emplace_back(k.key, k.description);
    return out;
  });
}
