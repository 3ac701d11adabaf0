// SPDX-License-Identifier: Apache-2.0
#include "sweepplan/analysis.hpp"
#include "sweepplan/budget.hpp"
#include "sweepplan/error.hpp"
#include "sweepplan/fitting.hpp"
#include "sweepplan/io.hpp"
#include "sweepplan/mixture.hpp"
#include "sweepplan/search_space.hpp"
#include "sweepplan/surrogate.hpp"
#include "sweepplan/train_config.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace sweepplan;

namespace {

SearchRanges ranges_for(const std::optional<std::vector<int>>& compute_factors) {
    auto r = SearchRanges::defaults();
    return compute_factors ? r.restricted_to(*compute_factors) : r;
}

std::vector<SetupSpec> catalogue(const std::optional<std::vector<std::string>>& ids) {
    if (!ids) return enumerate_all(SearchRanges::defaults());
    std::vector<SetupSpec> out;
    out.reserve(ids->size());
    for (const auto& id : *ids) out.push_back(parse_setup_id(id));
    return out;
}

SurrogateParams params_from(const std::string& json_text) {
    if (json_text.empty()) return {};
    return surrogate_from_json(nlohmann::json::parse(json_text));
}

} // namespace

PYBIND11_MODULE(_sweepplan, m) {
    m.doc() = "sweepplan core bindings (JSON text in, JSON text out)";

    static py::exception<Error> exc(m, "SweepplanError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(exc.ptr(), (std::string(to_string(e.code())) + ": " + e.what()).c_str());
        }
    });

    m.def("reference_constants", [] {
        const auto& r = reference_constants();
        return py::make_tuple(r.compute, r.target_tokens, r.model_scale);
    });

    m.def("enumerate_setups", [](std::optional<std::vector<int>> compute_factors, bool single_stage) {
        const auto ranges = ranges_for(compute_factors);
        const auto setups = single_stage ? enumerate_single_stage(ranges) : enumerate_all(ranges);
        std::ostringstream os;
        write_setups_jsonl(os, setups);
        return os.str();
    }, py::arg("compute_factors") = py::none(), py::arg("single_stage") = false);

    m.def("model_scale", [](int f_M) { return shape_for_factor(f_M).flops_per_token; }, py::arg("f_M"));

    m.def("global_batch_seqs", [](double compute, int f_M, int devices) {
        return batch_config(compute, shape_for_factor(f_M), devices).global_batch_seqs;
    }, py::arg("compute"), py::arg("f_M"), py::arg("devices") = kDefaultDevices);

    m.def("plan", [](const std::string& setup_id, int devices, std::uint64_t seed) {
        const auto setup = parse_setup_id(setup_id);
        PlanOptions opts;
        opts.devices = devices;
        const auto tp = build_training_plan(setup, opts);
        Json j;
        j["plan"] = plan_to_json(tp);
        j["schedule"] = schedule_to_json(build_schedule(setup.derived, setup.split, tp.batch.global_batch_tokens, seed));
        return j.dump();
    }, py::arg("setup_id"), py::arg("devices") = kDefaultDevices, py::arg("seed") = 0);

    m.def("simulate", [](std::optional<std::vector<std::string>> ids, const std::string& params, const std::string& pair) {
        const auto setups = catalogue(ids);
        std::ostringstream os;
        write_results_csv(os, generate_dataset(setups, params_from(params), pair));
        return os.str();
    }, py::arg("setup_ids") = py::none(), py::arg("params") = "", py::arg("pair") = "synthetic");

    m.def("crossing_fixture", [] { return surrogate_to_json(SurrogateParams::crossing_fixture()).dump(); });

    m.def("analyze", [](const std::string& results_csv, std::optional<std::vector<std::string>> ids, double epsilon) {
        const auto setups = catalogue(ids);
        std::istringstream in(results_csv);
        const auto rep = ingest_csv(in, setups);
        return report_to_json(analyze(rep.results, epsilon), rep).dump();
    }, py::arg("results_csv"), py::arg("setup_ids") = py::none(), py::arg("epsilon") = 0.0);

    m.def("fit_epoch_quadratic", [](const std::vector<double>& f_k, const std::vector<double>& loss) {
        if (f_k.size() != loss.size()) throw Error(ErrorCode::Validation, "f_k and loss lengths differ");
        std::vector<EpochPoint> pts;
        for (std::size_t i = 0; i < f_k.size(); ++i) pts.push_back({f_k[i], loss[i]});
        const auto fit = fit_epoch_quadratic(pts);
        py::dict d;
        d["a2"] = fit.a2;
        d["a1"] = fit.a1;
        d["a0"] = fit.a0;
        d["f_k_star"] = fit.f_k_star;
        d["k_star"] = fit.k_star;
        d["convex"] = fit.convex;
        d["extrapolated"] = fit.extrapolated;
        d["rss"] = fit.rss;
        return d;
    }, py::arg("f_k"), py::arg("loss"));

    m.def("fit_ratio_power_law", [](const std::vector<std::tuple<double, double, double, double>>& points) {
        std::vector<RatioPoint> pts;
        for (const auto& [M, D, r, L] : points) pts.push_back({M, D, r, L});
        return ratio_to_json(fit_ratio_power_law(pts)).dump();
    }, py::arg("points"));

    m.def("fit_kstar", [](const std::vector<std::tuple<double, double, double>>& curves, const std::string& approach) {
        std::vector<KStarCurvePoint> pts;
        for (const auto& [c, f_D, h] : curves) pts.push_back({c, f_D, h});
        return kstar_to_json(fit_kstar_model(pts, parse_approach(approach))).dump();
    }, py::arg("curves"), py::arg("approach") = "mono-1stage");

    m.def("predict_kstar", [](const std::string& model_json, double compute, double target_tokens, bool round_pow2) {
        return predict_kstar(kstar_from_json(nlohmann::json::parse(model_json)), compute, target_tokens, round_pow2);
    }, py::arg("model"), py::arg("compute"), py::arg("target_tokens"), py::arg("round") = false);
}
