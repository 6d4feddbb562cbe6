// Python extension: scenario I/O and the run / schedule / sweep / latency operations.

#include "detmac/cli.hpp"
#include "detmac/engine.hpp"
#include "detmac/error.hpp"
#include "detmac/harness.hpp"
#include "detmac/scenario.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace detmac;

namespace {

py::dict allocation_dict(const Allocation& a)
{
    py::dict d;
    d["owner"] = a.owner;
    d["peer"] = a.peer;
    d["slot"] = a.slot_index;
    d["level"] = a.level;
    d["phase"] = a.phase;
    d["origin"] = std::string(to_string(a.origin));
    d["direction"] = std::string(to_string(a.direction));
    return d;
}

py::list curve_list(const std::vector<SweepPoint>& curve)
{
    py::list out;
    for (const auto& p : curve)
        out.append(py::make_tuple(p.delta_db, p.trials, p.positives));
    return out;
}

py::list latency_list(const std::vector<NodeLatency>& v)
{
    py::list out;
    for (const auto& n : v) {
        py::dict d;
        d["node"] = n.node;
        d["peer"] = n.peer;
        d["level"] = n.level;
        d["bound_us"] = n.bound.us;
        d["max_us"] = n.max.us;
        d["mean_us"] = n.mean_us;
        d["frames"] = n.frames;
        out.append(d);
    }
    return out;
}

SimTime run_end(const Scenario& sc, std::optional<std::int64_t> superframes)
{
    return slot_start(sc.world.superframe, superframes.value_or(sc.run_superframes), 0);
}

py::dict schedule(const Scenario& sc)
{
    const ScheduleTable t = plan_schedule(sc.resolved_world());
    py::list allocs;
    for (const auto& a : t.allocations())
        allocs.append(allocation_dict(a));
    py::list violations;
    for (const auto& v : validate_schedule(t))
        violations.append(std::string(to_string(v.rule)) + ": " + v.detail);
    py::dict gbs;
    for (const auto& [coord, slot] : t.gbs_slots())
        gbs[py::int_(coord)] = slot;
    py::dict d;
    d["dump"] = dump_schedule(t);
    d["allocations"] = allocs;
    d["gbs"] = gbs;
    d["violations"] = violations;
    return d;
}

py::dict run(const Scenario& sc, std::optional<std::int64_t> superframes)
{
    World world(sc.resolved_world());
    const Trace t = world.run_until(run_end(sc, superframes));
    py::dict d;
    d["trace"] = trace_text(t);
    d["hash"] = trace_hash(t);
    d["events"] = t.events().size();
    d["exclusivity_violations"] = check_exclusivity(t);
    return d;
}

py::dict latency(const Scenario& sc, std::optional<std::int64_t> superframes)
{
    World world(sc.resolved_world());
    const Trace t = world.run_until(run_end(sc, superframes));
    const LatencyStats s = measure_gts_latency(t, sc.world.superframe);
    py::list violations;
    for (const auto& v : s.violations) {
        py::dict e;
        e["node"] = v.node;
        e["sequence"] = v.sequence;
        e["latency_us"] = v.latency.us;
        e["bound_us"] = v.bound.us;
        violations.append(e);
    }
    py::dict d;
    d["guaranteed"] = latency_list(s.guaranteed);
    d["best_effort"] = latency_list(s.best_effort);
    d["violations"] = violations;
    return d;
}

py::dict sweep(const Scenario& sc, std::optional<int> trials)
{
    SweepParams p = sc.sweep_params();
    if (trials)
        p.trials_per_point = *trials;
    const SweepResult r = run_sgts_sweep(sc.resolved_world(), p);
    py::dict d;
    d["curve_n1"] = curve_list(r.curve_n1);
    d["curve_n2"] = curve_list(r.curve_n2);
    d["hash"] = r.trace_hash;
    d["csv"] = sweep_table_csv(r);
    const double lo = sc.sweep ? sc.sweep->window_lo : 0.05;
    const double hi = sc.sweep ? sc.sweep->window_hi : 0.95;
    try {
        const WindowEstimate w = estimate_window(r, lo, hi);
        py::dict win;
        win["n1_lo"] = w.n1_lo;
        win["n1_hi"] = w.n1_hi;
        win["n2_lo"] = w.n2_lo;
        win["n2_hi"] = w.n2_hi;
        win["width_db"] = w.width_db;
        win["crossover_db"] = w.crossover_db;
        d["window"] = win;
    } catch (const Error& e) {
        if (e.code() != Errc::NonMonotone)
            throw;
        d["window"] = py::none();
    }
    return d;
}

py::tuple cli(const std::vector<std::string>& args)
{
    std::vector<const char*> argv{"detmac"};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    return py::make_tuple(code, out.str(), err.str());
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Deterministic beacon-enabled MAC simulator";

    static py::exception<Error> error(m, "DetmacError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p)
                std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
            exc.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(error.ptr(), exc.ptr());
        }
    });

    py::class_<Scenario>(m, "Scenario")
        .def_property(
            "seed", [](const Scenario& s) { return s.world.seed; },
            [](Scenario& s, std::uint64_t v) { s.world.seed = v; })
        .def_readwrite("run_superframes", &Scenario::run_superframes)
        .def_property_readonly("node_ids",
                               [](const Scenario& s) {
                                   std::vector<NodeId> ids;
                                   for (const auto& n : s.world.nodes)
                                       ids.push_back(n.id);
                                   return ids;
                               })
        .def_property_readonly("has_sweep", [](const Scenario& s) { return s.sweep.has_value(); })
        .def("serialize", &serialize_scenario)
        .def("__eq__", [](const Scenario& a, const Scenario& b) { return a == b; });

    m.def("parse_scenario", &parse_scenario, py::arg("text"));
    m.def("load_scenario", &load_scenario, py::arg("path"));
    m.def("beacon_interval_us", [](int bo) { return beacon_interval(SuperframeConfig{bo, 0, 0, 16, 0, 0}).us; },
          py::arg("bo"));
    m.def("latency_bound_us", [](const Scenario& s, int level) { return latency_bound(s.world.superframe, level).us; },
          py::arg("scenario"), py::arg("level"));
    m.def("schedule", &schedule, py::arg("scenario"));
    m.def("run", &run, py::arg("scenario"), py::arg("superframes") = py::none());
    m.def("latency", &latency, py::arg("scenario"), py::arg("superframes") = py::none());
    m.def("sweep", &sweep, py::arg("scenario"), py::arg("trials") = py::none());
    m.def("cli", &cli, py::arg("args"));
}
