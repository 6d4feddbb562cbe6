#include "detmac/cli.hpp"

#include "detmac/error.hpp"
#include "detmac/harness.hpp"
#include "detmac/scenario.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace detmac {

namespace {

enum class Format { Trace, Summary, Table };

struct Options {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::optional<Format> format;
};

struct Output {
    std::map<std::string, std::string> files; ///< file name -> contents, written under --out
    std::string stdout_text;                  ///< printed when --out is absent
    int status = kExitOk;
};

std::string fmt(double v, int digits = 3)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string hex(std::uint64_t v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::vector<std::string> config_header(const Scenario& sc, std::string_view command)
{
    std::vector<std::string> lines{"detmac " + std::string(command), "resolved scenario:"};
    std::istringstream in(serialize_scenario(sc));
    for (std::string line; std::getline(in, line);)
        lines.push_back("  " + line);
    return lines;
}

std::string commented(const std::vector<std::string>& lines)
{
    std::string out;
    for (const auto& l : lines)
        out += "# " + l + '\n';
    return out;
}

SimTime run_end(const Scenario& sc)
{
    return slot_start(sc.world.superframe, sc.run_superframes, 0);
}

// --- run --------------------------------------------------------------------------

Output cmd_run(const Scenario& sc, Format format)
{
    const WorldSpec spec = sc.resolved_world();
    World world(spec);
    Trace trace = world.run_until(run_end(sc));
    trace.header() = config_header(sc, "run");

    std::vector<std::string> problems = check_exclusivity(trace);
    for (const auto& a : world.schedule_history())
        for (const auto& v : validate_schedule(a.table))
            problems.push_back("schedule activated at superframe " + std::to_string(a.superframe) + ": "
                               + std::string(to_string(v.rule)) + " " + v.detail);

    std::map<std::string_view, int> counts;
    for (const auto& e : trace.events())
        ++counts[e.category()];

    std::ostringstream summary;
    summary << commented(trace.header());
    summary << "superframes: " << sc.run_superframes << '\n';
    summary << "simulated_us: " << run_end(sc).us << '\n';
    summary << "trace_hash: " << hex(trace_hash(trace)) << '\n';
    summary << "events:\n";
    for (const auto& [category, n] : counts)
        summary << "  " << category << ": " << n << '\n';
    summary << "pending_data_frames: " << world.pending_data().size() << '\n';
    summary << "violations: " << problems.size() << '\n';
    for (const auto& p : problems)
        summary << "  " << p << '\n';

    std::ostringstream table;
    table << "node,role,dozing_us,listening_us,transmitting_us,waking_us,wakeups,charge_uas\n";
    for (const TraceEvent* e : trace.select<EnergyRecord>()) {
        const auto& r = std::get<EnergyRecord>(e->payload);
        table << e->node << ',' << to_string(world.node(e->node).role()) << ',' << r.time[0].us << ','
              << r.time[1].us << ',' << r.time[2].us << ',' << r.time[3].us << ',' << r.wakeups << ','
              << fmt(r.charge_uas) << '\n';
    }

    Output out;
    out.files["trace.txt"] = trace_text(trace);
    out.files["summary.txt"] = summary.str();
    out.files["energy.csv"] = table.str();
    out.stdout_text = format == Format::Trace     ? out.files["trace.txt"]
                      : format == Format::Summary ? out.files["summary.txt"]
                                                  : out.files["energy.csv"];
    out.status = problems.empty() ? kExitOk : kExitViolations;
    return out;
}

// --- schedule ---------------------------------------------------------------------

Output cmd_schedule(const Scenario& sc, Format format)
{
    const WorldSpec spec = sc.resolved_world();
    const ScheduleTable table = plan_schedule(spec);
    const auto violations = validate_schedule(table);

    std::ostringstream dump;
    dump << dump_schedule(table);

    std::ostringstream summary;
    summary << commented(config_header(sc, "schedule"));
    summary << "horizon: " << table.horizon() << " superframes of " << table.slots() << " slots\n";
    summary << "gbs:\n";
    for (const auto& [coordinator, slot] : table.gbs_slots())
        summary << "  coordinator " << coordinator << " slot " << slot << '\n';
    summary << "allocations:\n";
    for (const auto& a : table.allocations())
        summary << "  " << a.owner << " -> " << a.peer << " slot " << a.slot_index << " level " << a.level
                << " phase " << a.phase << " (" << to_string(a.origin) << ", occupies " << table.horizon() / a.period()
                << "/" << table.horizon() << ")\n";
    summary << "occupied cells per superframe:";
    for (int s = 0; s < table.horizon(); ++s)
        summary << ' ' << table.occupied_cells(s);
    summary << '\n';
    summary << "violations: " << violations.size() << '\n';
    for (const auto& v : violations)
        summary << "  " << to_string(v.rule) << " sf=" << v.superframe << " slot=" << v.slot << ' ' << v.detail
                << '\n';

    Output out;
    out.files["schedule.txt"] = dump.str();
    out.files["summary.txt"] = summary.str();
    out.stdout_text = format == Format::Summary ? summary.str() : dump.str() + "violations: "
                                                                     + std::to_string(violations.size()) + '\n';
    out.status = violations.empty() ? kExitOk : kExitViolations;
    return out;
}

// --- sweep ------------------------------------------------------------------------

Output cmd_sweep(const Scenario& sc, Format format)
{
    const SweepParams params = sc.sweep_params();
    const SweepSection section = sc.sweep.value_or(SweepSection{});
    const SweepResult result = run_sgts_sweep(sc.resolved_world(), params);

    std::ostringstream summary;
    summary << commented(config_header(sc, "sweep"));
    summary << "pairs: " << result.n1 << " -> " << result.r1 << ", " << result.n2 << " -> " << result.r2 << '\n';
    summary << "power_points: " << result.powers.size() << '\n';
    summary << "trace_hash: " << hex(result.trace_hash) << '\n';
    int status = kExitOk;
    try {
        const WindowEstimate w = estimate_window(result, section.window_lo, section.window_hi);
        summary << "n1_lo_db: " << fmt(w.n1_lo) << '\n'
                << "n1_hi_db: " << fmt(w.n1_hi) << '\n'
                << "n2_lo_db: " << fmt(w.n2_lo) << '\n'
                << "n2_hi_db: " << fmt(w.n2_hi) << '\n'
                << "window_width_db: " << fmt(w.width_db) << '\n'
                << "crossover_db: " << fmt(w.crossover_db) << '\n';
    } catch (const Error& e) {
        summary << "window: not estimable (" << e.what() << ")\n";
        status = kExitViolations;
    }
    summary << "latency_bounds_us:\n";
    for (int level = 0; level <= sc.world.superframe.n_max; ++level)
        summary << "  level " << level << ": " << latency_bound(sc.world.superframe, level).us << '\n';

    Output out;
    out.files["sweep.csv"] = sweep_table_csv(result);
    out.files["powers.csv"] = sweep_powers_csv(result);
    out.files["summary.txt"] = summary.str();
    out.stdout_text = format == Format::Table   ? out.files["sweep.csv"]
                      : format == Format::Trace ? out.files["powers.csv"]
                                                : out.files["summary.txt"];
    out.status = status;
    return out;
}

// --- latency ----------------------------------------------------------------------

Output cmd_latency(const Scenario& sc, Format format)
{
    const WorldSpec spec = sc.resolved_world();
    World world(spec);
    Trace trace = world.run_until(run_end(sc));
    trace.header() = config_header(sc, "latency");
    const LatencyStats stats = measure_gts_latency(trace, spec.superframe);
    const auto exclusivity = check_exclusivity(trace);

    std::ostringstream table;
    table << "node,peer,kind,level,bound_us,max_us,mean_us,frames\n";
    for (const auto& n : stats.guaranteed)
        table << n.node << ',' << n.peer << ",gts," << n.level << ',' << n.bound.us << ',' << n.max.us << ','
              << fmt(n.mean_us, 1) << ',' << n.frames << '\n';
    for (const auto& n : stats.best_effort)
        table << n.node << ',' << n.peer << ",cap,,," << n.max.us << ',' << fmt(n.mean_us, 1) << ',' << n.frames
              << '\n';

    std::ostringstream summary;
    summary << commented(trace.header());
    summary << "guaranteed_flows: " << stats.guaranteed.size() << '\n';
    summary << "best_effort_flows: " << stats.best_effort.size() << '\n';
    for (const auto& n : stats.guaranteed)
        summary << "  " << n.node << " -> " << n.peer << " level " << n.level << ": max " << n.max.us << " us, bound "
                << n.bound.us << " us, " << n.frames << " frames\n";
    summary << "latency_violations: " << stats.violations.size() << '\n';
    for (const auto& v : stats.violations)
        summary << "  node " << v.node << " seq " << v.sequence << ": " << v.latency.us << " us > " << v.bound.us
                << " us\n";
    summary << "exclusivity_violations: " << exclusivity.size() << '\n';
    for (const auto& x : exclusivity)
        summary << "  " << x << '\n';

    Output out;
    out.files["latency.csv"] = table.str();
    out.files["summary.txt"] = summary.str();
    out.stdout_text = format == Format::Table   ? table.str()
                      : format == Format::Trace ? trace_text(trace)
                                                : summary.str();
    out.status = stats.violations.empty() && exclusivity.empty() ? kExitOk : kExitViolations;
    return out;
}

void write_files(const std::string& dir, const Output& output)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (const auto& [name, contents] : output.files) {
        std::ofstream f(fs::path(dir) / name, std::ios::binary);
        if (!f)
            throw Error(Errc::InvalidArgument, "cannot write " + (fs::path(dir) / name).string());
        f << contents;
    }
}

} // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Deterministic beacon-enabled MAC simulator"};
    app.require_subcommand(1);
    Options opt;

    const std::map<std::string, Format> formats{
        {"trace", Format::Trace}, {"summary", Format::Summary}, {"table", Format::Table}};
    app.add_option("--seed", opt.seed, "Override the scenario seed");
    app.add_option("--out", opt.out_dir, "Write result files into this directory");
    app.add_option("--format", opt.format, "Output on stdout: trace, summary or table")
        ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));

    struct Command {
        const char* name;
        const char* help;
        Output (*fn)(const Scenario&, Format);
        Format fallback;
    };
    const Command commands[] = {
        {"run", "Simulate the scenario and emit the full trace", cmd_run, Format::Trace},
        {"schedule", "Plan the schedule, dump it and validate it", cmd_schedule, Format::Table},
        {"sweep", "Shared-slot transmit power sweep", cmd_sweep, Format::Summary},
        {"latency", "Measure guaranteed-slot access latency", cmd_latency, Format::Summary},
    };
    std::vector<CLI::App*> subs;
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        sub->fallthrough();
        sub->add_option("scenario", opt.scenario, "Scenario file")->required();
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    std::size_t which = 0;
    while (!subs[which]->parsed())
        ++which;
    const Command& command = commands[which];

    Scenario scenario;
    try {
        scenario = load_scenario(opt.scenario);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    if (opt.seed)
        scenario.world.seed = *opt.seed;

    try {
        const Output result = command.fn(scenario, opt.format.value_or(command.fallback));
        if (!opt.out_dir.empty())
            write_files(opt.out_dir, result);
        else
            out << result.stdout_text;
        if (result.status != kExitOk)
            err << command.name << ": violations found\n";
        return result.status;
    } catch (const Error& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return kExitUsage;
    }
}

} // namespace detmac
