#include "detmac/harness.hpp"

#include "detmac/error.hpp"
#include "detmac/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

namespace detmac {

namespace {

NodeSpec make_node(NodeId id, Role role, std::optional<NodeId> parent, Position where)
{
    NodeSpec n;
    n.id = id;
    n.role = role;
    n.parent = parent;
    n.position = where;
    return n;
}

GtsRequest request_for(const WorldSpec& spec, const RequestSpec& r)
{
    const auto it = std::find_if(spec.nodes.begin(), spec.nodes.end(), [&](const NodeSpec& n) { return n.id == r.node; });
    if (it == spec.nodes.end())
        throw Error(Errc::UnknownNode, "request from unknown node " + std::to_string(r.node));
    NodeId upstream = 0;
    if (it->role == Role::SimpleNode) {
        upstream = *it->parent;
    } else {
        for (const auto& n : spec.nodes)
            if (n.role == Role::PanCoordinator)
                upstream = n.id;
    }
    GtsRequest req;
    req.level = r.level;
    req.direction = r.direction;
    req.owner = r.direction == Direction::Uplink ? r.node : upstream;
    req.peer = r.direction == Direction::Uplink ? upstream : r.node;
    return req;
}

std::string fmt(double v, int digits = 3)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

} // namespace

// --- scheduling example -------------------------------------------------------

WorldSpec fig3_world()
{
    WorldSpec w;
    w.superframe = SuperframeConfig{0, 0, 3, 16, 0, 0};
    w.nodes.push_back(make_node(0, Role::PanCoordinator, std::nullopt, {0, 0}));
    const Position coords[] = {{30, 0}, {-15, 26}, {-15, -26}};
    for (NodeId c = 1; c <= 3; ++c)
        w.nodes.push_back(make_node(c, Role::StarCoordinator, std::nullopt, coords[c - 1]));
    const std::pair<NodeId, int> workload[] = {{11, 1}, {21, 1}, {22, 0}, {31, 0}, {32, 2}, {33, 3}};
    for (const auto& [id, level] : workload) {
        const NodeId parent = id / 10;
        const Position& p = coords[parent - 1];
        const double k = static_cast<double>(id % 10);
        w.nodes.push_back(make_node(id, Role::SimpleNode, parent, {p.x + 4.0 * k, p.y + 3.0}));
        w.requests.push_back(RequestSpec{id, level, Direction::Uplink, 0});
    }
    return w;
}

ScheduleTable plan_schedule(const WorldSpec& spec)
{
    ScheduleTable table = spec.initial ? *spec.initial : ScheduleTable(spec.superframe);
    if (!spec.initial)
        for (const auto& n : spec.nodes)
            if (n.role == Role::StarCoordinator)
                table.allocate_gbs(n.id);

    // (superframe, pds before requests, declaration order)
    std::vector<std::tuple<std::int64_t, int, std::size_t>> order;
    for (std::size_t i = 0; i < spec.pds.size(); ++i)
        order.emplace_back(spec.pds[i].at_superframe, 0, i);
    for (std::size_t i = 0; i < spec.requests.size(); ++i)
        order.emplace_back(spec.requests[i].at_superframe, 1, i);
    std::stable_sort(order.begin(), order.end());

    for (const auto& [sf, kind, i] : order) {
        GtsRequest req;
        if (kind == 0) {
            const auto& p = spec.pds[i];
            req = GtsRequest{p.owner, p.peer, p.level, p.direction, Origin::Pds};
        } else {
            req = request_for(spec, spec.requests[i]);
        }
        try {
            table.allocate_gts(req);
        } catch (const Error& e) {
            if (e.code() != Errc::SlotExhausted)
                throw;
        }
    }
    return table;
}

ScheduleTable run_schedule_demo()
{
    return plan_schedule(fig3_world());
}

// --- shared-slot sweep ------------------------------------------------------------

namespace {

constexpr NodeId kPan = 0, kC1 = 1, kC2 = 2, kN1 = 11, kN2 = 21;

WorldSpec sweep_base(double sigma_db)
{
    WorldSpec w;
    w.superframe = SuperframeConfig{0, 0, 0, 16, 0, 0};
    w.radio.shadowing_sigma_db = sigma_db;
    w.measure_rssi = true;
    return w;
}

} // namespace

WorldSpec fig7_world(std::int64_t offset_n1_us, std::int64_t offset_n2_us, double sigma_db)
{
    WorldSpec w = sweep_base(sigma_db);
    // Distances 1 m to the own receiver and sqrt(10) m to the other one.
    w.nodes.push_back(make_node(kPan, Role::PanCoordinator, std::nullopt, {1.5, -3.0}));
    w.nodes.push_back(make_node(kC1, Role::StarCoordinator, std::nullopt, {0.0, 0.0}));
    w.nodes.push_back(make_node(kC2, Role::StarCoordinator, std::nullopt, {3.0, 0.0}));
    w.nodes.push_back(make_node(kN1, Role::SimpleNode, kC1, {0.0, 1.0}));
    w.nodes.push_back(make_node(kN2, Role::SimpleNode, kC2, {3.0, 1.0}));
    w.nodes[3].clock_offset_us = offset_n1_us;
    w.nodes[4].clock_offset_us = offset_n2_us;

    ScheduleTable t(w.superframe);
    t.place_gbs(kC1, 1);
    t.place_gbs(kC2, 2);
    const Allocation a1{kN1, kC1, 3, 0, 0, Origin::Pds, Direction::Uplink};
    const Allocation a2{kN2, kC2, 4, 0, 0, Origin::Pds, Direction::Uplink};
    t.place_gts(a1);
    t.place_gts(a2);
    Allocation s1 = a1, s2 = a2;
    s1.slot_index = s2.slot_index = 5;
    t.force_sgts(s1, s2);
    w.initial = t;
    return w;
}

WorldSpec fig8_world(double sigma_db)
{
    WorldSpec w = sweep_base(sigma_db);
    w.nodes.push_back(make_node(kPan, Role::PanCoordinator, std::nullopt, {1.5, -3.0}));
    w.nodes.push_back(make_node(kC1, Role::StarCoordinator, std::nullopt, {0.0, 0.0}));
    w.nodes.push_back(make_node(kC2, Role::StarCoordinator, std::nullopt, {3.0, 0.0}));
    w.nodes.push_back(make_node(kN1, Role::SimpleNode, kC1, {0.0, 1.0}));
    w.nodes.push_back(make_node(kN2, Role::SimpleNode, kC1, {0.0, -1.0}));

    ScheduleTable t(w.superframe);
    t.place_gbs(kC1, 1);
    t.place_gbs(kC2, 2);
    const Allocation a1{kN1, kC1, 3, 0, 0, Origin::Pds, Direction::Uplink};
    const Allocation a2{kN2, kC1, 4, 0, 0, Origin::Pds, Direction::Uplink};
    t.place_gts(a1);
    t.place_gts(a2);
    Allocation s1 = a1, s2 = a2;
    s1.slot_index = s2.slot_index = 5;
    t.force_sgts(s1, s2);
    w.initial = t;
    return w;
}

SweepResult run_sgts_sweep(const WorldSpec& base, const SweepParams& params)
{
    if (!base.initial)
        throw Error(Errc::BadTopology, "the sweep needs an initial table with a shared cell");
    if (params.trials_per_point <= 0 || params.power_step_db <= 0.0 || params.bin_width_db <= 0.0
        || params.power_min_dbm > params.power_max_dbm)
        throw Error(Errc::InvalidArgument, "invalid sweep parameters");
    const ScheduleTable& table = *base.initial;

    std::optional<Sgts> shared;
    int shared_slot = -1;
    for (int slot = 0; slot < table.slots(); ++slot) {
        if (const auto* s = std::get_if<Sgts>(&table.cell(0, slot))) {
            if (shared)
                throw Error(Errc::BadTopology, "more than one shared cell");
            shared = *s;
            shared_slot = slot;
        }
    }
    if (!shared)
        throw Error(Errc::BadTopology, "no shared cell in superframe 0");
    if (shared->first.level != 0 || shared->second.level != 0)
        throw Error(Errc::BadTopology, "the shared cell must recur every superframe");

    SweepResult result;
    result.n1 = shared->first.owner;
    result.r1 = shared->first.peer;
    result.n2 = shared->second.owner;
    result.r2 = shared->second.peer;

    // Slots where each receiver hears one transmitter alone.
    auto solo_slot = [&](NodeId owner, NodeId peer) {
        for (const auto& a : table.allocations())
            if (a.owner == owner && a.peer == peer && a.level == 0
                && std::holds_alternative<Gts>(table.cell(0, a.slot_index)))
                return a.slot_index;
        throw Error(Errc::BadTopology, "node " + std::to_string(owner) + " has no level-0 measurement slot");
    };
    const int g1 = solo_slot(result.n1, result.r1);
    const int g2 = solo_slot(result.n2, result.r2);

    WorldSpec spec = base;
    spec.traffic.clear();
    spec.requests.clear();
    spec.pds.clear();
    spec.sgts.enabled = false;
    spec.measure_rssi = true;
    spec.traffic.push_back(TrafficSpec{result.n1, result.r1, TrafficSpec::Kind::Saturated, {}, {}, kDataSymbols});
    spec.traffic.push_back(TrafficSpec{result.n2, result.r2, TrafficSpec::Kind::Saturated, {}, {}, kDataSymbols});
    validate_topology(spec);

    // Grid anchored at the maximum so that power differences to the fixed
    // node are whole multiples of the step.
    std::vector<double> powers;
    const int steps = static_cast<int>(
        std::floor((params.power_max_dbm - params.power_min_dbm) / params.power_step_db + 1e-9));
    for (int i = steps; i >= 0; --i)
        powers.push_back(params.power_max_dbm - i * params.power_step_db);
    if (powers.front() - params.power_min_dbm > 1e-9)
        powers.insert(powers.begin(), params.power_min_dbm);

    std::vector<std::pair<double, double>> settings;
    const double fixed_power = params.power_max_dbm;
    if (params.pass != SweepParams::Pass::SweepN2)
        for (double p : powers)
            settings.emplace_back(p, fixed_power);
    if (params.pass != SweepParams::Pass::SweepN1)
        for (double p : powers)
            settings.emplace_back(fixed_power, p);

    std::map<long long, SweepPoint> bins1, bins2;
    auto bin_of = [&](double delta) { return std::llround(delta / params.bin_width_db); };
    std::uint64_t hash = fnv1a("sweep");

    for (std::size_t idx = 0; idx < settings.size(); ++idx) {
        WorldSpec point = spec;
        point.seed = derive_seed(params.seed, idx);
        for (auto& n : point.nodes) {
            if (n.id == result.n1)
                n.tx_power_dbm = settings[idx].first;
            if (n.id == result.n2)
                n.tx_power_dbm = settings[idx].second;
        }
        World world(point);
        const Trace trace = world.run_until(slot_start(point.superframe, params.trials_per_point, 0));
        hash = fnv1a(std::to_string(trace_hash(trace)), hash);

        struct Trial {
            std::map<std::pair<NodeId, NodeId>, double> rssi; ///< (receiver, transmitter)
            std::optional<bool> ok1, ok2;
            int collisions = 0;
        };
        std::map<std::int64_t, Trial> trials;
        for (const TraceEvent* e : trace.select<RxRecord>()) {
            const auto& r = std::get<RxRecord>(e->payload);
            const bool decoded = r.outcome == RxOutcome::Kind::Received || r.outcome == RxOutcome::Kind::CapturedOther;
            Trial& t = trials[r.superframe];
            if ((r.slot == g1 || r.slot == g2) && decoded && (e->node == result.r1 || e->node == result.r2))
                t.rssi[{e->node, r.from}] = r.rssi_dbm;
            if (r.slot == shared_slot) {
                if (e->node == result.r1)
                    t.ok1 = decoded && r.from == result.n1;
                if (e->node == result.r2)
                    t.ok2 = decoded && r.from == result.n2;
                if (r.outcome == RxOutcome::Kind::Collision)
                    ++t.collisions;
            }
        }

        PowerPoint pp;
        pp.power_n1_dbm = settings[idx].first;
        pp.power_n2_dbm = settings[idx].second;
        double sum1 = 0, sum2 = 0;
        int count1 = 0, count2 = 0;
        for (const auto& [sf, t] : trials) {
            auto delta_at = [&](NodeId receiver) -> std::optional<double> {
                auto a = t.rssi.find({receiver, result.n1});
                auto b = t.rssi.find({receiver, result.n2});
                if (a == t.rssi.end() || b == t.rssi.end())
                    return std::nullopt;
                return a->second - b->second;
            };
            const auto d1 = delta_at(result.r1);
            const auto d2 = delta_at(result.r2);
            if (!t.ok1 || !t.ok2 || !d1 || !d2)
                continue;
            ++pp.trials;
            pp.success_n1 += *t.ok1 ? 1 : 0;
            pp.success_n2 += *t.ok2 ? 1 : 0;
            pp.collisions += t.collisions;
            sum1 += *d1;
            sum2 += *d2;
            ++count1;
            ++count2;
            SweepPoint& b1 = bins1[bin_of(*d1)];
            ++b1.trials;
            b1.positives += *t.ok1 ? 1 : 0;
            SweepPoint& b2 = bins2[bin_of(*d2)];
            ++b2.trials;
            b2.positives += *t.ok2 ? 1 : 0;
        }
        pp.mean_delta_r1_db = count1 ? sum1 / count1 : 0.0;
        pp.mean_delta_r2_db = count2 ? sum2 / count2 : 0.0;
        result.powers.push_back(pp);
    }

    for (auto& [key, p] : bins1) {
        p.delta_db = static_cast<double>(key) * params.bin_width_db;
        result.curve_n1.push_back(p);
    }
    for (auto& [key, p] : bins2) {
        p.delta_db = static_cast<double>(key) * params.bin_width_db;
        result.curve_n2.push_back(p);
    }
    result.trace_hash = hash;
    return result;
}

std::vector<double> isotonic_fit(const std::vector<double>& values, const std::vector<double>& weights,
                                 bool increasing)
{
    if (values.size() != weights.size())
        throw Error(Errc::InvalidArgument, "values and weights differ in length");
    struct Block {
        double mean;
        double weight;
        std::size_t count;
    };
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = increasing ? values[i] : -values[i];
        blocks.push_back(Block{v, weights[i], 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
            Block b = blocks.back();
            blocks.pop_back();
            Block& a = blocks.back();
            const double w = a.weight + b.weight;
            a.mean = w > 0 ? (a.mean * a.weight + b.mean * b.weight) / w : (a.mean + b.mean) / 2;
            a.weight = w;
            a.count += b.count;
        }
    }
    std::vector<double> out;
    for (const auto& b : blocks)
        for (std::size_t i = 0; i < b.count; ++i)
            out.push_back(increasing ? b.mean : -b.mean);
    return out;
}

namespace {

struct Fitted {
    std::vector<double> x;
    std::vector<double> y;

    double at(double v) const
    {
        if (v <= x.front())
            return y.front();
        if (v >= x.back())
            return y.back();
        const auto it = std::upper_bound(x.begin(), x.end(), v);
        const std::size_t i = static_cast<std::size_t>(it - x.begin());
        const double t = (v - x[i - 1]) / (x[i] - x[i - 1]);
        return y[i - 1] + t * (y[i] - y[i - 1]);
    }
};

Fitted fit_curve(const std::vector<SweepPoint>& points, bool increasing, const char* name)
{
    Fitted f;
    std::vector<double> rates, weights;
    for (const auto& p : points) {
        if (p.trials <= 0)
            continue;
        f.x.push_back(p.delta_db);
        rates.push_back(p.rate());
        weights.push_back(p.trials);
    }
    if (f.x.size() < 2)
        throw Error(Errc::NonMonotone, std::string(name) + ": fewer than two populated points");
    f.y = isotonic_fit(rates, weights, increasing);
    return f;
}

/// Delta at which the rising (or falling) fitted curve crosses `level`.
double crossing(const Fitted& f, double level, bool increasing, const char* name)
{
    const std::size_t n = f.x.size();
    for (std::size_t k = 1; k < n; ++k) {
        const std::size_t i = increasing ? k - 1 : n - k;
        const std::size_t j = increasing ? k : n - k - 1;
        if (f.y[i] < level && f.y[j] >= level) {
            const double t = (level - f.y[i]) / (f.y[j] - f.y[i]);
            return f.x[i] + t * (f.x[j] - f.x[i]);
        }
    }
    throw Error(Errc::NonMonotone, std::string(name) + ": success rate never crosses " + fmt(level, 2));
}

} // namespace

WindowEstimate estimate_window(const SweepResult& result, double lo, double hi)
{
    if (!(lo < hi))
        throw Error(Errc::InvalidArgument, "lo must be below hi");
    const Fitted f1 = fit_curve(result.curve_n1, true, "N1");
    const Fitted f2 = fit_curve(result.curve_n2, false, "N2");

    WindowEstimate w;
    w.n1_lo = crossing(f1, lo, true, "N1");
    w.n1_hi = crossing(f1, hi, true, "N1");
    w.n2_lo = crossing(f2, lo, false, "N2");
    w.n2_hi = crossing(f2, hi, false, "N2");
    w.width_db = w.n1_hi - w.n2_hi;

    const double from = std::max(f1.x.front(), f2.x.front());
    const double to = std::min(f1.x.back(), f2.x.back());
    if (from > to)
        throw Error(Errc::NonMonotone, "the two curves share no delta range");
    std::vector<double> grid;
    for (double x : f1.x)
        if (x >= from && x <= to)
            grid.push_back(x);
    for (double x : f2.x)
        if (x >= from && x <= to)
            grid.push_back(x);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    constexpr double kZero = 1e-12;
    std::vector<double> diff;
    for (double x : grid)
        diff.push_back(f1.at(x) - f2.at(x));
    std::optional<std::size_t> first_zero, last_zero;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (std::abs(diff[i]) <= kZero) {
            if (!first_zero)
                first_zero = i;
            last_zero = i;
        }
    }
    if (first_zero) {
        w.crossover_db = (grid[*first_zero] + grid[*last_zero]) / 2.0;
        return w;
    }
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if ((diff[i - 1] < 0) != (diff[i] < 0)) {
            const double t = -diff[i - 1] / (diff[i] - diff[i - 1]);
            w.crossover_db = grid[i - 1] + t * (grid[i] - grid[i - 1]);
            return w;
        }
    }
    throw Error(Errc::NonMonotone, "the fitted curves never intersect");
}

std::string sweep_table_csv(const SweepResult& result)
{
    std::ostringstream os;
    os << "curve,node,receiver,delta_db,trials,positives,rate\n";
    auto rows = [&](const char* name, NodeId node, NodeId receiver, const std::vector<SweepPoint>& points) {
        for (const auto& p : points)
            os << name << ',' << node << ',' << receiver << ',' << fmt(p.delta_db) << ',' << p.trials << ','
               << p.positives << ',' << fmt(p.rate(), 4) << '\n';
    };
    rows("n1", result.n1, result.r1, result.curve_n1);
    rows("n2", result.n2, result.r2, result.curve_n2);
    return os.str();
}

std::string sweep_powers_csv(const SweepResult& result)
{
    std::ostringstream os;
    os << "power_n1_dbm,power_n2_dbm,trials,success_n1,success_n2,collisions,mean_delta_r1_db,mean_delta_r2_db\n";
    for (const auto& p : result.powers)
        os << fmt(p.power_n1_dbm, 2) << ',' << fmt(p.power_n2_dbm, 2) << ',' << p.trials << ',' << p.success_n1
           << ',' << p.success_n2 << ',' << p.collisions << ',' << fmt(p.mean_delta_r1_db) << ','
           << fmt(p.mean_delta_r2_db) << '\n';
    return os.str();
}

// --- latency -----------------------------------------------------------------------

SimTime latency_bound(const SuperframeConfig& config, int level)
{
    return beacon_interval(config) * (std::int64_t{1} << level) + slot_duration(config);
}

LatencyStats measure_gts_latency(const Trace& trace, const SuperframeConfig& config)
{
    struct Acc {
        NodeLatency stats;
        double sum = 0.0;
    };
    std::map<std::tuple<NodeId, NodeId, int>, Acc> guaranteed, best_effort;
    LatencyStats out;

    for (const TraceEvent* e : trace.select<TxRecord>()) {
        const auto& r = std::get<TxRecord>(e->payload);
        if (r.frame != FrameKind::Data)
            continue;
        const SimTime latency = e->time - r.enqueued;
        Acc* acc = nullptr;
        if (r.level >= 0 && r.bounded) {
            acc = &guaranteed[{e->node, r.destination, r.level}];
            acc->stats.level = r.level;
            acc->stats.bound = latency_bound(config, r.level);
            if (latency > acc->stats.bound)
                out.violations.push_back(LatencyViolation{e->node, r.sequence, latency, acc->stats.bound});
        } else if (r.cell == "cap") {
            acc = &best_effort[{e->node, r.destination, -1}];
        } else {
            continue;
        }
        acc->stats.node = e->node;
        acc->stats.peer = r.destination;
        acc->stats.max = std::max(acc->stats.max, latency);
        acc->sum += static_cast<double>(latency.us);
        ++acc->stats.frames;
        ++acc->stats.histogram[latency.us / 1000];
    }
    for (auto* group : {&guaranteed, &best_effort}) {
        for (auto& [key, acc] : *group) {
            acc.stats.mean_us = acc.sum / acc.stats.frames;
            (group == &guaranteed ? out.guaranteed : out.best_effort).push_back(acc.stats);
        }
    }
    return out;
}

LatencyStats measure_gts_latency(const WorldSpec& spec, SimTime duration)
{
    World world(spec);
    return measure_gts_latency(world.run_until(duration), spec.superframe);
}

WorldSpec random_latency_scenario(std::uint64_t seed)
{
    RngStream rng = rng_stream(seed, 0, "scenario");
    WorldSpec w;
    w.seed = seed;
    w.superframe.bo = static_cast<int>(rng.uniform_int(0, 2));
    w.superframe.so = static_cast<int>(rng.uniform_int(0, std::min(w.superframe.bo, 1)));
    w.superframe.n_max = static_cast<int>(rng.uniform_int(1, 3));
    w.superframe.slots_per_superframe = 16;

    const SimTime bi = beacon_interval(w.superframe);
    const int horizon = w.superframe.horizon();
    w.nodes.push_back(make_node(0, Role::PanCoordinator, std::nullopt, {0, 0}));
    const int coordinators = static_cast<int>(rng.uniform_int(1, 3));
    constexpr double kPi = 3.14159265358979323846;
    for (int c = 1; c <= coordinators; ++c) {
        const double angle = 2.0 * kPi * c / coordinators + rng.uniform();
        const double radius = 20.0 + 30.0 * rng.uniform();
        NodeSpec coord = make_node(static_cast<NodeId>(c), Role::StarCoordinator, std::nullopt,
                                   {radius * std::cos(angle), radius * std::sin(angle)});
        coord.clock_offset_us = rng.uniform_int(-3, 3);
        w.nodes.push_back(coord);
        const int children = static_cast<int>(rng.uniform_int(2, 4));
        for (int k = 1; k <= children; ++k) {
            const NodeId id = static_cast<NodeId>(10 * c + k);
            const double a = 2.0 * kPi * rng.uniform();
            const double d = 2.0 + 8.0 * rng.uniform();
            NodeSpec n = make_node(id, Role::SimpleNode, static_cast<NodeId>(c),
                                   {coord.position.x + d * std::cos(a), coord.position.y + d * std::sin(a)});
            n.clock_offset_us = rng.uniform_int(-3, 3);
            w.nodes.push_back(n);

            const double kind = rng.uniform();
            if (kind < 0.75) {
                const int level = static_cast<int>(rng.uniform_int(0, w.superframe.n_max));
                const Direction dir = rng.uniform() < 0.2 ? Direction::Downlink : Direction::Uplink;
                const NodeId src = dir == Direction::Uplink ? id : static_cast<NodeId>(c);
                const NodeId dst = dir == Direction::Uplink ? static_cast<NodeId>(c) : id;
                if (rng.uniform() < 0.5)
                    w.pds.push_back(PdsSpec{src, dst, level, dir, 0});
                else
                    w.requests.push_back(RequestSpec{id, level, dir, 0});

                TrafficSpec t;
                t.source = src;
                t.destination = dst;
                const SimTime period = bi * (std::int64_t{1} << level);
                if (rng.uniform() < 0.5) {
                    t.kind = TrafficSpec::Kind::Periodic;
                    t.period = period * rng.uniform_int(1, 3);
                } else {
                    t.kind = TrafficSpec::Kind::Sporadic;
                    t.period = period;
                }
                t.start = SimTime::micros(rng.uniform_int(0, (bi * (4 * horizon)).us));
                w.traffic.push_back(t);
            } else {
                TrafficSpec t;
                t.source = id;
                t.destination = static_cast<NodeId>(c);
                t.kind = TrafficSpec::Kind::Poisson;
                t.period = bi * 3;
                t.start = SimTime::micros(rng.uniform_int(0, bi.us));
                w.traffic.push_back(t);
            }
        }
    }
    return w;
}

SimTime random_scenario_duration(const WorldSpec& spec)
{
    const std::int64_t superframes = std::max<std::int64_t>(48, 8LL * spec.superframe.horizon());
    return slot_start(spec.superframe, superframes, 0);
}

std::vector<std::string> check_exclusivity(const Trace& trace)
{
    struct Tx {
        SimTime start, end;
        NodeId node;
        const TxRecord* rec;
    };
    std::vector<Tx> txs;
    for (const TraceEvent* e : trace.select<TxRecord>()) {
        const auto& r = std::get<TxRecord>(e->payload);
        txs.push_back(Tx{e->time, r.end, e->node, &r});
    }
    std::sort(txs.begin(), txs.end(), [](const Tx& a, const Tx& b) { return a.start < b.start; });

    auto is_beacon = [](const TxRecord& r) { return r.frame == FrameKind::Superbeacon || r.frame == FrameKind::Beacon; };
    std::vector<std::string> problems;
    for (std::size_t i = 0; i < txs.size(); ++i) {
        for (std::size_t j = i + 1; j < txs.size() && txs[j].start < txs[i].end; ++j) {
            const TxRecord& a = *txs[i].rec;
            const TxRecord& b = *txs[j].rec;
            std::string what;
            if (is_beacon(a) || is_beacon(b)) {
                what = "beacon overlap";
            } else if (a.cell == "cap" && b.cell == "cap") {
                continue;
            } else if (a.cell == "sgts" && b.cell == "sgts" && a.superframe == b.superframe && a.slot == b.slot) {
                continue;
            } else {
                what = "guaranteed-slot overlap";
            }
            problems.push_back(what + ": node " + std::to_string(txs[i].node) + " (" + a.cell + ", sf "
                               + std::to_string(a.superframe) + " slot " + std::to_string(a.slot) + ") and node "
                               + std::to_string(txs[j].node) + " (" + b.cell + ", sf " + std::to_string(b.superframe)
                               + " slot " + std::to_string(b.slot) + ")");
        }
    }
    return problems;
}

// --- merge soundness ---------------------------------------------------------------

MergeSoundness run_merge_soundness(std::uint64_t seed, double threshold_db, double sigma_db, long occurrences)
{
    constexpr int kMaxScenarios = 1000;
    constexpr std::int64_t kSettle = 4;   // superframes to measure, report and merge
    constexpr std::int64_t kObserve = 100;

    MergeSoundness out;
    for (int s = 0; s < kMaxScenarios && out.occurrences < occurrences; ++s) {
        RngStream rng = rng_stream(seed, static_cast<NodeId>(s), "merge-scenario");
        WorldSpec w;
        w.seed = derive_seed(seed, static_cast<std::uint64_t>(s));
        w.superframe = SuperframeConfig{0, 0, 0, 16, 0, 0};
        w.radio.shadowing_sigma_db = sigma_db;
        w.sgts = SgtsPolicy{true, threshold_db};

        const double spacing = 15.0 + 45.0 * rng.uniform();
        auto around = [&](Position c) {
            const double a = 2.0 * 3.14159265358979323846 * rng.uniform();
            const double d = 1.0 + 7.0 * rng.uniform();
            return Position{c.x + d * std::cos(a), c.y + d * std::sin(a)};
        };
        const Position c1{0, 0}, c2{spacing, 0};
        w.nodes.push_back(make_node(kPan, Role::PanCoordinator, std::nullopt, {spacing / 2, -10}));
        w.nodes.push_back(make_node(kC1, Role::StarCoordinator, std::nullopt, c1));
        w.nodes.push_back(make_node(kC2, Role::StarCoordinator, std::nullopt, c2));
        w.nodes.push_back(make_node(kN1, Role::SimpleNode, kC1, around(c1)));
        w.nodes.push_back(make_node(kN2, Role::SimpleNode, kC2, around(c2)));
        w.pds.push_back(PdsSpec{kN1, kC1, 0, Direction::Uplink, 0});
        w.pds.push_back(PdsSpec{kN2, kC2, 0, Direction::Uplink, 0});
        w.traffic.push_back(TrafficSpec{kN1, kC1, TrafficSpec::Kind::Saturated, {}, {}, kDataSymbols});
        w.traffic.push_back(TrafficSpec{kN2, kC2, TrafficSpec::Kind::Saturated, {}, {}, kDataSymbols});
        ++out.scenarios;

        // Step one superframe at a time so the reports that justified the
        // merge are read before newer ones replace them.
        World world(w);
        std::optional<int> shared_slot;
        std::optional<double> accepted_margin;
        for (std::int64_t sf = 1; sf <= kSettle; ++sf) {
            world.run_until(slot_start(w.superframe, sf, 0));
            if (accepted_margin)
                continue;
            for (int slot = 0; slot < world.planned_table().slots(); ++slot)
                if (std::holds_alternative<Sgts>(world.planned_table().cell(0, slot)))
                    shared_slot = slot;
            if (!shared_slot)
                continue;
            const auto& reports = world.node(kPan).pan()->reports();
            auto margin = [&](NodeId receiver, NodeId wanted, NodeId other) {
                const auto& r = reports.at(receiver).rssi_dbm;
                const auto it = r.find(other);
                return r.at(wanted) - (it != r.end() ? it->second : w.radio.sensitivity_dbm);
            };
            accepted_margin = std::min(margin(kC1, kN1, kN2), margin(kC2, kN2, kN1));
        }
        if (!shared_slot || !std::holds_alternative<Sgts>(world.active_table().cell(0, *shared_slot)))
            continue;
        ++out.merges;
        out.accepted_margins_db.push_back(*accepted_margin);

        const std::int64_t observe = std::min<std::int64_t>(kObserve, occurrences - out.occurrences);
        const Trace trace = world.run_until(slot_start(w.superframe, kSettle + observe, 0));
        std::map<std::int64_t, std::pair<bool, bool>> ok;
        for (const TraceEvent* e : trace.select<RxRecord>()) {
            const auto& r = std::get<RxRecord>(e->payload);
            if (r.superframe < kSettle || r.slot != *shared_slot)
                continue;
            auto& [ok1, ok2] = ok[r.superframe];
            const bool decoded = r.outcome == RxOutcome::Kind::Received || r.outcome == RxOutcome::Kind::CapturedOther;
            if (e->node == kC1)
                ok1 = decoded && r.from == kN1;
            if (e->node == kC2)
                ok2 = decoded && r.from == kN2;
        }
        for (std::int64_t sf = kSettle; sf < kSettle + observe; ++sf) {
            ++out.occurrences;
            const auto it = ok.find(sf);
            if (it == ok.end() || !it->second.first || !it->second.second)
                ++out.failures;
        }
    }
    return out;
}

} // namespace detmac
