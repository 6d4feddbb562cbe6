#include "detmac/scenario.hpp"

#include "detmac/error.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace detmac {

namespace {

[[noreturn]] void fail(const YAML::Mark& mark, const std::string& field, const std::string& what)
{
    std::string where = mark.is_null() ? std::string("?") : std::to_string(mark.line + 1);
    throw Error(Errc::ParseError, "line " + where + ": " + field + ": " + what);
}

// A YAML mapping whose keys are checked against the schema. Every accessor
// marks its key as known; finish() rejects the rest.
class Fields {
public:
    Fields(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path))
    {
        if (!node_.IsMap())
            fail(node_.Mark(), path_.empty() ? "document" : path_, "expected a mapping");
    }

    const std::string& path() const { return path_; }
    YAML::Mark mark() const { return node_.Mark(); }

    std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    YAML::Node child(const char* key)
    {
        known_.insert(key);
        return node_[key];
    }

    template <class T>
    void opt(const char* key, T& out)
    {
        const YAML::Node n = child(key);
        if (n)
            out = convert<T>(n, field(key));
    }

    template <class T>
    T req(const char* key)
    {
        const YAML::Node n = child(key);
        if (!n)
            fail(node_.Mark(), field(key), "missing required field");
        return convert<T>(n, field(key));
    }

    void finish() const
    {
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!known_.contains(key))
                fail(kv.first.Mark(), field(key.c_str()), "unknown key");
        }
    }

    template <class T>
    static T convert(const YAML::Node& n, const std::string& field);

private:
    YAML::Node node_;
    std::string path_;
    std::set<std::string> known_;
};

template <class T>
T scalar(const YAML::Node& n, const std::string& field, const char* expected)
{
    if (!n.IsScalar())
        fail(n.Mark(), field, std::string("expected ") + expected);
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        fail(n.Mark(), field, std::string("expected ") + expected + ", got '" + n.Scalar() + "'");
    }
}

template <>
int Fields::convert<int>(const YAML::Node& n, const std::string& field)
{
    return scalar<int>(n, field, "an integer");
}

template <>
std::int64_t Fields::convert<std::int64_t>(const YAML::Node& n, const std::string& field)
{
    return scalar<std::int64_t>(n, field, "an integer");
}

template <>
std::uint64_t Fields::convert<std::uint64_t>(const YAML::Node& n, const std::string& field)
{
    if (n.IsScalar() && !n.Scalar().empty() && n.Scalar()[0] == '-')
        fail(n.Mark(), field, "expected a non-negative integer");
    return scalar<std::uint64_t>(n, field, "a non-negative integer");
}

template <>
double Fields::convert<double>(const YAML::Node& n, const std::string& field)
{
    return scalar<double>(n, field, "a number");
}

template <>
bool Fields::convert<bool>(const YAML::Node& n, const std::string& field)
{
    return scalar<bool>(n, field, "true or false");
}

template <>
std::string Fields::convert<std::string>(const YAML::Node& n, const std::string& field)
{
    return scalar<std::string>(n, field, "a string");
}

template <>
NodeId Fields::convert<NodeId>(const YAML::Node& n, const std::string& field)
{
    const auto v = scalar<std::int64_t>(n, field, "a node id");
    if (v < 0 || v >= static_cast<std::int64_t>(kBroadcast))
        fail(n.Mark(), field, "node id out of range");
    return static_cast<NodeId>(v);
}

template <>
SimTime Fields::convert<SimTime>(const YAML::Node& n, const std::string& field)
{
    return SimTime::micros(scalar<std::int64_t>(n, field, "an integer number of microseconds"));
}

template <>
std::optional<double> Fields::convert<std::optional<double>>(const YAML::Node& n, const std::string& field)
{
    if (n.IsNull())
        return std::nullopt;
    return scalar<double>(n, field, "a number or null");
}

template <>
std::optional<NodeId> Fields::convert<std::optional<NodeId>>(const YAML::Node& n, const std::string& field)
{
    if (n.IsNull())
        return std::nullopt;
    return convert<NodeId>(n, field);
}

template <>
Position Fields::convert<Position>(const YAML::Node& n, const std::string& field)
{
    if (!n.IsSequence() || n.size() != 2)
        fail(n.Mark(), field, "expected [x, y]");
    return Position{scalar<double>(n[0], field, "a number"), scalar<double>(n[1], field, "a number")};
}

template <class E, std::size_t N>
E keyword(Fields& f, const char* key, E fallback, const std::pair<const char*, E> (&table)[N])
{
    const YAML::Node n = f.child(key);
    if (!n)
        return fallback;
    const auto text = Fields::convert<std::string>(n, f.field(key));
    std::string choices;
    for (const auto& [name, value] : table) {
        if (text == name)
            return value;
        choices += choices.empty() ? name : std::string(", ") + name;
    }
    fail(n.Mark(), f.field(key), "'" + text + "' is not one of " + choices);
}

constexpr std::pair<const char*, Role> kRoles[] = {
    {"pan", Role::PanCoordinator}, {"coordinator", Role::StarCoordinator}, {"node", Role::SimpleNode}};
constexpr std::pair<const char*, SyncSource> kSyncs[] = {{"pan", SyncSource::Pan},
                                                         {"coordinator", SyncSource::Coordinator}};
constexpr std::pair<const char*, Direction> kDirections[] = {{"uplink", Direction::Uplink},
                                                             {"downlink", Direction::Downlink}};
constexpr std::pair<const char*, Origin> kOrigins[] = {{"requested", Origin::Requested}, {"pds", Origin::Pds}};
constexpr std::pair<const char*, TrafficSpec::Kind> kKinds[] = {{"periodic", TrafficSpec::Kind::Periodic},
                                                                {"poisson", TrafficSpec::Kind::Poisson},
                                                                {"sporadic", TrafficSpec::Kind::Sporadic},
                                                                {"saturated", TrafficSpec::Kind::Saturated}};
constexpr std::pair<const char*, SweepParams::Pass> kPasses[] = {
    {"both", SweepParams::Pass::Both}, {"n1", SweepParams::Pass::SweepN1}, {"n2", SweepParams::Pass::SweepN2}};

template <class E, std::size_t N>
const char* name_of(E value, const std::pair<const char*, E> (&table)[N])
{
    for (const auto& [name, v] : table)
        if (v == value)
            return name;
    return "?";
}

template <class Fn>
void each(Fields& parent, const char* key, Fn&& fn)
{
    const YAML::Node list = parent.child(key);
    if (!list || list.IsNull())
        return;
    if (!list.IsSequence())
        fail(list.Mark(), parent.field(key), "expected a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
        Fields item(list[i], parent.field(key) + "[" + std::to_string(i) + "]");
        fn(item);
        item.finish();
    }
}

Allocation parse_allocation(Fields& f)
{
    Allocation a;
    a.owner = f.req<NodeId>("owner");
    a.peer = f.req<NodeId>("peer");
    a.slot_index = f.req<int>("slot");
    f.opt("level", a.level);
    f.opt("phase", a.phase);
    a.origin = keyword(f, "origin", Origin::Pds, kOrigins);
    a.direction = keyword(f, "direction", Direction::Uplink, kDirections);
    return a;
}

Scenario parse_document(const YAML::Node& root)
{
    Scenario sc;
    WorldSpec& w = sc.world;
    Fields top(root, "");
    top.opt("seed", w.seed);
    top.opt("run_superframes", sc.run_superframes);
    if (sc.run_superframes < 0)
        fail(top.child("run_superframes").Mark(), "run_superframes", "must be >= 0");
    top.opt("measure_rssi", w.measure_rssi);

    YAML::Mark superframe_mark = top.mark();
    if (const YAML::Node n = top.child("superframe")) {
        Fields f(n, "superframe");
        superframe_mark = f.mark();
        f.opt("bo", w.superframe.bo);
        f.opt("so", w.superframe.so);
        f.opt("n_max", w.superframe.n_max);
        f.opt("slots", w.superframe.slots_per_superframe);
        f.opt("min_cap_slots", w.superframe.min_cap_slots);
        f.opt("gbs_stride", w.superframe.gbs_stride);
        f.finish();
    }
    try {
        w.superframe.validate();
    } catch (const Error& e) {
        fail(superframe_mark, "superframe", e.what());
    }

    if (const YAML::Node n = top.child("radio")) {
        Fields f(n, "radio");
        RadioParams& r = w.radio;
        f.opt("exponent", r.path_loss_exponent);
        f.opt("reference_distance_m", r.reference_distance_m);
        f.opt("reference_loss_db", r.reference_loss_db);
        f.opt("sigma_db", r.shadowing_sigma_db);
        f.opt("theta_cap_db", r.capture_threshold_db);
        f.opt("sensitivity_dbm", r.sensitivity_dbm);
        f.opt("noise_floor_dbm", r.noise_floor_dbm);
        f.opt("bias_slope_db_per_us", r.bias_slope_db_per_us);
        f.opt("bias_saturation_db", r.bias_saturation_db);
        f.opt("tx_power_min_dbm", r.tx_power_min_dbm);
        f.opt("tx_power_max_dbm", r.tx_power_max_dbm);
        f.opt("max_clock_error_us", r.max_clock_error_us);
        f.finish();
        try {
            r.validate();
        } catch (const Error& e) {
            fail(f.mark(), "radio", e.what());
        }
    }

    if (const YAML::Node n = top.child("csma")) {
        Fields f(n, "csma");
        f.opt("min_be", w.csma.min_be);
        f.opt("max_be", w.csma.max_be);
        f.opt("max_backoffs", w.csma.max_backoffs);
        f.finish();
        if (w.csma.min_be < 0 || w.csma.max_be < w.csma.min_be || w.csma.max_backoffs < 0)
            fail(f.mark(), "csma", "need 0 <= min_be <= max_be and max_backoffs >= 0");
    }

    if (const YAML::Node n = top.child("energy")) {
        Fields f(n, "energy");
        f.opt("dozing_ua", w.energy.dozing_ua);
        f.opt("listening_ua", w.energy.listening_ua);
        f.opt("transmitting_ua", w.energy.transmitting_ua);
        f.opt("waking_ua", w.energy.waking_ua);
        f.opt("wake_time_us", w.energy.wake_time);
        f.finish();
    }

    if (const YAML::Node n = top.child("sgts")) {
        Fields f(n, "sgts");
        f.opt("enabled", w.sgts.enabled);
        f.opt("threshold_db", w.sgts.threshold_db);
        f.finish();
    }

    each(top, "nodes", [&](Fields& f) {
        NodeSpec node;
        node.id = f.req<NodeId>("id");
        node.role = keyword(f, "role", Role::SimpleNode, kRoles);
        f.opt("parent", node.parent);
        node.position = f.req<Position>("position");
        f.opt("tx_power_dbm", node.tx_power_dbm);
        f.opt("clock_offset_us", node.clock_offset_us);
        f.opt("mobile", node.mobile);
        node.sync = keyword(f, "sync", SyncSource::Coordinator, kSyncs);
        w.nodes.push_back(node);
    });

    each(top, "traffic", [&](Fields& f) {
        TrafficSpec t;
        t.source = f.req<NodeId>("source");
        t.destination = f.req<NodeId>("destination");
        t.kind = keyword(f, "kind", TrafficSpec::Kind::Periodic, kKinds);
        f.opt("period_us", t.period);
        f.opt("start_us", t.start);
        f.opt("payload_symbols", t.payload_symbols);
        if (t.period.us <= 0)
            fail(f.mark(), f.field("period_us"), "must be positive");
        w.traffic.push_back(t);
    });

    each(top, "requests", [&](Fields& f) {
        RequestSpec r;
        r.node = f.req<NodeId>("node");
        f.opt("level", r.level);
        r.direction = keyword(f, "direction", Direction::Uplink, kDirections);
        f.opt("at_superframe", r.at_superframe);
        w.requests.push_back(r);
    });

    each(top, "pds", [&](Fields& f) {
        PdsSpec p;
        p.owner = f.req<NodeId>("owner");
        p.peer = f.req<NodeId>("peer");
        f.opt("level", p.level);
        p.direction = keyword(f, "direction", Direction::Uplink, kDirections);
        f.opt("at_superframe", p.at_superframe);
        w.pds.push_back(p);
    });

    YAML::Mark schedule_mark;
    if (const YAML::Node n = top.child("schedule")) {
        Fields f(n, "schedule");
        schedule_mark = f.mark();
        SchedulePlacement placement;
        each(f, "gbs", [&](Fields& g) {
            placement.gbs.emplace_back(g.req<NodeId>("coordinator"), g.req<int>("slot"));
        });
        each(f, "gts", [&](Fields& g) { placement.gts.push_back(parse_allocation(g)); });
        each(f, "sgts", [&](Fields& g) {
            const YAML::Node a = g.child("first");
            const YAML::Node b = g.child("second");
            if (!a || !b)
                fail(g.mark(), g.path(), "needs 'first' and 'second'");
            Fields fa(a, g.field("first"));
            Fields fb(b, g.field("second"));
            placement.sgts.emplace_back(parse_allocation(fa), parse_allocation(fb));
            fa.finish();
            fb.finish();
        });
        f.finish();
        sc.schedule = std::move(placement);
    }

    if (const YAML::Node n = top.child("sweep")) {
        Fields f(n, "sweep");
        SweepSection s;
        f.opt("power_min_dbm", s.params.power_min_dbm);
        f.opt("power_max_dbm", s.params.power_max_dbm);
        f.opt("power_step_db", s.params.power_step_db);
        f.opt("trials_per_point", s.params.trials_per_point);
        f.opt("bin_width_db", s.params.bin_width_db);
        s.params.pass = keyword(f, "pass", SweepParams::Pass::Both, kPasses);
        f.opt("window_lo", s.window_lo);
        f.opt("window_hi", s.window_hi);
        f.finish();
        if (s.params.trials_per_point <= 0 || s.params.power_step_db <= 0 || s.params.bin_width_db <= 0
            || s.params.power_min_dbm > s.params.power_max_dbm)
            fail(f.mark(), "sweep", "need positive trials, step and bin width and power_min <= power_max");
        if (!(0 < s.window_lo && s.window_lo < s.window_hi && s.window_hi < 1))
            fail(f.mark(), "sweep", "need 0 < window_lo < window_hi < 1");
        sc.sweep = s;
    }

    top.finish();

    WorldSpec resolved;
    try {
        resolved = sc.resolved_world();
    } catch (const Error& e) {
        fail(schedule_mark, "schedule", e.what());
    }
    try {
        validate_topology(resolved);
    } catch (const Error& e) {
        fail(top.mark(), "nodes", std::string(to_string(e.code())) + ": " + e.what());
    }
    return sc;
}

// --- serialization -------------------------------------------------------------

std::string num(double v)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string alloc_fields(const Allocation& a)
{
    std::ostringstream os;
    os << "{owner: " << a.owner << ", peer: " << a.peer << ", slot: " << a.slot_index << ", level: " << a.level
       << ", phase: " << a.phase << ", origin: " << to_string(a.origin) << ", direction: " << to_string(a.direction)
       << "}";
    return os.str();
}

const char* yes(bool b) { return b ? "true" : "false"; }

} // namespace

WorldSpec Scenario::resolved_world() const
{
    WorldSpec w = world;
    if (schedule) {
        ScheduleTable t(w.superframe);
        for (const auto& [coordinator, slot] : schedule->gbs)
            t.place_gbs(coordinator, slot);
        for (const auto& a : schedule->gts)
            t.place_gts(a);
        for (const auto& [a, b] : schedule->sgts)
            t.force_sgts(a, b);
        w.initial = std::move(t);
    }
    return w;
}

SweepParams Scenario::sweep_params() const
{
    SweepParams p = sweep ? sweep->params : SweepParams{};
    p.seed = world.seed;
    return p;
}

Scenario parse_scenario(const std::string& text)
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        fail(e.mark, "syntax", e.msg);
    }
    if (!root || root.IsNull())
        throw Error(Errc::ParseError, "line 1: document: empty scenario");
    return parse_document(root);
}

Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::ParseError, "cannot open scenario file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_scenario(buf.str());
    } catch (const Error& e) {
        throw Error(Errc::ParseError, path + ": " + e.what());
    }
}

std::string serialize_scenario(const Scenario& sc)
{
    const WorldSpec& w = sc.world;
    std::ostringstream os;
    os << "seed: " << w.seed << '\n';
    os << "run_superframes: " << sc.run_superframes << '\n';
    os << "measure_rssi: " << yes(w.measure_rssi) << '\n';

    const auto& s = w.superframe;
    os << "superframe:\n"
       << "  bo: " << s.bo << '\n'
       << "  so: " << s.so << '\n'
       << "  n_max: " << s.n_max << '\n'
       << "  slots: " << s.slots_per_superframe << '\n'
       << "  min_cap_slots: " << s.min_cap_slots << '\n'
       << "  gbs_stride: " << s.gbs_stride << '\n';

    const auto& r = w.radio;
    os << "radio:\n"
       << "  exponent: " << num(r.path_loss_exponent) << '\n'
       << "  reference_distance_m: " << num(r.reference_distance_m) << '\n'
       << "  reference_loss_db: " << num(r.reference_loss_db) << '\n'
       << "  sigma_db: " << num(r.shadowing_sigma_db) << '\n'
       << "  theta_cap_db: " << num(r.capture_threshold_db) << '\n'
       << "  sensitivity_dbm: " << num(r.sensitivity_dbm) << '\n'
       << "  noise_floor_dbm: " << (r.noise_floor_dbm ? num(*r.noise_floor_dbm) : std::string("null")) << '\n'
       << "  bias_slope_db_per_us: " << num(r.bias_slope_db_per_us) << '\n'
       << "  bias_saturation_db: " << num(r.bias_saturation_db) << '\n'
       << "  tx_power_min_dbm: " << num(r.tx_power_min_dbm) << '\n'
       << "  tx_power_max_dbm: " << num(r.tx_power_max_dbm) << '\n'
       << "  max_clock_error_us: " << r.max_clock_error_us << '\n';

    os << "csma:\n"
       << "  min_be: " << w.csma.min_be << '\n'
       << "  max_be: " << w.csma.max_be << '\n'
       << "  max_backoffs: " << w.csma.max_backoffs << '\n';

    os << "energy:\n"
       << "  dozing_ua: " << num(w.energy.dozing_ua) << '\n'
       << "  listening_ua: " << num(w.energy.listening_ua) << '\n'
       << "  transmitting_ua: " << num(w.energy.transmitting_ua) << '\n'
       << "  waking_ua: " << num(w.energy.waking_ua) << '\n'
       << "  wake_time_us: " << w.energy.wake_time.us << '\n';

    os << "sgts:\n"
       << "  enabled: " << yes(w.sgts.enabled) << '\n'
       << "  threshold_db: " << num(w.sgts.threshold_db) << '\n';

    os << "nodes:\n";
    for (const auto& n : w.nodes) {
        os << "  - {id: " << n.id << ", role: " << to_string(n.role);
        if (n.parent)
            os << ", parent: " << *n.parent;
        os << ", position: [" << num(n.position.x) << ", " << num(n.position.y) << "]"
           << ", tx_power_dbm: " << num(n.tx_power_dbm) << ", clock_offset_us: " << n.clock_offset_us
           << ", mobile: " << yes(n.mobile) << ", sync: " << name_of(n.sync, kSyncs) << "}\n";
    }

    os << "traffic:" << (w.traffic.empty() ? " []\n" : "\n");
    for (const auto& t : w.traffic)
        os << "  - {source: " << t.source << ", destination: " << t.destination << ", kind: " << to_string(t.kind)
           << ", period_us: " << t.period.us << ", start_us: " << t.start.us
           << ", payload_symbols: " << t.payload_symbols << "}\n";

    os << "requests:" << (w.requests.empty() ? " []\n" : "\n");
    for (const auto& q : w.requests)
        os << "  - {node: " << q.node << ", level: " << q.level << ", direction: " << to_string(q.direction)
           << ", at_superframe: " << q.at_superframe << "}\n";

    os << "pds:" << (w.pds.empty() ? " []\n" : "\n");
    for (const auto& p : w.pds)
        os << "  - {owner: " << p.owner << ", peer: " << p.peer << ", level: " << p.level
           << ", direction: " << to_string(p.direction) << ", at_superframe: " << p.at_superframe << "}\n";

    if (sc.schedule) {
        const auto& p = *sc.schedule;
        os << "schedule:\n";
        os << "  gbs:" << (p.gbs.empty() ? " []\n" : "\n");
        for (const auto& [c, slot] : p.gbs)
            os << "    - {coordinator: " << c << ", slot: " << slot << "}\n";
        os << "  gts:" << (p.gts.empty() ? " []\n" : "\n");
        for (const auto& a : p.gts)
            os << "    - " << alloc_fields(a) << '\n';
        os << "  sgts:" << (p.sgts.empty() ? " []\n" : "\n");
        for (const auto& [a, b] : p.sgts)
            os << "    - first: " << alloc_fields(a) << "\n      second: " << alloc_fields(b) << '\n';
    }

    if (sc.sweep) {
        const auto& sw = *sc.sweep;
        os << "sweep:\n"
           << "  power_min_dbm: " << num(sw.params.power_min_dbm) << '\n'
           << "  power_max_dbm: " << num(sw.params.power_max_dbm) << '\n'
           << "  power_step_db: " << num(sw.params.power_step_db) << '\n'
           << "  trials_per_point: " << sw.params.trials_per_point << '\n'
           << "  bin_width_db: " << num(sw.params.bin_width_db) << '\n'
           << "  pass: " << name_of(sw.params.pass, kPasses) << '\n'
           << "  window_lo: " << num(sw.window_lo) << '\n'
           << "  window_hi: " << num(sw.window_hi) << '\n';
    }
    return os.str();
}

} // namespace detmac
