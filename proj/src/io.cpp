#include "rayatlas/io.hpp"
#include "rayatlas/error.hpp"

#include <atomic>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <unistd.h>

namespace rayatlas {

namespace {

template <class T>
T need(const json& j, const char* key, const char* what) {
    if (!j.is_object() || !j.contains(key)) throw Error("InvalidInput", std::string(what) + ": missing \"" + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error("InvalidInput", std::string(what) + ": bad \"" + key + "\": " + e.what());
    }
}

} // namespace

json to_json(const Angle& a) {
    if (a.exact()) return a.str();
    return json{{"value", a.value()}, {"err", a.err()}};
}

Angle angle_from_json(const json& j) {
    if (j.is_string()) return Angle::parse(j.get<std::string>());
    if (j.is_number()) return Angle::approx(j.get<double>());
    if (j.is_object() && j.contains("num") && j.contains("den")) {
        auto part = [](const json& x) {
            return x.is_string() ? BigInt(x.get<std::string>()) : BigInt(x.get<long long>());
        };
        return Angle::rational(part(j["num"]), part(j["den"]));
    }
    if (j.is_object() && j.contains("value")) return Angle::approx(j["value"].get<double>(), j.value("err", 0.0));
    throw Error("InvalidInput", "not an angle: " + j.dump());
}

json to_json(cplx z) { return json::array({z.real(), z.imag()}); }

cplx cplx_from_json(const json& j) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return {j[0].get<double>(), j[1].get<double>()};
    throw Error("InvalidInput", "expected [re, im], got " + j.dump());
}

PolynomialFile polynomial_from_json(const json& j) {
    PolynomialFile f;
    if (!j.is_object() || !j.contains("coeffs") || !j["coeffs"].is_array())
        throw Error("InvalidInput", "polynomial file: missing \"coeffs\" array");
    for (const auto& c : j["coeffs"]) f.raw.push_back(cplx_from_json(c));
    f.name = j.value("name", std::string());
    f.poly = Polynomial::normalized(f.raw, &f.scale);
    if (j.contains("seed")) f.seed = cplx_from_json(j["seed"]);
    if (j.contains("k")) f.k = j["k"].get<int>();
    if (j.contains("d")) f.d = j["d"].get<int>();
    if (j.contains("view")) {
        View v;
        v.center = cplx_from_json(j["view"].at("center"));
        v.radius = j["view"].at("radius").get<double>();
        if (!(v.radius > 0)) throw Error("InvalidInput", "view radius must be positive");
        f.view = v;
    }
    return f;
}

PolynomialFile load_polynomial(const std::filesystem::path& path) {
    PolynomialFile f = polynomial_from_json(read_json(path));
    if (f.name.empty()) f.name = path.stem().string();
    return f;
}

json to_json(const RayTrace& t) {
    json samples = json::array();
    for (const auto& s : t.samples) samples.push_back({s.s, s.z.real(), s.z.imag()});
    json crashes = json::array();
    for (const auto& c : t.crashes)
        crashes.push_back({{"s", c.potential},
                           {"z", to_json(c.location)},
                           {"order", c.order},
                           {"turn", to_string(c.turn)},
                           {"critical_index", c.critical_index},
                           {"level", c.level},
                           {"miss", c.miss},
                           {"predicted", c.predicted}});
    return json{{"schema", schema::trace},
                {"angle", to_json(t.angle)},
                {"side", to_string(t.side)},
                {"degree", t.degree},
                {"samples", samples},
                {"crashes", crashes},
                {"terminal_potential", t.terminal_potential},
                {"landing", t.landing ? to_json(*t.landing) : json(nullptr)},
                {"epsilon", t.epsilon},
                {"converged", t.converged},
                {"agreement", t.agreement}};
}

RayTrace trace_from_json(const json& j) {
    RayTrace t;
    t.angle = angle_from_json(j.at("angle"));
    t.side = parse_side(j.at("side").get<std::string>());
    t.degree = j.value("degree", 2);
    for (const auto& s : j.at("samples")) t.samples.push_back({s[0].get<double>(), {s[1].get<double>(), s[2].get<double>()}});
    for (const auto& c : j.at("crashes")) {
        CrashEvent e;
        e.potential = c.at("s").get<double>();
        e.location = cplx_from_json(c.at("z"));
        e.order = c.value("order", 2);
        e.turn = c.value("turn", std::string("right")) == "left" ? Turn::left : Turn::right;
        e.critical_index = c.value("critical_index", -1);
        e.level = c.value("level", 0);
        e.miss = c.value("miss", 0.0);
        e.predicted = c.value("predicted", true);
        t.crashes.push_back(e);
    }
    t.terminal_potential = j.value("terminal_potential", 0.0);
    if (!j.at("landing").is_null()) t.landing = cplx_from_json(j["landing"]);
    t.epsilon = j.value("epsilon", 0.0);
    t.converged = j.value("converged", true);
    t.agreement = j.value("agreement", 0.0);
    return t;
}

json to_json(const IntervalSystem& s) {
    json arcs = json::array();
    for (const auto& a : s.arcs.arcs()) arcs.push_back({to_json(a.a), to_json(a.b)});
    json gaps = json::array();
    for (const auto& g : s.gaps) gaps.push_back({{"a", to_json(g.a)}, {"b", to_json(g.b)}, {"crash_s", g.crash_s}});
    return json{{"schema", schema::interval_system},
                {"s", s.s},
                {"k", s.k},
                {"d", s.d},
                {"full", s.arcs.full()},
                {"degenerate", s.degenerate},
                {"measure", s.measure()},
                {"endpoint_err", s.endpoint_err},
                {"arcs", arcs},
                {"gaps", gaps},
                {"notes", s.notes}};
}

IntervalSystem interval_system_from_json(const json& j) {
    IntervalSystem s;
    s.s = need<double>(j, "s", "interval system");
    s.k = j.value("k", 1);
    s.d = j.value("d", 2);
    s.degenerate = j.value("degenerate", false);
    s.endpoint_err = j.value("endpoint_err", 0.0);
    if (j.value("full", false)) {
        s.arcs = ArcSet::full_circle();
    } else {
        std::vector<Arc> arcs;
        for (const auto& a : j.at("arcs")) arcs.push_back(Arc{angle_from_json(a.at(0)), angle_from_json(a.at(1))});
        s.arcs = ArcSet(std::move(arcs));
    }
    for (const auto& g : j.value("gaps", json::array()))
        s.gaps.push_back(Gap{angle_from_json(g.at("a")), angle_from_json(g.at("b")), g.value("crash_s", 0.0)});
    if (j.contains("notes")) s.notes = j["notes"].get<std::vector<std::string>>();
    return s;
}

json to_json(const SStar& s) {
    return json{{"value", s.value}, {"degenerate", s.degenerate}, {"lo", s.lo}, {"hi", s.hi}, {"excluded", s.excluded}};
}

json to_json(const GapReport& g) {
    json gaps = json::array();
    for (const auto& r : g.gaps)
        gaps.push_back({{"a", to_json(r.a)},
                        {"b", to_json(r.b)},
                        {"length", r.length},
                        {"kind", to_string(r.kind)},
                        {"tautness", to_string(r.tautness)},
                        {"multiplicity", r.multiplicity},
                        {"orbit_class", to_string(r.orbit_class)},
                        {"orbit_steps", r.orbit_steps},
                        {"first_level", r.first_level},
                        {"crash_s", r.crash_s}});
    json cg = json::array();
    for (const auto& c : g.cantor_gaps) {
        json iso = json::array();
        for (const auto& a : c.isolated) iso.push_back(to_json(a));
        cg.push_back({{"a", to_json(c.a)},
                      {"b", to_json(c.b)},
                      {"multiplicity", c.multiplicity},
                      {"isolated", iso},
                      {"confidence", c.confidence}});
    }
    int major = 0;
    for (const auto& r : g.gaps) major += r.kind == GapKind::major;
    return json{{"gaps", gaps},
                {"major_count", major},
                {"cantor_gaps", cg},
                {"multiplicity_total", g.multiplicity_total},
                {"unresolved", g.unresolved},
                {"full_circle", g.full_circle}};
}

json to_json(const DimensionEstimate& d) {
    return json{{"estimate", d.estimate}, {"ceiling", d.ceiling}, {"applicable", d.applicable}};
}

json to_json(const ValenceAudit& v) {
    return json{{"max_cardinality", v.max_cardinality},
                {"bound", v.bound},
                {"strict", v.strict},
                {"ok", v.ok},
                {"worst", to_json(v.worst)},
                {"possibly_split", v.possibly_split}};
}

json to_json(const std::vector<FiberPoint>& f) {
    json out = json::array();
    for (const auto& p : f) out.push_back({{"angle", to_json(p.angle)}, {"err", p.err}, {"possibly_split", p.possibly_split}});
    return out;
}

json summary_json(const SemiconjTable& t) {
    json levels = json::array();
    for (const auto& l : t.levels)
        levels.push_back({{"n", l.n},
                          {"s", l.sys.s},
                          {"arcs", l.sys.arcs.size()},
                          {"gaps", l.sys.gaps.size()},
                          {"measure", l.sys.measure()},
                          {"C_size", l.C.size()}});
    return json{{"theta0", to_json(t.theta0)},
                {"D", t.D},
                {"k", t.k},
                {"d", t.d},
                {"n_max", t.n_max()},
                {"resolution", t.resolution},
                {"levels", levels},
                {"log", t.log}};
}

PortraitInput portrait_from_json(const json& j) {
    PortraitInput p;
    p.D = need<int>(j, "D", "portrait");
    p.k = need<int>(j, "k", "portrait");
    if (!j.contains("lambda_sets") || !j["lambda_sets"].is_array())
        throw Error("InvalidInput", "portrait: missing \"lambda_sets\"");
    for (const auto& set : j["lambda_sets"]) {
        std::vector<Angle> v;
        for (const auto& a : set) v.push_back(angle_from_json(a));
        p.lambda.push_back(std::move(v));
    }
    for (const auto& set : j.value("turn_sides", json::array())) {
        std::vector<Side> v;
        for (const auto& s : set) v.push_back(parse_side(s.get<std::string>()));
        p.turn_sides.push_back(std::move(v));
    }
    for (const auto& e : j.value("essential", json::array()))
        p.essential.push_back(SectorRef{e.at("base").get<int>(), angle_from_json(e.at("a")), angle_from_json(e.at("b"))});
    if (j.contains("d")) p.d = j["d"].get<int>();
    if (j.contains("N1")) p.N1 = j["N1"].get<int>();
    if (j.contains("N2")) p.N2 = j["N2"].get<int>();
    return p;
}

json to_json(const OrbitPortrait& p) {
    json lambda = json::array();
    for (const auto& set : p.lambda) {
        json v = json::array();
        for (const auto& a : set) v.push_back(to_json(a));
        lambda.push_back(v);
    }
    json cycles = json::array();
    for (const auto& c : p.cycles) {
        json v = json::array();
        for (const auto& a : c) v.push_back(to_json(a));
        cycles.push_back(v);
    }
    return json{{"D", p.D},
                {"k", p.k},
                {"ell", p.ell},
                {"orbit_length", p.orbit_length},
                {"lambda_sets", lambda},
                {"rotation", {{"p", p.rot_p}, {"q", p.rot_q}}},
                {"ray_period", p.ray_period},
                {"cycles", cycles}};
}

json to_json(const SectorSet& s) {
    json sectors = json::array();
    for (const auto& x : s.sectors)
        sectors.push_back({{"base", x.base},
                           {"a", to_json(x.a)},
                           {"b", to_json(x.b)},
                           {"length", x.length.str()},
                           {"weight", x.weight},
                           {"kind", to_string(x.kind)},
                           {"minimal", x.minimal},
                           {"contains", x.contains},
                           {"image", x.image},
                           {"preimage", x.preimage},
                           {"cycle", x.cycle},
                           {"a_attachable", x.a_attachable},
                           {"b_attachable", x.b_attachable}});
    return json{{"sectors", sectors},
                {"cycles", s.cycles},
                {"essential", s.count(SectorKind::essential)},
                {"ghost", s.count(SectorKind::ghost)},
                {"minimal", s.minimal_count()},
                {"essential_cycles", s.essential_cycles},
                {"ghost_cycles", s.ghost_cycles},
                {"notes", s.notes}};
}

json to_json(const AuditReport& a) {
    json lines = json::array();
    for (const auto& l : a.lines) lines.push_back({{"name", l.name}, {"pass", l.pass}, {"lhs", l.lhs}, {"rhs", l.rhs}});
    return json{{"ok", a.ok}, {"lines", lines}};
}

ModelInput model_from_json(const json& j) {
    ModelInput m;
    m.D = need<int>(j, "D", "model");
    m.d = need<int>(j, "d", "model");
    m.j = j.value("j", 0);
    for (const auto& c : need<std::vector<std::string>>(j, "choices", "model")) m.choices.push_back(parse_wake_side(c));
    return m;
}

json to_json(const SurgeryModel& m) {
    json wakes = json::array();
    for (const auto& w : m.wakes)
        wakes.push_back({{"i", w.i},
                         {"side", to_string(w.side)},
                         {"theta", to_json(w.theta)},
                         {"theta_prime", to_json(w.theta_prime)},
                         {"J", {to_json(w.J.a), to_json(w.J.b)}}});
    json fib = json::array(), iso = json::array();
    for (const auto& a : m.predicted_fiber) fib.push_back(to_json(a));
    for (const auto& a : m.isolated_candidates) iso.push_back(to_json(a));
    return json{{"schema", schema::surgery_model},
                {"D", m.D},
                {"d", m.d},
                {"j", m.j},
                {"j_requested", m.j_requested},
                {"wakes", wakes},
                {"predicted_fiber", fib},
                {"isolated_candidates", iso},
                {"notes", m.notes}};
}

json to_json(const VerificationReport& r) {
    json lines = json::array();
    for (const auto& l : r.lines) lines.push_back({{"property", l.property}, {"pass", l.pass}, {"detail", l.detail}});
    json landing = json::array();
    for (const auto& z : r.landing) landing.push_back(to_json(z));
    return json{{"ok", r.ok}, {"lines", lines}, {"landing", landing}};
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot read " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json read_json(const std::filesystem::path& path) {
    std::string text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error("InvalidInput", path.string() + ": " + e.what());
    }
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    static std::atomic<unsigned> counter{0};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("IoError", "cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw Error("IoError", "write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("IoError", "rename to " + path.string() + " failed: " + ec.message());
    }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_json(const std::filesystem::path& path, const json& j) { write_atomic(path, dump(j)); }

std::string content_hash(const std::string& text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

} // namespace rayatlas
