#include "rayatlas/pipeline.hpp"
#include "rayatlas/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>

namespace rayatlas {

namespace fs = std::filesystem;

void RunConfig::validate() const {
    auto pos = [](double v, const char* name) {
        if (!(v > 0)) throw Error("InvalidConfig", std::string(name) + " must be > 0");
    };
    pos(trace.s_min, "s-min");
    pos(trace.eps0, "eps0");
    pos(trace.accept_tol, "accept-tol");
    pos(trace.landing_tol, "landing-tol");
    pos(coland_tol, "coland-tol");
    pos(s0_factor, "s0-factor");
    if (s0_factor >= 1) throw Error("InvalidConfig", "s0-factor must be < 1");
    if (k && *k < 1) throw Error("InvalidConfig", "k must be >= 1");
    if (d && *d < 2) throw Error("InvalidConfig", "d must be >= 2");
    if (n_max < 1 || n_max > 16) throw Error("InvalidConfig", "n-max must be in 1..16");
    if (width < 8 || height < 8) throw Error("InvalidConfig", "image must be at least 8x8");
    if (trace.steps_per_level < 2 || trace.landing_window < 4) throw Error("InvalidConfig", "trace sampling too coarse");
}

void apply_json(RunConfig& c, const json& j) {
    if (!j.is_object()) throw Error("InvalidConfig", "config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "poly") c.poly = v.get<std::string>();
            else if (key == "seed") c.seed = cplx_from_json(v);
            else if (key == "k") c.k = v.get<int>();
            else if (key == "d") c.d = v.get<int>();
            else if (key == "n-max") c.n_max = v.get<int>();
            else if (key == "s0-factor") c.s0_factor = v.get<double>();
            else if (key == "orbit-depth") c.orbit_depth = v.get<int>();
            else if (key == "valence-depth") c.valence_depth = v.get<int>();
            else if (key == "n2") c.n2 = v.get<int>();
            else if (key == "s-min" || key == "min-potential") c.trace.s_min = v.get<double>();
            else if (key == "steps-per-level") c.trace.steps_per_level = v.get<int>();
            else if (key == "eps0") c.trace.eps0 = v.get<double>();
            else if (key == "accept-tol") c.trace.accept_tol = v.get<double>();
            else if (key == "landing-window") c.trace.landing_window = v.get<int>();
            else if (key == "landing-tol") c.trace.landing_tol = v.get<double>();
            else if (key == "coland-tol") c.coland_tol = v.get<double>();
            else if (key == "out-dir") c.out_dir = v.get<std::string>();
            else if (key == "cache-dir") c.cache_dir = v.get<std::string>();
            else if (key == "image") c.image = v.get<bool>();
            else if (key == "width") c.width = v.get<int>();
            else if (key == "height") c.height = v.get<int>();
            else if (key == "max-iter") c.max_iter = v.get<int>();
            else if (key == "threads") c.threads = v.get<int>();
            else throw Error("InvalidConfig", "unknown key \"" + key + "\"");
        } catch (const json::exception& e) {
            throw Error("InvalidConfig", "bad value for \"" + key + "\": " + e.what());
        }
    }
}

json to_json(const RunConfig& c) {
    json j{{"poly", c.poly.string()},
           {"n-max", c.n_max},
           {"s0-factor", c.s0_factor},
           {"orbit-depth", c.orbit_depth},
           {"valence-depth", c.valence_depth},
           {"n2", c.n2},
           {"s-min", c.trace.s_min},
           {"steps-per-level", c.trace.steps_per_level},
           {"eps0", c.trace.eps0},
           {"accept-tol", c.trace.accept_tol},
           {"landing-window", c.trace.landing_window},
           {"landing-tol", c.trace.landing_tol},
           {"coland-tol", c.coland_tol},
           {"image", c.image},
           {"width", c.width},
           {"height", c.height},
           {"max-iter", c.max_iter}};
    if (c.seed) j["seed"] = to_json(*c.seed);
    if (c.k) j["k"] = *c.k;
    if (c.d) j["d"] = *c.d;
    return j;
}

fs::path cache_dir_from_env() {
    const char* v = std::getenv("RAYATLAS_CACHE");
    return v && *v ? fs::path(v) : fs::path();
}

fs::path Cache::path(const std::string& kind, const std::string& key) const { return dir_ / kind / (key + ".json"); }

std::optional<json> Cache::get(const std::string& kind, const std::string& key) const {
    if (!enabled()) return std::nullopt;
    fs::path p = path(kind, key);
    std::error_code ec;
    if (!fs::exists(p, ec)) return std::nullopt;
    try {
        return json::parse(read_file(p));
    } catch (const std::exception&) {
        return std::nullopt; // unreadable entries are recomputed
    }
}

void Cache::put(const std::string& kind, const std::string& key, const json& value) const {
    if (enabled()) write_json(path(kind, key), value);
}

namespace {

json trace_opts_json(const TraceOptions& o) {
    return json{{"s_min", o.s_min},       {"steps_per_level", o.steps_per_level}, {"eps0", o.eps0},
                {"eps_floor", o.eps_floor}, {"accept_tol", o.accept_tol},        {"landing_window", o.landing_window},
                {"landing_tol", o.landing_tol}};
}

json critical_json(const RayTracer& rt) {
    json out = json::array();
    for (const auto& c : rt.critical())
        out.push_back({{"z", to_json(c.location)}, {"multiplicity", c.multiplicity}, {"escaping", c.escaping}, {"potential", c.potential}});
    return out;
}

int escaping_multiplicity(const RayTracer& rt) {
    int n = 0;
    for (const auto& c : rt.critical()) n += c.escaping ? c.multiplicity : 0;
    return n;
}

json angles_json(const std::vector<Angle>& v) {
    json out = json::array();
    for (const auto& a : v) out.push_back(to_json(a));
    return out;
}

SemiconjTable table_from(const RayTracer& rt, const Ladder& l) { return build_pi_table(l.levels, rt.poly().degree()); }

} // namespace

RayTrace cached_trace(const RayTracer& rt, const Cache& cache, const Angle& theta, Side side, const TraceOptions& opt) {
    std::string key = content_hash(rt.poly().hash() + "|" + theta.str() + "|" + to_string(side) + "|" + trace_opts_json(opt).dump());
    if (auto hit = cache.get("traces", key)) return trace_from_json(*hit);
    RayTrace t = rt.trace(theta, side, opt);
    cache.put("traces", key, to_json(t));
    return t;
}

Ladder cached_ladder(const RayTracer& rt, const Cache& cache, const ComponentSeed& seed, int d, int n_max, double s0_factor) {
    json id{{"poly", rt.poly().hash()}, {"seed", to_json(seed.marker)}, {"k", seed.k}, {"d", d}, {"n_max", n_max}, {"s0_factor", s0_factor}};
    std::string key = content_hash(id.dump());
    Ladder l;
    if (auto hit = cache.get("ladders", key)) {
        const json& s = hit->at("s_star");
        l.s_star.value = s.at("value").get<double>();
        l.s_star.degenerate = s.at("degenerate").get<bool>();
        l.s_star.lo = s.at("lo").get<double>();
        l.s_star.hi = s.at("hi").get<double>();
        l.s_star.excluded = s.at("excluded").get<std::vector<int>>();
        for (const auto& x : hit->at("levels")) l.levels.push_back(interval_system_from_json(x));
        l.from_cache = true;
        return l;
    }
    l.s_star = estimate_s_star(rt, seed, d);
    IntervalSystem base = extract_interval_system(rt, seed, l.s_star.degenerate ? 1.0 : s0_factor * l.s_star.value, d);
    l.levels = build_ladder(rt, base, n_max);
    json levels = json::array();
    for (const auto& x : l.levels) levels.push_back(to_json(x));
    cache.put("ladders", key, json{{"id", id}, {"s_star", to_json(l.s_star)}, {"levels", levels}});
    return l;
}

json trace_report(const RayTracer& rt, const Cache& cache, const Angle& theta, Side side, const TraceOptions& opt) {
    RayTrace t = cached_trace(rt, cache, theta, side, opt);
    json j = to_json(t);
    j["s_min"] = opt.s_min;
    // still crashing in the last potential level above s_min: the trace was cut off, not finished
    double lowest = INFINITY;
    for (const auto& c : t.crashes) lowest = std::min(lowest, c.potential);
    j["truncated"] = !t.crashes.empty() && lowest < rt.poly().degree() * opt.s_min * (1 + 1e-9);
    return j;
}

json angle_set_report(const RayTracer& rt, const Cache& cache, const ComponentSeed& seed, int d, int levels,
                      double s0_factor, std::optional<double> potential) {
    json crash = json::array();
    for (std::size_t i = 0; i < rt.critical().size(); ++i) {
        if (!rt.critical()[i].escaping) continue;
        crash.push_back({{"critical_index", i}, {"potential", rt.critical()[i].potential},
                         {"angles", angles_json(rt.crash_angles(static_cast<int>(i)))}});
    }
    json j{{"schema", schema::angle_set}, {"degree", rt.poly().degree()}, {"critical", critical_json(rt)}, {"crash_angles", crash}};
    if (escaping_multiplicity(rt) == 0) {
        j["connected"] = true;
        j["levels"] = json::array({to_json(extract_interval_system(rt, seed, 1.0, d))});
        return j;
    }
    j["connected"] = false;
    if (potential) {
        j["levels"] = json::array({to_json(extract_interval_system(rt, seed, *potential, d))});
        return j;
    }
    Ladder l = cached_ladder(rt, cache, seed, d, levels, s0_factor);
    j["s_star"] = to_json(l.s_star);
    json lv = json::array();
    for (const auto& x : l.levels) lv.push_back(to_json(x));
    j["levels"] = lv;
    return j;
}

json semiconj_report(const RayTracer& rt, const Cache& cache, const ComponentSeed& seed, int d, int n_max,
                     double s0_factor, const std::vector<Angle>& taus, int orbit_depth, int valence_depth) {
    Ladder l = cached_ladder(rt, cache, seed, d, n_max, s0_factor);
    SemiconjTable t = table_from(rt, l);
    json fibers = json::array();
    for (const auto& tau : taus) fibers.push_back({{"tau", to_json(tau)}, {"fiber", to_json(fiber(t, tau))}});
    json ratios = json::array();
    for (std::size_t n = 0; n + 1 < l.levels.size(); ++n)
        ratios.push_back(l.levels[n].measure() > 0 ? l.levels[n + 1].measure() / l.levels[n].measure() : 0.0);
    return json{{"schema", schema::semiconj},
                {"s_star", to_json(l.s_star)},
                {"table", summary_json(t)},
                {"length_ratios", ratios},
                {"expected_ratio", static_cast<double>(d) / std::pow(rt.poly().degree(), seed.k)},
                {"gaps", to_json(classify_gaps(t, orbit_depth))},
                {"dimension", to_json(box_dimension_estimate(t))},
                {"valence", to_json(valence_audit(t, std::min(valence_depth, t.n_max())))},
                {"fibers", fibers}};
}

json portrait_report(const PortraitInput& in) {
    OrbitPortrait p = build_portrait(in.D, in.k, in.lambda, in.turn_sides);
    SectorSet s = sectors_of(p, in.essential);
    json j{{"schema", schema::portrait}, {"portrait", to_json(p)}, {"unlinked", unlinked(p)}, {"sectors", to_json(s)}};
    json fs = json::array();
    for (int b = 0; b < p.orbit_length; ++b) fs.push_back(fiber_sizes(s, b));
    j["fiber_sizes"] = fs;
    if (!in.essential.empty()) j["n1_estimate"] = estimate_n1(s);
    if (in.d) {
        int N1 = in.N1 ? *in.N1 : estimate_n1(s);
        int N2 = in.N2 ? *in.N2 : 0;
        j["audit"] = to_json(audit_counts(p, s, *in.d, N1, N2));
        j["audit"]["N1"] = N1;
        j["audit"]["N2"] = N2;
    }
    return j;
}

json surgery_report(const ModelInput& in) {
    SurgeryModel m = build_model(in.D, in.d, in.j, in.choices);
    json j = to_json(m);
    auto all = enumerate_collections(m.D, m.d, m.j);
    j["collections"] = all.size();
    j["expected_collections"] = m.D - m.d + 1;
    if (static_cast<int>(all.size()) != m.D - m.d + 1)
        j["notes"].push_back("collection count " + std::to_string(all.size()) + " differs from D-d+1");
    json ex = json::array();
    for (const auto& w : m.wakes) {
        auto a = wake_exhaustion(m, w.i, 6);
        ex.push_back({{"i", w.i}, {"alpha", angles_json(a)}});
    }
    j["wake_exhaustion"] = ex;
    return j;
}

json verify_report(const ModelInput& in, const RayTracer& rt, const ComponentSeed& seed, const VerifyOptions& opt) {
    SurgeryModel m = build_model(in.D, in.d, in.j, in.choices);
    json j = to_json(verify_against_polynomial(m, rt, seed, opt));
    j["schema"] = schema::verify;
    j["model"] = to_json(m);
    j["model"].erase("schema");
    return j;
}

Frame default_frame(const PolynomialFile& pf, int width, int height) {
    Frame f;
    f.width = width;
    f.height = height;
    if (pf.view) {
        f.view.center = pf.scale * pf.view->center;
        f.view.radius = std::abs(pf.scale) * pf.view->radius;
    } else {
        f.view.radius = std::min(pf.poly.escape_radius(), 4.0);
    }
    return f;
}

Image render_with_overlays(const RayTracer& rt, const Cache& cache, const Frame& f, const Overlay& o,
                           const TraceOptions& topt, const RenderOptions& ropt) {
    RenderOptions r = ropt;
    r.levels.insert(r.levels.end(), o.levels.begin(), o.levels.end());
    Image img = render_escape(rt.poly(), f, r);
    const double dot = std::max(2.0, f.width / 150.0);
    for (const auto& [theta, side] : o.rays) {
        RayTrace t = cached_trace(rt, cache, theta, side, topt);
        std::vector<cplx> pts;
        for (const auto& s : t.samples) pts.push_back(s.z);
        draw_polyline(img, f, pts, {230, 60, 40});
        for (const auto& c : t.crashes) draw_disc(img, f, c.location, dot * 0.6, {250, 210, 40});
        if (t.landing) draw_disc(img, f, *t.landing, dot, {60, 200, 90});
    }
    if (o.critical)
        for (const auto& c : rt.critical())
            if (c.escaping) draw_disc(img, f, c.location, dot, {220, 30, 30});
    return img;
}

std::string text_summary(const json& j) {
    std::ostringstream os;
    auto walk = [&](auto&& self, const json& v, const std::string& path) -> void {
        if (v.is_object()) {
            if (v.empty()) os << path << " = {}\n";
            for (const auto& [k, x] : v.items()) self(self, x, path.empty() ? k : path + "." + k);
        } else if (v.is_array()) {
            if (v.empty()) os << path << " = []\n";
            for (std::size_t i = 0; i < v.size(); ++i) self(self, v[i], path + "[" + std::to_string(i) + "]");
        } else {
            os << path << " = " << (v.is_string() ? v.get<std::string>() : v.dump()) << "\n";
        }
    };
    walk(walk, j, "");
    return os.str();
}

namespace {

struct Landed {
    Angle angle;
    Side side = Side::smooth;
    std::optional<cplx> z;
    RayTrace trace;
    std::string error;
};

// smooth if possible, else the one-sided ray landing closest to the reference point
Landed land(const RayTracer& rt, const Cache& cache, const Angle& a, const TraceOptions& o, std::optional<cplx> ref) {
    Landed out;
    out.angle = a;
    try {
        out.trace = cached_trace(rt, cache, a, Side::smooth, o);
        out.z = out.trace.landing;
        return out;
    } catch (const Error& e) {
        if (e.code() != "SideRequired") {
            out.error = e.what();
            return out;
        }
    }
    double best = INFINITY;
    for (Side s : {Side::plus, Side::minus}) {
        try {
            RayTrace t = cached_trace(rt, cache, a, s, o);
            if (!t.landing) continue;
            double score = ref ? std::abs(*t.landing - *ref) : std::abs(eval(rt.poly(), *t.landing) - *t.landing);
            if (score < best) {
                best = score;
                out.side = s;
                out.z = t.landing;
                out.trace = std::move(t);
            }
        } catch (const Error& e) {
            out.error = e.what();
        }
    }
    return out;
}

} // namespace

AnalyzeResult run_analyze(const RunConfig& c) {
    c.validate();
    PolynomialFile pf = load_polynomial(c.poly);
    const int D = pf.poly.degree();
    ComponentSeed seed;
    seed.marker = pf.scale * c.seed.value_or(pf.seed.value_or(cplx{0.0, 0.0}));
    seed.k = c.k.value_or(pf.k.value_or(1));
    RayTracer rt(pf.poly);
    const int esc = escaping_multiplicity(rt);
    // connected case: the restriction is P itself
    const int d = c.d.value_or(pf.d.value_or(esc == 0 ? D : 2));
    if (esc > 0 && d >= D) throw Error("InvalidConfig", "need d < D = " + std::to_string(D));
    Cache cache(c.cache_dir);
    AnalyzeResult res;
    const fs::path stages = c.out_dir / "stages";

    auto persist = [&](const std::string& name, const json& j) {
        json doc{{"schema", schema::stage}, {"stage", name}, {"data", j}};
        write_json(stages / (name + ".json"), doc);
        res.files.push_back(fs::path("stages") / (name + ".json"));
    };

    json report{{"schema", schema::report}};
    json cfg = to_json(c);
    report["config"] = cfg;
    json coeffs = json::array();
    for (const auto& z : pf.raw) coeffs.push_back(to_json(z));
    report["input"] = {{"name", pf.name},
                       {"coeffs", coeffs},
                       {"scale", to_json(pf.scale)},
                       {"poly_hash", pf.poly.hash()},
                       {"D", D},
                       {"k", seed.k},
                       {"d", d},
                       {"seed", to_json(seed.marker)}};
    report["critical"] = {{"points", critical_json(rt)},
                          {"escaping", esc},
                          {"expected_escaping", D - d},
                          {"ok", seed.k > 1 || esc == D - d}};
    persist("01_critical", report["critical"]);

    std::vector<std::pair<Angle, Side>> overlay_rays;
    std::vector<double> overlay_levels;
    if (esc == 0) {
        // connected filled Julia set: I is the whole circle and Pi is the identity up to rotation
        IntervalSystem full = extract_interval_system(rt, seed, 1.0, d);
        report["degenerate"] = true;
        report["notes"] = json::array({"no escaping critical point: the filled Julia set is connected, I is the whole circle"});
        report["ladder"] = {{"levels", json::array({to_json(full)})}};
        persist("02_ladder", report["ladder"]);
        overlay_rays.push_back({Angle::rational(0, 1), Side::smooth});
        overlay_levels.push_back(1.0);
    } else {
        report["degenerate"] = false;
        Ladder l = cached_ladder(rt, cache, seed, d, c.n_max, c.s0_factor);
        json lv = json::array();
        for (std::size_t n = 0; n < l.levels.size(); ++n) {
            const auto& x = l.levels[n];
            json e{{"n", n}, {"s", x.s}, {"measure", x.measure()}, {"arcs", x.arcs.size()}, {"gaps", x.gaps.size()}};
            if (n > 0) e["ratio"] = l.levels[n - 1].measure() > 0 ? x.measure() / l.levels[n - 1].measure() : 0.0;
            lv.push_back(e);
        }
        report["ladder"] = {{"s_star", to_json(l.s_star)},
                            {"expected_ratio", static_cast<double>(d) / std::pow(D, seed.k)},
                            {"levels", lv}};
        {
            json full = json::array();
            for (const auto& x : l.levels) full.push_back(to_json(x));
            persist("02_ladder", {{"s_star", to_json(l.s_star)}, {"levels", full}});
        }
        overlay_levels.push_back(l.levels.front().s);
        if (l.levels.size() > 1) overlay_levels.push_back(l.levels[1].s);

        SemiconjTable t = table_from(rt, l);
        GapReport gaps = classify_gaps(t, c.orbit_depth);
        auto f0 = fiber(t, Angle::rational(0, 1));
        report["semiconj"] = {{"table", summary_json(t)},
                              {"gaps", to_json(gaps)},
                              {"dimension", to_json(box_dimension_estimate(t))},
                              {"valence", to_json(valence_audit(t, std::min(c.valence_depth, t.n_max())))},
                              {"fiber0", to_json(f0)}};
        persist("03_semiconj", report["semiconj"]);

        // rays of the fiber over 0 and their common landing point
        std::vector<Landed> landed;
        std::optional<cplx> ref;
        for (const auto& fp : f0) {
            landed.push_back(land(rt, cache, fp.angle, c.trace, ref));
            if (!ref && landed.back().z) ref = landed.back().z;
        }
        json rays = json::array();
        double spread = 0.0;
        for (const auto& x : landed) {
            rays.push_back({{"angle", to_json(x.angle)},
                            {"side", to_string(x.side)},
                            {"landing", x.z ? to_json(*x.z) : json(nullptr)},
                            {"crashes", x.trace.crashes.size()},
                            {"error", x.error}});
            if (x.z && ref) spread = std::max(spread, std::abs(*x.z - *ref));
            overlay_rays.push_back({x.angle, x.side});
        }
        bool all_landed = std::all_of(landed.begin(), landed.end(), [](const Landed& x) { return x.z.has_value(); });
        json land{{"rays", rays}, {"all_landed", all_landed}, {"spread", spread}};
        if (ref) {
            land["beta"] = to_json(*ref);
            land["fixed_residual"] = std::abs(eval(rt.poly(), *ref) - *ref);
            land["coland"] = all_landed && spread <= c.coland_tol;
        }
        report["landing"] = land;
        persist("04_landing", land);

        // orbit portrait of the landing point
        json pj;
        bool exact = !f0.empty() && std::all_of(f0.begin(), f0.end(), [](const FiberPoint& x) { return x.angle.exact(); });
        if (!exact) {
            pj = {{"skipped", "fiber over 0 is not exact"}};
        } else {
            try {
                std::vector<Angle> lam;
                std::vector<Side> sides;
                for (const auto& x : landed) {
                    lam.push_back(x.angle);
                    sides.push_back(x.side);
                }
                OrbitPortrait p = build_portrait(D, seed.k, {lam}, {sides});
                SectorSet s = sectors_of(p, t);
                int N1 = estimate_n1(s);
                pj = {{"portrait", to_json(p)}, {"sectors", to_json(s)}, {"unlinked", unlinked(p)}};
                pj["audit"] = to_json(audit_counts(p, s, d, N1, c.n2));
                pj["audit"]["N1"] = N1;
                pj["audit"]["N2"] = c.n2;
            } catch (const Error& e) {
                pj = {{"skipped", e.what()}};
            }
        }
        report["portrait"] = pj;
        persist("05_portrait", pj);
    }

    if (c.image) {
        Frame f = default_frame(pf, c.width, c.height);
        RenderOptions ro;
        ro.max_iter = c.max_iter;
        ro.threads = c.threads;
        Overlay o;
        o.rays = overlay_rays;
        o.levels = overlay_levels;
        Image img = render_with_overlays(rt, cache, f, o, c.trace, ro);
        std::string bytes = to_ppm(img);
        write_atomic(c.out_dir / "image.ppm", bytes);
        res.files.push_back("image.ppm");
        report["image"] = {{"file", "image.ppm"},
                           {"width", img.width},
                           {"height", img.height},
                           {"hash", content_hash(bytes)},
                           {"center", to_json(f.view.center)},
                           {"radius", f.view.radius}};
    }

    res.report = report;
    res.text = text_summary(report);
    write_json(c.out_dir / "report.json", report);
    write_atomic(c.out_dir / "report.txt", res.text);
    res.files.push_back("report.json");
    res.files.push_back("report.txt");
    return res;
}

} // namespace rayatlas
