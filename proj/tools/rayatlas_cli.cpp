#include "rayatlas/error.hpp"
#include "rayatlas/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <set>

using namespace rayatlas;

namespace {

// exit codes
constexpr int kOk = 0;
constexpr int kInput = 1;
constexpr int kNumerical = 2;
constexpr int kUnverified = 3;

bool input_error(const std::string& code) {
    static const std::set<std::string> codes = {"InvalidInput",  "InvalidConfig",       "IoError",
                                                "InvalidArgument", "InvalidChoices",    "InconsistentPortrait",
                                                "InvalidPolynomial", "SeedEscapes"};
    return codes.count(code) > 0;
}

cplx parse_point(const std::string& s) {
    auto comma = s.find(',');
    try {
        if (comma == std::string::npos) return {std::stod(s), 0.0};
        return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
    } catch (const std::exception&) {
        throw Error("InvalidArgument", "expected re,im, got '" + s + "'");
    }
}

// "1/2", "1/2+", "1/2-"
std::pair<Angle, Side> parse_ray(std::string s) {
    Side side = Side::smooth;
    if (!s.empty() && (s.back() == '+' || s.back() == '-')) {
        side = s.back() == '+' ? Side::plus : Side::minus;
        s.pop_back();
    }
    return {Angle::parse(s), side};
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Config values replace the matching flags given on the command line.
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
    std::string path;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (path.empty()) return rest;
    json cfg = read_json(path);
    if (!cfg.is_object()) throw Error("InvalidConfig", path + ": config must be a JSON object");

    std::vector<std::string> kept;
    for (std::size_t i = 0; i < rest.size(); ++i) {
        const std::string& a = rest[i];
        if (a.rfind("--", 0) == 0) {
            std::string name = a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2);
            if (cfg.contains(name)) {
                bool inline_value = a.find('=') != std::string::npos;
                if (!inline_value && i + 1 < rest.size() && rest[i + 1].rfind("--", 0) != 0) ++i;
                continue;
            }
        }
        kept.push_back(a);
    }
    for (const auto& [key, v] : cfg.items()) {
        auto scalar = [](const json& x) {
            if (x.is_string()) return x.get<std::string>();
            if (x.is_array() && x.size() == 2 && x[0].is_number()) return x[0].dump() + "," + x[1].dump();
            return x.dump();
        };
        if (v.is_boolean()) {
            kept.push_back("--" + key + "=" + (v.get<bool>() ? "true" : "false"));
        } else if (v.is_array() && !(v.size() == 2 && v[0].is_number())) {
            for (const auto& x : v) {
                kept.push_back("--" + key);
                kept.push_back(scalar(x));
            }
        } else {
            kept.push_back("--" + key);
            kept.push_back(scalar(v));
        }
    }
    return kept;
}

void emit(const json& j, const std::string& out) {
    if (out.empty()) {
        std::cout << dump(j);
    } else {
        write_json(out, j);
    }
}

struct Common {
    std::string poly;
    std::string seed;
    int k = 0, d = 0;
    std::string cache_dir = cache_dir_from_env().string();
    std::string out;

    void add(CLI::App* app, bool needs_poly) {
        auto* o = app->add_option("--poly", poly, "polynomial JSON file");
        if (needs_poly) o->required();
        app->add_option("--seed", seed, "marker point in the component, re,im");
        app->add_option("--k", k, "period of the component");
        app->add_option("--d", d, "degree of the polynomial-like restriction");
        app->add_option("--cache-dir", cache_dir, "cache directory (default $RAYATLAS_CACHE)");
        app->add_option("--out", out, "output file (default stdout)");
    }
    ComponentSeed component(const PolynomialFile& pf) const {
        ComponentSeed s;
        s.marker = pf.scale * (seed.empty() ? pf.seed.value_or(cplx{0.0, 0.0}) : parse_point(seed));
        s.k = k > 0 ? k : pf.k.value_or(1);
        return s;
    }
    int degree_d(const PolynomialFile& pf) const { return d > 0 ? d : pf.d.value_or(2); }
};

void add_trace_options(CLI::App* app, TraceOptions& t) {
    app->add_option("--min-potential,--s-min", t.s_min, "lowest potential traced");
    app->add_option("--steps-per-level", t.steps_per_level);
    app->add_option("--eps0", t.eps0, "first one-sided offset");
    app->add_option("--accept-tol", t.accept_tol);
    app->add_option("--landing-window", t.landing_window);
    app->add_option("--landing-tol", t.landing_tol);
}

ModelInput model_input(const std::string& file, int D, int d, int j, const std::string& choices) {
    if (!file.empty()) return model_from_json(read_json(file));
    if (D == 0) throw Error("InvalidArgument", "give --model or --D/--d/--choices");
    ModelInput m;
    m.D = D;
    m.d = d;
    m.j = j;
    for (const auto& c : split(choices)) m.choices.push_back(parse_wake_side(c));
    return m;
}

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string command = "rayatlas";
    try {
        args = merge_config(args);
    } catch (const Error& e) {
        std::cout << dump(json{{"schema", schema::error}, {"command", command}, {"code", e.code()}, {"message", e.what()}});
        return kInput;
    }

    CLI::App app{"External rays, interval systems and semiconjugacies of disconnected polynomial Julia sets"};
    app.require_subcommand(1);
    app.add_option("--config", "JSON file whose keys override the matching flags");

    Common common;
    TraceOptions topt;

    // trace
    auto* trace = app.add_subcommand("trace", "trace one external ray");
    std::string angle_text, side_text = "smooth", trace_image;
    common.add(trace, true);
    trace->add_option("--angle", angle_text, "angle, p/q or decimal")->required();
    trace->add_option("--side", side_text, "smooth, plus or minus");
    trace->add_option("--image", trace_image, "also write an overlay PPM");
    add_trace_options(trace, topt);

    // angle-set
    auto* aset = app.add_subcommand("angle-set", "crash angle sets and the interval systems I_s");
    int aset_levels = 6;
    double s0_factor = 0.9;
    std::optional<double> potential;
    common.add(aset, true);
    aset->add_option("--levels", aset_levels, "ladder depth");
    aset->add_option("--s0-factor", s0_factor, "base level as a fraction of s*");
    aset->add_option("--potential", potential, "single level at this potential instead of the ladder");

    // semiconj
    auto* semi = app.add_subcommand("semiconj", "semiconjugacy table, gaps, fibers and dimension");
    int n_max = 10, orbit_depth = 20, valence_depth = 10;
    std::vector<std::string> taus;
    common.add(semi, true);
    semi->add_option("--n-max", n_max, "ladder depth");
    semi->add_option("--s0-factor", s0_factor);
    semi->add_option("--tau", taus, "fiber over tau (repeatable, default 0)");
    semi->add_option("--orbit-depth", orbit_depth);
    semi->add_option("--valence-depth", valence_depth);

    // portrait
    auto* port = app.add_subcommand("portrait", "orbit portrait, sectors and audits from an angle file");
    std::string portrait_file;
    port->add_option("--input", portrait_file, "portrait JSON file")->required();
    port->add_option("--out", common.out, "output file (default stdout)");

    // surgery-model
    auto* surg = app.add_subcommand("surgery-model", "wake model for a choice of critical wakes");
    std::string model_file, choices;
    int mD = 0, md = 2, mj = 0;
    auto add_model = [&](CLI::App* a) {
        a->add_option("--model", model_file, "model JSON file");
        a->add_option("--D", mD, "degree");
        a->add_option("--d", md, "restriction degree");
        a->add_option("--j", mj, "window start");
        a->add_option("--choices", choices, "comma separated left/right");
    };
    add_model(surg);
    surg->add_option("--out", common.out, "output file (default stdout)");

    // verify
    auto* ver = app.add_subcommand("verify", "check a wake model against a polynomial");
    VerifyOptions vopt;
    bool no_semiconj = false;
    add_model(ver);
    ver->add_option("--poly", common.poly, "polynomial JSON file")->required();
    ver->add_option("--seed", common.seed);
    ver->add_option("--k", common.k);
    ver->add_option("--out", common.out);
    ver->add_option("--n-max", vopt.n_max);
    ver->add_option("--angle-tol", vopt.angle_tol);
    ver->add_option("--coland-tol", vopt.coland_tol);
    ver->add_option("--min-potential,--s-min", vopt.s_min);
    ver->add_flag("--no-semiconj", no_semiconj, "skip the fiber comparison");

    // render
    auto* rend = app.add_subcommand("render", "escape-time image with overlays (PPM P6)");
    std::string center_text, image_out = "image.ppm";
    double radius = 0.0;
    int width = 600, height = 600, max_iter = 2000, threads = 0;
    std::vector<std::string> rays;
    std::vector<double> levels;
    bool no_critical = false;
    rend->add_option("--poly", common.poly)->required();
    rend->add_option("--cache-dir", common.cache_dir);
    rend->add_option("--out", image_out, "PPM file");
    rend->add_option("--center", center_text, "re,im");
    rend->add_option("--radius", radius, "half width of the frame");
    rend->add_option("--width", width);
    rend->add_option("--height", height);
    rend->add_option("--max-iter", max_iter);
    rend->add_option("--threads", threads);
    rend->add_option("--ray", rays, "angle with optional + or - (repeatable)");
    rend->add_option("--level", levels, "equipotential G = s (repeatable)");
    rend->add_flag("--no-critical", no_critical, "do not mark escaping critical points");
    add_trace_options(rend, topt);

    // report / analyze
    auto* rep = app.add_subcommand("report", "full pipeline: ladder, semiconjugacy, landing, portrait, audits, image");
    rep->alias("analyze");
    RunConfig rc;
    std::string rc_poly, rc_seed, rc_out = rc.out_dir.string(), rc_cache = cache_dir_from_env().string();
    int rc_k = 0, rc_d = 0;
    bool rc_no_image = false;
    rep->add_option("--poly", rc_poly)->required();
    rep->add_option("--seed", rc_seed);
    rep->add_option("--k", rc_k);
    rep->add_option("--d", rc_d);
    rep->add_option("--n-max", rc.n_max);
    rep->add_option("--s0-factor", rc.s0_factor);
    rep->add_option("--orbit-depth", rc.orbit_depth);
    rep->add_option("--valence-depth", rc.valence_depth);
    rep->add_option("--n2", rc.n2, "escaping critical values outside minimal ghost sectors");
    rep->add_option("--coland-tol", rc.coland_tol);
    rep->add_option("--out-dir", rc_out);
    rep->add_option("--cache-dir", rc_cache);
    rep->add_option("--width", rc.width);
    rep->add_option("--height", rc.height);
    rep->add_option("--max-iter", rc.max_iter);
    rep->add_option("--threads", rc.threads);
    rep->add_flag("--no-image", rc_no_image);
    add_trace_options(rep, rc.trace);

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        for (auto* sc : app.get_subcommands()) command = sc->get_name();
        std::cerr << e.what() << "\nRun with --help for more information.\n";
        std::cout << dump(json{{"schema", schema::error}, {"command", command}, {"code", "InvalidArgument"}, {"message", e.what()}});
        return kInput;
    }

    for (auto* sc : app.get_subcommands()) command = sc->get_name();
    try {
        Cache cache(common.cache_dir);
        if (*trace) {
            PolynomialFile pf = load_polynomial(common.poly);
            RayTracer rt(pf.poly);
            auto [theta, side] = std::pair{Angle::parse(angle_text), parse_side(side_text)};
            json j = trace_report(rt, cache, theta, side, topt);
            j["poly"] = pf.name;
            emit(j, common.out);
            if (!trace_image.empty()) {
                Frame f = default_frame(pf, 600, 600);
                Overlay o;
                o.rays.push_back({theta, side});
                write_atomic(trace_image, to_ppm(render_with_overlays(rt, cache, f, o, topt, {})));
            }
        } else if (*aset) {
            PolynomialFile pf = load_polynomial(common.poly);
            RayTracer rt(pf.poly);
            emit(angle_set_report(rt, cache, common.component(pf), common.degree_d(pf), aset_levels, s0_factor, potential), common.out);
        } else if (*semi) {
            PolynomialFile pf = load_polynomial(common.poly);
            RayTracer rt(pf.poly);
            std::vector<Angle> ts;
            for (const auto& t : taus) ts.push_back(Angle::parse(t));
            if (ts.empty()) ts.push_back(Angle::rational(0, 1));
            emit(semiconj_report(rt, cache, common.component(pf), common.degree_d(pf), n_max, s0_factor, ts, orbit_depth, valence_depth),
                 common.out);
        } else if (*port) {
            emit(portrait_report(portrait_from_json(read_json(portrait_file))), common.out);
        } else if (*surg) {
            emit(surgery_report(model_input(model_file, mD, md, mj, choices)), common.out);
        } else if (*ver) {
            PolynomialFile pf = load_polynomial(common.poly);
            RayTracer rt(pf.poly);
            vopt.check_semiconj = !no_semiconj;
            json j = verify_report(model_input(model_file, mD, md, mj, choices), rt, common.component(pf), vopt);
            emit(j, common.out);
            if (!j["ok"].get<bool>()) return kUnverified;
        } else if (*rend) {
            PolynomialFile pf = load_polynomial(common.poly);
            RayTracer rt(pf.poly);
            Frame f = default_frame(pf, width, height);
            if (!center_text.empty()) f.view.center = pf.scale * parse_point(center_text);
            if (radius > 0) f.view.radius = std::abs(pf.scale) * radius;
            Overlay o;
            for (const auto& r : rays) o.rays.push_back(parse_ray(r));
            o.levels = levels;
            o.critical = !no_critical;
            RenderOptions ro;
            ro.max_iter = max_iter;
            ro.threads = threads;
            write_atomic(image_out, to_ppm(render_with_overlays(rt, cache, f, o, topt, ro)));
        } else if (*rep) {
            rc.poly = rc_poly;
            if (!rc_seed.empty()) rc.seed = parse_point(rc_seed);
            if (rc_k > 0) rc.k = rc_k;
            if (rc_d > 0) rc.d = rc_d;
            rc.out_dir = rc_out;
            rc.cache_dir = rc_cache;
            rc.image = !rc_no_image;
            AnalyzeResult r = run_analyze(rc);
            std::cout << r.text;
        }
    } catch (const Error& e) {
        json diag{{"schema", schema::error}, {"command", command}, {"code", e.code()}, {"message", e.what()}};
        std::cerr << e.what() << "\n";
        std::cout << dump(diag);
        return input_error(e.code()) ? kInput : kNumerical;
    } catch (const std::exception& e) {
        json diag{{"schema", schema::error}, {"command", command}, {"code", "Internal"}, {"message", e.what()}};
        std::cerr << e.what() << "\n";
        std::cout << dump(diag);
        return kNumerical;
    }
    return kOk;
}
