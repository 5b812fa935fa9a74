// Python bindings: requests and results cross the boundary as JSON text.
#include "rayatlas/error.hpp"
#include "rayatlas/pipeline.hpp"

#include <pybind11/pybind11.h>

namespace py = pybind11;
using namespace rayatlas;

namespace {

// poly (path or inline object) plus RunConfig keys; command-specific keys are taken out first
struct Context {
    PolynomialFile pf;
    RunConfig c;
    json extra;

    Context(json req, std::initializer_list<const char*> own) {
        if (!req.is_object()) throw Error("InvalidInput", "request must be a JSON object");
        extra = json::object();
        for (const char* k : own)
            if (req.contains(k)) {
                extra[k] = req[k];
                req.erase(k);
            }
        if (!req.contains("poly")) throw Error("InvalidInput", "missing \"poly\"");
        json poly = req["poly"];
        req.erase("poly");
        apply_json(c, req);
        c.validate();
        if (poly.is_string()) pf = load_polynomial(poly.get<std::string>());
        else pf = polynomial_from_json(poly);
        if (c.cache_dir.empty()) c.cache_dir = cache_dir_from_env();
    }
    ComponentSeed seed() const { return {pf.scale * c.seed.value_or(pf.seed.value_or(cplx{})), c.k.value_or(pf.k.value_or(1))}; }
    int d() const { return c.d.value_or(pf.d.value_or(2)); }
    Cache cache() const { return Cache(c.cache_dir); }
};

std::pair<Angle, Side> ray_spec(std::string s) {
    Side side = Side::smooth;
    if (!s.empty() && (s.back() == '+' || s.back() == '-')) {
        side = s.back() == '+' ? Side::plus : Side::minus;
        s.pop_back();
    }
    return {Angle::parse(s), side};
}

json parse_request(const std::string& request) {
    try {
        return json::parse(request);
    } catch (const json::exception& e) {
        throw Error("InvalidInput", std::string("request is not JSON: ") + e.what());
    }
}

template <class F>
std::string guarded(const std::string& request, F&& f) {
    return dump(f(parse_request(request)));
}

std::string trace(const std::string& r) {
    return guarded(r, [](const json& req) {
        Context x(req, {"angle", "side"});
        RayTracer rt(x.pf.poly);
        Angle a = angle_from_json(x.extra.value("angle", json("0/1")));
        Side s = parse_side(x.extra.value("side", std::string("smooth")));
        return trace_report(rt, x.cache(), a, s, x.c.trace);
    });
}

std::string angle_set(const std::string& r) {
    return guarded(r, [](const json& req) {
        Context x(req, {"levels", "potential"});
        RayTracer rt(x.pf.poly);
        std::optional<double> pot;
        if (x.extra.contains("potential")) pot = x.extra["potential"].get<double>();
        return angle_set_report(rt, x.cache(), x.seed(), x.d(), x.extra.value("levels", 6), x.c.s0_factor, pot);
    });
}

std::string semiconj(const std::string& r) {
    return guarded(r, [](const json& req) {
        Context x(req, {"tau"});
        RayTracer rt(x.pf.poly);
        std::vector<Angle> taus;
        if (x.extra.contains("tau"))
            for (const auto& t : x.extra["tau"]) taus.push_back(angle_from_json(t));
        if (taus.empty()) taus.push_back(Angle::rational(0, 1));
        return semiconj_report(rt, x.cache(), x.seed(), x.d(), x.c.n_max, x.c.s0_factor, taus, x.c.orbit_depth, x.c.valence_depth);
    });
}

std::string portrait(const std::string& r) {
    return guarded(r, [](const json& req) { return portrait_report(portrait_from_json(req)); });
}

std::string surgery_model(const std::string& r) {
    return guarded(r, [](const json& req) { return surgery_report(model_from_json(req)); });
}

std::string verify(const std::string& r) {
    return guarded(r, [](const json& req) {
        Context x(req, {"model", "angle-tol", "no-semiconj"});
        if (!x.extra.contains("model")) throw Error("InvalidInput", "missing \"model\"");
        RayTracer rt(x.pf.poly);
        VerifyOptions o;
        o.coland_tol = x.c.coland_tol;
        o.s_min = x.c.trace.s_min;
        o.n_max = std::min(x.c.n_max, 8);
        if (req.contains("n-max")) o.n_max = x.c.n_max;
        o.angle_tol = x.extra.value("angle-tol", o.angle_tol);
        o.check_semiconj = !x.extra.value("no-semiconj", false);
        return verify_report(model_from_json(x.extra["model"]), rt, x.seed(), o);
    });
}

py::bytes render(const std::string& r) {
    Context x(parse_request(r), {"center", "radius", "ray", "level", "critical"});
    RayTracer rt(x.pf.poly);
    Frame f = default_frame(x.pf, x.c.width, x.c.height);
    if (x.extra.contains("center")) f.view.center = x.pf.scale * cplx_from_json(x.extra["center"]);
    if (x.extra.contains("radius")) f.view.radius = std::abs(x.pf.scale) * x.extra["radius"].get<double>();
    Overlay o;
    for (const auto& s : x.extra.value("ray", json::array())) o.rays.push_back(ray_spec(s.get<std::string>()));
    for (const auto& s : x.extra.value("level", json::array())) o.levels.push_back(s.get<double>());
    o.critical = x.extra.value("critical", true);
    RenderOptions ro;
    ro.max_iter = x.c.max_iter;
    ro.threads = x.c.threads;
    std::string ppm;
    {
        py::gil_scoped_release nogil;
        ppm = to_ppm(render_with_overlays(rt, x.cache(), f, o, x.c.trace, ro));
    }
    return py::bytes(ppm);
}

std::string analyze(const std::string& r) {
    return guarded(r, [](const json& req) {
        RunConfig c;
        apply_json(c, req);
        if (c.cache_dir.empty()) c.cache_dir = cache_dir_from_env();
        return run_analyze(c).report;
    });
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "rayatlas native core (JSON in, JSON out)";
    py::register_exception<Error>(m, "RayAtlasError", PyExc_RuntimeError);
    m.def("trace", &trace);
    m.def("angle_set", &angle_set);
    m.def("semiconj", &semiconj);
    m.def("portrait", &portrait);
    m.def("surgery_model", &surgery_model);
    m.def("verify", &verify);
    m.def("render", &render);
    m.def("analyze", &analyze);
    m.attr("version") = "0.1.0";
}
