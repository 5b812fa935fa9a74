#include <doctest.h>

#include "rayatlas/equipot.hpp"
#include "rayatlas/error.hpp"

#include <cmath>
#include <random>

using namespace rayatlas;

namespace {
const cplx kFig5Realized{0.3162050828743217, -1.9255222181353253};
const double kFig6B = 2.4471213915392602;
const double kFig6A = -1.64846;

Polynomial fig5() { return Polynomial({0.0, 0.0, kFig5Realized, 1.0}); }
Polynomial fig6() { return Polynomial({0.0, 0.0, kFig6B, kFig6A, 1.0}); }

double polyline_dist(const std::vector<cplx>& pts, cplx q) {
    double best = 1e300;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        cplx a = pts[i], b = pts[(i + 1) % pts.size()], seg = b - a;
        double u = std::clamp(((q - a) * std::conj(seg)).real() / std::norm(seg), 0.0, 1.0);
        best = std::min(best, std::abs(a + u * seg - q));
    }
    return best;
}

bool same_arcs(const ArcSet& x, const ArcSet& y, double tol) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (circle_dist(x.arcs()[i].a.value(), y.arcs()[i].a.value()) > tol) return false;
        if (circle_dist(x.arcs()[i].b.value(), y.arcs()[i].b.value()) > tol) return false;
    }
    return true;
}
} // namespace

TEST_CASE("level curve of z^2 is the circle of radius e^s") {
    RayTracer rt(Polynomial({0.0, 0.0, 1.0}));
    auto c = equipotential_trace(rt, {0.0, 1}, 1.0);
    CHECK(c.roots.empty());
    CHECK(c.angular_length == doctest::Approx(1.0).epsilon(1e-5));
    for (cplx z : c.points) CHECK(std::abs(z) == doctest::Approx(std::exp(1.0)).epsilon(1e-10));
    auto sys = interval_system_from_curve(rt, c, 1, 2);
    CHECK(sys.degenerate);
    CHECK(sys.measure() == 1.0);
    auto s = estimate_s_star(rt, {0.0, 1}, 2);
    CHECK(s.degenerate);
}

TEST_CASE("seed outside K is rejected") {
    RayTracer rt(Polynomial({0.0, 0.0, 1.0}));
    try {
        equipotential_trace(rt, {cplx(3.0, 0.0), 1}, 1.0);
        FAIL("expected SeedEscapes");
    } catch (const Error& e) {
        CHECK(e.code() == "SeedEscapes");
    }
}

TEST_CASE("cubic example: s*, base system and ladder") {
    RayTracer rt(fig5());
    const ComponentSeed seed{0.0, 1};
    const double g1 = rt.critical()[0].escaping ? rt.critical()[0].potential : rt.critical()[1].potential;
    auto ss = estimate_s_star(rt, seed, 2);
    CHECK_FALSE(ss.degenerate);
    CHECK(ss.value == doctest::Approx(g1).epsilon(0.01));

    const double s0 = 0.9 * ss.value;
    auto c = equipotential_trace(rt, seed, s0);
    REQUIRE(c.roots.size() == 1);
    CHECK(c.roots[0].left.value() == doctest::Approx(1.0 / 6).epsilon(1e-9));
    CHECK(c.roots[0].right.value() == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(c.roots[0].crash_s == doctest::Approx(g1).epsilon(1e-9));
    auto sys = interval_system_from_curve(rt, c, 1, 2);
    CHECK(sys.measure() == doctest::Approx(2.0 / 3).epsilon(1e-9));
    CHECK(c.angular_length == doctest::Approx(sys.measure()).epsilon(1e-5));

    auto ladder = build_ladder(rt, sys, 4);
    REQUIRE(ladder.size() == 5);
    for (std::size_t n = 1; n < ladder.size(); ++n) {
        // |I_{n+1}| = (d / D^k) |I_n|
        CHECK(ladder[n].measure() == doctest::Approx(ladder[n - 1].measure() * 2.0 / 3.0).epsilon(1e-9));
        CHECK(ladder[n].s == doctest::Approx(ladder[n - 1].s / 3.0));
        for (const auto& g : ladder[n].gaps) CHECK(g.crash_s > ladder[n].s);
    }

    // level 1 of the ladder agrees with a direct trace at that potential
    auto traced = extract_interval_system(rt, seed, ladder[1].s, 2);
    CHECK(same_arcs(traced.arcs, ladder[1].arcs, 1e-9));
    auto rep = pushforward_check(traced, sys, 3);
    CHECK(rep.ok);
    CHECK(rep.max_deviation < 1e-9);
}

TEST_CASE("interval system agrees with independently traced rays") {
    RayTracer rt(fig5());
    const double s = 0.012;
    auto c = equipotential_trace(rt, {0.0, 1}, s);
    auto sys = interval_system_from_curve(rt, c, 1, 2);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    TraceOptions o;
    o.s_min = s;
    int checked = 0;
    for (int it = 0; it < 40; ++it) {
        double th = U(rng);
        bool near_end = false;
        for (const auto& arc : sys.arcs.arcs())
            near_end = near_end || circle_dist(th, arc.a.value()) < 1e-3 || circle_dist(th, arc.b.value()) < 1e-3;
        if (near_end) continue;
        RayTrace tr;
        try {
            tr = rt.trace(Angle::approx(th), Side::smooth, o);
        } catch (const Error&) {
            continue;
        }
        bool on_curve = polyline_dist(c.points, tr.samples.back().z) < 1e-4;
        CHECK_MESSAGE(on_curve == (sys.arcs.locate(th) >= 0), "theta=" << th);
        ++checked;
    }
    CHECK(checked > 25);
}

TEST_CASE("quartic example: two gaps of the same critical potential") {
    RayTracer rt(fig6());
    const ComponentSeed seed{0.0, 1};
    auto ss = estimate_s_star(rt, seed, 2);
    auto sys = extract_interval_system(rt, seed, 0.9 * ss.value, 2);
    REQUIRE(sys.gaps.size() == 2);
    CHECK(sys.gaps[0].a.value() == doctest::Approx(1.0 / 12).epsilon(1e-9));
    CHECK(sys.gaps[0].b.value() == doctest::Approx(1.0 / 3).epsilon(1e-9));
    CHECK(sys.gaps[1].a.value() == doctest::Approx(2.0 / 3).epsilon(1e-9));
    CHECK(sys.gaps[1].b.value() == doctest::Approx(11.0 / 12).epsilon(1e-9));
    CHECK(sys.measure() == doctest::Approx(0.5).epsilon(1e-9));
    auto ladder = build_ladder(rt, sys, 3);
    for (std::size_t n = 1; n < ladder.size(); ++n)
        CHECK(ladder[n].measure() == doctest::Approx(ladder[n - 1].measure() / 2).epsilon(1e-9));
}

TEST_CASE("pushforward mismatch is reported") {
    RayTracer rt(fig5());
    auto sys = extract_interval_system(rt, {0.0, 1}, 0.015, 2);
    auto lower = build_ladder(rt, sys, 1)[1];
    CHECK(pushforward_check(lower, sys, 3).ok);
    IntervalSystem bad = lower;
    std::vector<Arc> arcs = bad.arcs.arcs();
    for (auto& a : arcs) a.b = Angle::approx(wrap01(a.b.value() - 0.01));
    bad.arcs = ArcSet(arcs);
    try {
        pushforward_check(bad, sys, 3);
        FAIL("expected MismatchBeyondTolerance");
    } catch (const Error& e) {
        CHECK(e.code() == "MismatchBeyondTolerance");
    }
}

TEST_CASE("g_s is a degree d circle map with a semi-repelling fixed point") {
    for (int which = 0; which < 2; ++which) {
        RayTracer rt(which == 0 ? fig5() : fig6());
        const int D = rt.poly().degree();
        auto sys = extract_interval_system(rt, {0.0, 1}, which == 0 ? 0.015 : 0.07, 2);
        auto lad = build_ladder(rt, sys, 1);
        auto fixed = fixed_angles_in(lad[1], D);
        REQUIRE_FALSE(fixed.empty());
        auto g = build_gs(lad[1], sys, fixed[0], D);
        CHECK(g.degree() == 2);
        CHECK(std::fabs(centered(g(0.0))) < 1e-9);
        CHECK(semi_repelling_fixed_points(g).size() >= 1);
        // monotone lift with slopes 0 or D
        for (const auto& b : g.breakpoints()) CHECK((b.slope == 0.0 || std::fabs(b.slope - D) < 1e-12));
    }
}

TEST_CASE("Pi_s is a normalized monotone coordinate") {
    RayTracer rt(fig6());
    auto sys = extract_interval_system(rt, {0.0, 1}, 0.07, 2);
    const double t0 = 0.0;
    double prev = 0.0;
    for (int i = 1; i <= 200; ++i) {
        double x = arc_measure_from(sys, t0, i / 200.0 - 1e-12);
        CHECK(x >= prev - 1e-15);
        prev = x;
    }
    CHECK(prev == doctest::Approx(1.0));
    // flat across a gap
    CHECK(arc_measure_from(sys, t0, 0.1) == doctest::Approx(arc_measure_from(sys, t0, 0.3)));
}
