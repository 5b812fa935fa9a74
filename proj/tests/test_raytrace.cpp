#include <doctest.h>

#include "rayatlas/error.hpp"
#include "rayatlas/raytrace.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace rayatlas;

namespace {
const cplx kFig5Printed{0.31629, -1.92522};
const cplx kFig5Realized{0.3162050828743217, -1.9255222181353253};

// distance from omega of the smooth field line at angle x, stopped just above G(omega)
double scan_distance(const RayTracer& rt, double x, cplx omega, double s_stop) {
    TraceOptions o;
    o.s_min = s_stop;
    try {
        RayTrace tr = rt.trace(Angle::approx(x), Side::smooth, o);
        return std::abs(tr.samples.back().z - omega);
    } catch (const Error&) {
        return 0.0;
    }
}

// Oracle: dense scan of angles, local minima of the distance refined by golden section.
std::vector<double> oracle_crash_angles(const RayTracer& rt, int ci, int n) {
    const auto& c = rt.critical()[ci];
    const double s_stop = c.potential * (1.0 + 1e-6);
    std::vector<double> d(n);
    for (int i = 0; i < n; ++i) d[i] = scan_distance(rt, (i + 0.5) / n, c.location, s_stop);
    std::vector<double> out;
    for (int i = 0; i < n; ++i) {
        double l = d[(i + n - 1) % n], r = d[(i + 1) % n];
        if (!(d[i] <= l && d[i] <= r)) continue;
        double a = (i - 0.5) / n, b = (i + 1.5) / n;
        const double g = (std::sqrt(5.0) - 1) / 2;
        for (int it = 0; it < 60; ++it) {
            double x1 = b - g * (b - a), x2 = a + g * (b - a);
            if (scan_distance(rt, x1, c.location, s_stop) < scan_distance(rt, x2, c.location, s_stop)) b = x2;
            else a = x1;
        }
        double x = 0.5 * (a + b);
        // a real crash brings the line within O(sqrt(1e-6)) of omega
        if (scan_distance(rt, x, c.location, s_stop) < 0.05 * rt.critical_scale(ci)) out.push_back(wrap01(x));
    }
    return out;
}
} // namespace

TEST_CASE("straight rays of z^2") {
    Polynomial p({0.0, 0.0, 1.0});
    TraceOptions o;
    o.s_min = 1e-6;
    RayTrace tr = trace_ray(p, Angle::approx(0.3), Side::smooth, o);
    CHECK(tr.crashes.empty());
    CHECK(tr.samples.back().s == doctest::Approx(1e-6));
    for (const auto& smp : tr.samples)
        CHECK(std::abs(smp.z - std::exp(cplx(smp.s, 2 * std::numbers::pi * 0.3))) < 1e-12 * std::abs(smp.z));
    CHECK(crash_potential(p, Angle::rational(1, 3)) == 0.0);
    RayTrace r0 = trace_ray(p, Angle::rational(0, 1), Side::smooth);
    REQUIRE(r0.landing);
    CHECK(std::abs(*r0.landing - 1.0) < 1e-6);
}

TEST_CASE("samples lie on the level sets") {
    RayTracer rt(Polynomial({0.0, 0.0, kFig5Printed, 1.0}));
    RayTrace tr = rt.trace(Angle::approx(0.2718), Side::smooth);
    for (std::size_t i = 0; i < tr.samples.size(); ++i) {
        GreenValue g = green(rt.poly(), tr.samples[i].z);
        // z carries about 1e-16 relative error, G moves by |2 dG/dz| times that
        double tol = 1e-10 * tr.samples[i].s + 1e-15 * std::abs(g.log_derivative) * (1.0 + std::abs(tr.samples[i].z));
        CHECK(std::fabs(g.value - tr.samples[i].s) < tol);
        if (i) CHECK(tr.samples[i].s < tr.samples[i - 1].s);
    }
    Angle th = external_angle(rt.poly(), tr.samples[tr.samples.size() / 2].z);
    CHECK(circle_dist(th.value(), 0.2718) < 1e-9);
}

TEST_CASE("crash angles of the refined cubic") {
    RayTracer rt(Polynomial({0.0, 0.0, kFig5Realized, 1.0}));
    REQUIRE(rt.critical()[0].escaping);
    auto A = rt.crash_angles(0);
    REQUIRE(A.size() == 2);
    CHECK(circle_dist(A[0].value(), 1.0 / 6.0) < 1e-9);
    CHECK(circle_dist(A[1].value(), 0.5) < 1e-9);
    // both map to a common angle
    CHECK(circle_dist(mul_mod1(A[0], 3).value(), mul_mod1(A[1], 3).value()) < 1e-12);
    CHECK(rt.crash_potential(Angle::rational(1, 2)) == doctest::Approx(rt.critical()[0].potential).epsilon(1e-6));
    CHECK_THROWS_AS(rt.trace(Angle::rational(1, 2), Side::smooth), Error);
}

TEST_CASE("crash angles agree with a dense scan oracle") {
    // one escaping simple critical point
    RayTracer rt(Polynomial({0.0, 0.0, kFig5Printed, 1.0}));
    auto A = rt.crash_angles(0);
    auto O = oracle_crash_angles(rt, 0, 400);
    REQUIRE(A.size() == 2);
    REQUIRE(O.size() == A.size());
    for (const auto& a : A) {
        double best = 1.0;
        for (double o : O) best = std::min(best, circle_dist(a.value(), o));
        CHECK(best < 1e-7);
    }
    // z^3 + c: one double critical point, three crash angles
    RayTracer cubic(Polynomial({cplx(1.0, 0.2), 0.0, 0.0, 1.0}));
    REQUIRE(cubic.critical()[0].escaping);
    CHECK(cubic.critical()[0].multiplicity == 2);
    auto A3 = cubic.crash_angles(0);
    auto O3 = oracle_crash_angles(cubic, 0, 300);
    CHECK(A3.size() == 3);
    CHECK(O3.size() == 3);
}

TEST_CASE("broken ray R+_{1/2} co-lands with R_0 on the refined cubic") {
    RayTracer rt(Polynomial({0.0, 0.0, kFig5Realized, 1.0}));
    RayTrace r0 = rt.trace(Angle::rational(0, 1), Side::smooth);
    RayTrace rp = rt.trace(Angle::rational(1, 2), Side::plus);
    REQUIRE(r0.landing);
    REQUIRE(rp.landing);
    CHECK(rp.converged);
    CHECK(std::abs(*r0.landing - *rp.landing) < 1e-4);
    CHECK(std::abs(eval(rt.poly(), *r0.landing) - *r0.landing) < 1e-5);
    REQUIRE(rp.crashes.size() >= 10);
    CHECK(rp.crashes[0].potential == doctest::Approx(rt.critical()[0].potential).epsilon(1e-9));
    for (std::size_t i = 1; i < rp.crashes.size(); ++i) {
        CHECK(rp.crashes[i].potential / rp.crashes[i - 1].potential == doctest::Approx(1.0 / 3.0).epsilon(1e-4));
        CHECK(rp.crashes[i].turn == Turn::right);
    }
    RayTrace rm = rt.trace(Angle::rational(1, 2), Side::minus);
    REQUIRE(!rm.crashes.empty());
    CHECK(rm.crashes[0].turn == Turn::left);
}

TEST_CASE("forward equivariance and the crash potential inequality") {
    for (cplx a : {kFig5Printed, kFig5Realized}) {
        RayTracer rt(Polynomial({0.0, 0.0, a, 1.0}));
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int k = 0; k < 8; ++k) {
            Angle th = Angle::approx(u(rng));
            TraceOptions o1, o3;
            o1.s_min = 1e-6;
            o3.s_min = 3e-6;
            RayTrace t1 = rt.trace(th, Side::smooth, o1);
            RayTrace t3 = rt.trace(mul_mod1(th, 3), Side::smooth, o3);
            int matched = 0;
            for (const auto& smp : t1.samples)
                for (const auto& img : t3.samples)
                    if (std::fabs(img.s - 3 * smp.s) < 1e-12 * img.s) {
                        ++matched;
                        CHECK(std::abs(eval(rt.poly(), smp.z) - img.z) < 1e-6);
                    }
            CHECK(matched > 50);
        }
        for (Angle th : {Angle::rational(1, 6), Angle::rational(1, 2), Angle::rational(1, 18), Angle::rational(5, 6)}) {
            double s = rt.crash_potential(th), s3 = rt.crash_potential(mul_mod1(th, 3));
            CHECK(s3 <= 3 * s + 1e-6);
        }
    }
}
