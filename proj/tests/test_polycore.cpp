#include <doctest.h>

#include "rayatlas/error.hpp"
#include "rayatlas/polycore.hpp"

#include <cmath>
#include <numbers>

using namespace rayatlas;

namespace {
const cplx kFig5A{0.31629, -1.92522};
Polynomial fig5() { return Polynomial({0.0, 0.0, kFig5A, 1.0}); }
Polynomial fig6() { return Polynomial({0.0, 0.0, std::cbrt(10.0), -1.64846, 1.0}); }
Polynomial zsq() { return Polynomial({0.0, 0.0, 1.0}); }
} // namespace

TEST_CASE("evaluation") {
    CHECK(std::abs(eval(fig5(), 0.0)) == 0.0);
    CHECK(std::abs(eval(zsq(), cplx(1, 1)) - cplx(0, 2)) < 1e-15);
    auto [v, d] = eval_deriv(fig6(), 0.0);
    CHECK(std::abs(v) == 0.0);
    CHECK(std::abs(d) == 0.0);
    CHECK_THROWS_AS(Polynomial({1.0, 0.0, 2.0}), Error);
}

TEST_CASE("normalization conjugates to a monic polynomial") {
    cplx lambda;
    Polynomial p = Polynomial::normalized({1.0, 0.0, 4.0}, &lambda);
    CHECK(std::abs(lambda - 4.0) < 1e-15);
    // c(z)=4z^2+1 ; w = 4z gives w^2 + 4
    CHECK(std::abs(p.coeffs()[0] - 4.0) < 1e-14);
}

TEST_CASE("critical points") {
    auto c2 = critical_points(zsq());
    REQUIRE(c2.size() == 1);
    CHECK(std::abs(c2[0].location) < 1e-14);
    CHECK(!c2[0].escaping);

    auto c5 = critical_points(fig5());
    REQUIRE(c5.size() == 2);
    int esc = 0;
    for (auto& c : c5) {
        if (c.escaping) {
            ++esc;
            CHECK(std::abs(c.location + 2.0 * kFig5A / 3.0) < 1e-12);
            CHECK(c.potential > 0);
        } else {
            CHECK(std::abs(c.location) < 1e-12);
            CHECK(c.potential == 0.0);
        }
    }
    CHECK(esc == 1);

    auto c6 = critical_points(fig6());
    REQUIRE(c6.size() == 3);
    CHECK(c6[0].escaping);
    CHECK(c6[1].escaping);
    CHECK(!c6[2].escaping);
    CHECK(std::abs(c6[0].location - std::conj(c6[1].location)) < 1e-10);
    CHECK(std::abs(c6[0].potential - c6[1].potential) < 1e-12);
}

TEST_CASE("multiple critical points are clustered") {
    // z^4 + z: P' = 4z^3 + 1 simple; z^4 has one critical point of multiplicity 3
    auto c = critical_points(Polynomial({0.0, 0.0, 0.0, 0.0, 1.0}));
    REQUIRE(c.size() == 1);
    CHECK(c[0].multiplicity == 3);
}

TEST_CASE("Green's function") {
    GreenValue g = green(zsq(), std::polar(10.0, 0.7));
    CHECK(g.value == doctest::Approx(std::log(10.0)).epsilon(1e-14));
    CHECK(green(zsq(), 0.5).orbit == Orbit::bounded);
    CHECK(green(zsq(), 0.5).value == 0.0);

    Polynomial p = fig5();
    for (cplx z : {cplx(1.3, 0.2), cplx(-0.9, 1.1), cplx(0.2, -1.5), -2.0 * kFig5A / 3.0}) {
        GreenValue a = green(p, z), b = green(p, eval(p, z));
        REQUIRE(a.orbit == Orbit::escaped);
        CHECK(std::fabs(3.0 * a.value - b.value) < 3e-13 * (1.0 + b.value));
        // gradient check by finite differences
        double h = 1e-6;
        double gx = (green(p, z + h).value - green(p, z - h).value) / (2 * h);
        double gy = (green(p, z + cplx(0, h)).value - green(p, z - cplx(0, h)).value) / (2 * h);
        cplx grad = std::conj(a.log_derivative);
        CHECK(std::abs(grad - cplx(gx, gy)) < 1e-6 * (1.0 + std::abs(grad)));
    }
    double R = 10.0 * (1.0 + std::abs(kFig5A));
    CHECK(std::fabs(green(p, R).value - std::log(R)) < 0.1);
}

TEST_CASE("Bottcher coordinate") {
    CHECK(std::abs(bottcher(zsq(), 3.0) - 3.0) < 1e-14);
    Polynomial p = fig5();
    cplx far = std::polar(1e6, 0.3);
    CHECK(std::abs(bottcher(p, far) / far - 1.0) < 1e-4);
    double smax = s_max(critical_points(p));
    for (cplx z : {cplx(2.5, 1.0), cplx(-3.0, 0.5), cplx(0.5, 3.0), cplx(-1.2, -2.8)}) {
        GreenValue g = green(p, z);
        REQUIRE(g.value > 2 * smax);
        cplx b = bottcher(p, z), bp = bottcher(p, eval(p, z));
        CHECK(std::abs(bp - b * b * b) < 1e-8 * std::abs(bp));
        CHECK(std::fabs(std::abs(b) - std::exp(g.value)) < 1e-6 * std::abs(b));
    }
    CHECK_THROWS_AS(bottcher(p, -2.0 * kFig5A / 3.0), Error);
}

TEST_CASE("external angle") {
    Angle t = external_angle(zsq(), std::polar(2.0, 2 * std::numbers::pi * 0.3));
    CHECK(t.value() == doctest::Approx(0.3).epsilon(1e-13));
    Polynomial p = fig5();
    for (cplx z : {cplx(1.3, 0.2), cplx(-0.9, 1.1), cplx(0.2, -1.5), cplx(0.4, 0.9)}) {
        Angle a = external_angle(p, z), b = external_angle(p, eval(p, z));
        CHECK(circle_dist(mul_mod1(a, 3).value(), b.value()) < 1e-9);
    }
    CHECK_THROWS_AS(external_angle(p, 0.01), Error);
}
