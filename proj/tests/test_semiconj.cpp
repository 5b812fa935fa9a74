#include <doctest.h>

#include "rayatlas/error.hpp"
#include "rayatlas/portrait.hpp"
#include "rayatlas/semiconj.hpp"

#include <cmath>
#include <memory>
#include <random>

using namespace rayatlas;

namespace {
const cplx kFig5Realized{0.3162050828743217, -1.9255222181353253};

struct Built {
    std::unique_ptr<RayTracer> rt;
    SemiconjTable t;
};

const Built& fig5() {
    static Built b = [] {
        Built x;
        x.rt = std::make_unique<RayTracer>(Polynomial({0.0, 0.0, kFig5Realized, 1.0}));
        x.t = build_pi_table(*x.rt, {0.0, 1}, 2, 10);
        return x;
    }();
    return b;
}

const Built& fig6() {
    static Built b = [] {
        Built x;
        x.rt = std::make_unique<RayTracer>(Polynomial({0.0, 0.0, 2.4471213915392602, -1.64846, 1.0}));
        x.t = build_pi_table(*x.rt, {0.0, 1}, 2, 10);
        return x;
    }();
    return b;
}

// I_0 = circle minus ]0.45, 0.7[ for x4, a d = 3 system with no polynomial behind it
std::vector<IntervalSystem> synthetic_ladder(int levels) {
    IntervalSystem base;
    base.k = 1;
    base.d = 3;
    base.s = 1.0;
    base.arcs = ArcSet({Arc{Angle::rational(7, 10), Angle::rational(9, 20)}});
    base.gaps = {Gap{Angle::rational(9, 20), Angle::rational(7, 10), 2.0}};
    return build_ladder(base, 4, levels);
}

std::vector<FiberPoint> sorted_fiber(const SemiconjTable& t, const Angle& tau) {
    auto f = fiber(t, tau);
    std::sort(f.begin(), f.end(), [](const FiberPoint& a, const FiberPoint& b) { return a.angle.value() < b.angle.value(); });
    return f;
}
} // namespace

TEST_CASE("C_n is ordered, stable and semiconjugated") {
    for (const Built* b : {&fig5(), &fig6()}) {
        const SemiconjTable& t = b->t;
        const int D = b->rt->poly().degree();
        const double res = t.resolution;
        for (int n = 1; n <= t.n_max(); ++n) {
            const auto& C = t.levels[n].C;
            REQUIRE(C.size() == static_cast<std::size_t>(std::pow(2, n)));
            for (std::size_t i = 0; i < C.size(); ++i) {
                // exact slot in Z_n, and the same slot at every deeper level
                auto v = evaluate_pi(t, C[i]);
                CHECK(v.value.value() == doctest::Approx(static_cast<double>(i) / C.size()).epsilon(1e-12));
                for (int m = n; m <= t.n_max(); ++m)
                    CHECK(std::fabs(centered(t.levels[m].index.pi(C[i].value()) - static_cast<double>(i) / C.size())) < 1e-7);
                if (i > 0) CHECK(arc_length(t.theta0.value(), C[i - 1].value()) < arc_length(t.theta0.value(), C[i].value()));
                auto img = evaluate_pi(t, mul_mod1(C[i], D));
                CHECK(std::fabs(centered(img.value.value() - 2.0 * v.value.value())) <= 2.0 * res);
            }
        }
    }
}

TEST_CASE("Pi is monotone from theta0") {
    const SemiconjTable& t = fig5().t;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<double> xs;
    for (int i = 0; i < 100; ++i) xs.push_back(U(rng));
    std::sort(xs.begin(), xs.end());
    double prev = -1.0;
    for (double x : xs) {
        double p = t.deepest().index.pi(x);
        CHECK(p >= prev);
        prev = p;
    }
}

TEST_CASE("fibers over 0 on the two examples") {
    auto f5 = sorted_fiber(fig5().t, Angle::rational(0, 1));
    REQUIRE(f5.size() == 2);
    CHECK(f5[0].angle == Angle::rational(0, 1));
    CHECK(f5[1].angle == Angle::rational(1, 2));

    auto f6 = sorted_fiber(fig6().t, Angle::rational(0, 1));
    REQUIRE(f6.size() == 3);
    CHECK(f6[0].angle == Angle::rational(0, 1));
    CHECK(f6[1].angle == Angle::rational(1, 3));
    CHECK(f6[2].angle == Angle::rational(2, 3));
}

TEST_CASE("valence audit stays within the k = 1 bound") {
    auto a5 = valence_audit(fig5().t, 10);
    CHECK(a5.strict);
    CHECK(a5.bound == 2);
    CHECK(a5.max_cardinality == 2);
    CHECK(a5.ok);
    auto a6 = valence_audit(fig6().t, 10);
    CHECK(a6.bound == 3);
    CHECK(a6.max_cardinality == 3);
    CHECK(a6.ok);
}

TEST_CASE("major gap multiplicities add up to D^k - d") {
    auto r5 = classify_gaps(fig5().t);
    CHECK(r5.multiplicity_total == 1);
    CHECK(r5.unresolved == 0);
    auto r6 = classify_gaps(fig6().t);
    CHECK(r6.multiplicity_total == 2);
    CHECK(r6.unresolved == 0);
    int majors = 0;
    for (const auto& g : r6.gaps)
        if (g.kind == GapKind::major) {
            ++majors;
            CHECK(g.multiplicity == 1);
            CHECK(g.orbit_class == OrbitClass::periodic);
        }
    CHECK(majors == 2);
    // ]2/3, 1/3[ only meets I in its isolated point 0
    bool found = false;
    for (const auto& c : r6.cantor_gaps)
        if (c.a == Angle::rational(2, 3) && c.b == Angle::rational(1, 3)) {
            found = true;
            CHECK(c.multiplicity == 2);
            REQUIRE(c.isolated.size() == 1);
            CHECK(c.isolated[0] == Angle::rational(0, 1));
        }
    CHECK(found);
}

TEST_CASE("box dimension stays under log d / (k log D)") {
    auto e5 = box_dimension_estimate(fig5().t);
    CHECK(e5.ceiling == doctest::Approx(std::log(2.0) / std::log(3.0)));
    CHECK(e5.estimate <= e5.ceiling + 0.05);
    auto e6 = box_dimension_estimate(fig6().t);
    CHECK(e6.ceiling == doctest::Approx(0.5));
    CHECK(e6.estimate <= e6.ceiling + 0.05);
}

TEST_CASE("uniqueness up to rotation") {
    const Built& b = fig5();
    CHECK(uniqueness_check(b.t, b.t) == 0);
    auto half = Angle::rational(1, 2);
    std::vector<IntervalSystem> ladder;
    for (const auto& lv : b.t.levels) ladder.push_back(lv.sys);
    auto other = build_pi_table(ladder, 3, &half);
    CHECK(uniqueness_check(b.t, other) == 0);

    auto syn = synthetic_ladder(6);
    for (std::size_t n = 1; n < syn.size(); ++n)
        CHECK(syn[n].measure() == doctest::Approx(syn[n - 1].measure() * 0.75).epsilon(1e-12));
    auto zero = Angle::rational(0, 1), third = Angle::rational(1, 3);
    auto ta = build_pi_table(syn, 4, &zero);
    auto tb = build_pi_table(syn, 4, &third);
    CHECK(ta.d == 3);
    // brute force over both rotations on C_1
    int expect = -1;
    for (int j = 0; j < 2 && expect < 0; ++j) {
        bool all = true;
        for (const auto& c : tb.levels[1].C)
            all = all && std::fabs(centered(evaluate_pi(ta, c).value.value() - evaluate_pi(tb, c).value.value() - j / 2.0)) < 2.0 * ta.resolution;
        if (all) expect = j;
    }
    REQUIRE(expect >= 0);
    CHECK(uniqueness_check(ta, tb) == expect);
}

TEST_CASE("theta0 must be a fixed angle in I") {
    const Built& b = fig5();
    std::vector<IntervalSystem> ladder;
    for (const auto& lv : b.t.levels) ladder.push_back(lv.sys);
    auto outside = Angle::rational(1, 3);
    try {
        build_pi_table(ladder, 3, &outside);
        FAIL("expected FixedAngleNotInI");
    } catch (const Error& e) {
        CHECK(e.code() == "FixedAngleNotInI");
    }
    try {
        evaluate_pi(b.t, Angle::rational(1, 3));
        FAIL("expected OutsideI");
    } catch (const Error& e) {
        CHECK(e.code() == "OutsideI");
    }
}

TEST_CASE("connected case is the identity") {
    RayTracer rt(Polynomial({0.0, 0.0, 1.0}));
    auto t = build_pi_table(rt, {0.0, 1}, 2, 6);
    CHECK(t.levels[3].C.size() == 8);
    CHECK(evaluate_pi(t, Angle::rational(3, 8)).value == Angle::rational(3, 8));
    CHECK(fiber(t, Angle::rational(1, 2)).size() == 1);
    auto e = box_dimension_estimate(t);
    CHECK(e.estimate == 1.0);
    CHECK_FALSE(e.applicable);
    CHECK(classify_gaps(t).full_circle);
}

TEST_CASE("sector kinds read off Pi") {
    auto f5 = fiber(fig5().t, Angle::rational(0, 1));
    std::vector<Angle> l5;
    for (const auto& f : f5) l5.push_back(f.angle);
    auto p5 = build_portrait(3, 1, {l5});
    auto s5 = sectors_of(p5, fig5().t);
    CHECK(s5.sectors[s5.find(0, Angle::rational(0, 1), Angle::rational(1, 2))].kind == SectorKind::ghost);
    CHECK(s5.sectors[s5.find(0, Angle::rational(1, 2), Angle::rational(0, 1))].kind == SectorKind::essential);

    auto p6 = build_portrait(4, 1, {{Angle::rational(0, 1), Angle::rational(1, 3), Angle::rational(2, 3)}});
    auto s6 = sectors_of(p6, fig6().t);
    CHECK(s6.count(SectorKind::essential) == 1);
    CHECK(s6.sectors[s6.find(0, Angle::rational(1, 3), Angle::rational(2, 3))].kind == SectorKind::essential);
    CHECK(audit_counts(p6, s6, 2, estimate_n1(s6), 0).ok);
}
