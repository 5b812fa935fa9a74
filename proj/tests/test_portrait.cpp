#include <doctest.h>

#include "rayatlas/error.hpp"
#include "rayatlas/portrait.hpp"

#include <set>

using namespace rayatlas;

namespace {
Angle r(long long n, long long d) { return Angle::rational(n, d); }

OrbitPortrait cubic_period3() {
    return build_portrait(3, 3, {{r(2, 26), r(10, 26), r(19, 26)}, {r(4, 26), r(5, 26), r(6, 26)}, {r(12, 26), r(15, 26), r(18, 26)}},
                          {{Side::smooth, Side::smooth, Side::plus},
                           {Side::smooth, Side::plus, Side::smooth},
                           {Side::smooth, Side::plus, Side::smooth}});
}

const Sector& get(const SectorSet& s, int base, Angle a, Angle b) {
    int i = s.find(base, a, b);
    REQUIRE(i >= 0);
    return s.sectors[i];
}
} // namespace

TEST_CASE("period 3 cubic portrait") {
    auto p = cubic_period3();
    CHECK(p.ell == 1);
    CHECK(p.rot_p == 0);
    CHECK(p.rot_q == 1);
    CHECK(p.ray_period == 3);
    REQUIRE(p.cycles.size() == 3);
    for (const auto& c : p.cycles) CHECK(c.size() == 3);
    CHECK(unlinked(p));

    // one essential sector is enough; sigma carries the kind around its cycle
    auto s = sectors_of(p, {{0, r(19, 26), r(2, 26)}});
    CHECK(s.sectors.size() == 9);
    CHECK(s.count(SectorKind::essential) == 3);
    CHECK(s.count(SectorKind::ghost) == 6);
    CHECK(get(s, 0, r(19, 26), r(2, 26)).kind == SectorKind::essential);
    CHECK(get(s, 1, r(5, 26), r(6, 26)).kind == SectorKind::essential);
    CHECK(get(s, 2, r(15, 26), r(18, 26)).kind == SectorKind::essential);

    std::set<std::pair<int, std::string>> minimal;
    for (const auto& x : s.sectors)
        if (x.minimal) minimal.insert({x.base, x.a.str() + "," + x.b.str()});
    CHECK(minimal == std::set<std::pair<int, std::string>>{{1, "2/13,5/26"}, {2, "6/13,15/26"}});
    CHECK(s.ghost_cycles == 2);
    CHECK(s.essential_cycles == 1);

    // ghost cycle 1/26 -> 3/26 -> 9/26 with weights 0, 0, 1
    const auto& w = get(s, 0, r(10, 26), r(19, 26));
    CHECK(w.length == Rational(9, 26));
    CHECK(w.weight == 1);
    CHECK(w.b_attachable);
    const auto& shortest = s.sectors[w.image];
    CHECK(shortest.base == 1);
    CHECK(shortest.length == Rational(1, 26));
    CHECK(shortest.weight == 0);
    CHECK(s.sectors[shortest.image].length == Rational(3, 26));
    CHECK(s.sectors[shortest.image].weight == 0);

    CHECK(fiber_sizes(s, 0) == std::vector<int>{3});
    CHECK(estimate_n1(s) == 1);
    auto audit = audit_counts(p, s, 2, 1, 0);
    for (const auto& l : audit.lines) CHECK_MESSAGE(l.pass, l.name << ": " << l.lhs << " vs " << l.rhs);
    CHECK(audit.ok);
}

TEST_CASE("sector lengths obey the weight identity exactly") {
    auto p = cubic_period3();
    auto s = sectors_of(p);
    CHECK(s.count(SectorKind::unknown) == 9);
    for (const auto& x : s.sectors) {
        CHECK(s.sectors[x.image].length == x.length * 3 - x.weight);
        CHECK(s.sectors[x.image].base == (x.base + 1) % 3);
    }
}

TEST_CASE("fixed point portraits of the two examples") {
    auto p5 = build_portrait(3, 1, {{r(0, 1), r(1, 2)}});
    CHECK(p5.rot_p == 0);
    CHECK(p5.cycles.size() == 2);
    auto s5 = sectors_of(p5, {{0, r(1, 2), r(0, 1)}});
    REQUIRE(s5.sectors.size() == 2);
    for (const auto& x : s5.sectors) {
        CHECK(x.length == Rational(1, 2));
        CHECK(x.weight == 1);
    }
    CHECK(fiber_sizes(s5) == std::vector<int>{2});
    CHECK(estimate_n1(s5) == 1);
    CHECK(audit_counts(p5, s5, 2, 1, 0).ok);

    auto p6 = build_portrait(4, 1, {{r(0, 1), r(1, 3), r(2, 3)}});
    auto s6 = sectors_of(p6, {{0, r(1, 3), r(2, 3)}});
    CHECK(s6.ghost_cycles == 2);
    CHECK(fiber_sizes(s6) == std::vector<int>{3});
    CHECK(estimate_n1(s6) == 2);
    CHECK(audit_counts(p6, s6, 2, 2, 0).ok);

    // D = 6 model fiber of five fixed angles
    std::vector<Angle> five;
    for (int j = 0; j < 5; ++j) five.push_back(r(j, 5));
    auto p7 = build_portrait(6, 1, {five});
    auto s7 = sectors_of(p7, {{0, r(4, 5), r(0, 1)}});
    CHECK(fiber_sizes(s7) == std::vector<int>{5});
    CHECK(s7.ghost_cycles == 4);
    CHECK(audit_counts(p7, s7, 2, 4, 0).ok);
}

TEST_CASE("audit reports violated inequalities") {
    auto p6 = build_portrait(4, 1, {{r(0, 1), r(1, 3), r(2, 3)}});
    auto s6 = sectors_of(p6, {{0, r(1, 3), r(2, 3)}});
    auto a = audit_counts(p6, s6, 2, 1, 0);
    CHECK_FALSE(a.ok);
    bool flagged = false;
    for (const auto& l : a.lines)
        if (l.name.rfind("ghost cycles", 0) == 0) {
            CHECK_FALSE(l.pass);
            CHECK(l.lhs == "2");
            flagged = true;
        }
    CHECK(flagged);
    CHECK_FALSE(audit_counts(p6, s6, 2, 2, 1).ok);
    CHECK_FALSE(audit_counts(p6, s6, 2, 2, 0, {{3, 1}}).ok);
}

TEST_CASE("inconsistent portraits are rejected") {
    auto expect = [](auto fn) {
        try {
            fn();
            FAIL("expected InconsistentPortrait");
        } catch (const Error& e) {
            CHECK(e.code() == "InconsistentPortrait");
        }
    };
    expect([] { build_portrait(3, 1, {{r(0, 1), r(1, 3)}}); });
    expect([] { build_portrait(3, 3, {{r(2, 26), r(10, 26), r(19, 26)}, {r(4, 26), r(5, 26), r(7, 26)}, {r(12, 26), r(15, 26), r(18, 26)}}); });
    expect([] { build_portrait(3, 1, {{Angle::approx(0.5)}}); });
    expect([] { build_portrait(2, 2, {{r(1, 3)}}); });
}

TEST_CASE("linked rays are detected") {
    OrbitPortrait p;
    p.lambda = {{r(0, 1), r(1, 2)}, {r(1, 4), r(3, 4)}};
    CHECK_FALSE(unlinked(p));
    p.lambda = {{r(0, 1), r(1, 2)}, {r(1, 8), r(3, 8)}};
    CHECK(unlinked(p));
}
