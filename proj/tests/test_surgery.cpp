#include <doctest.h>

#include "rayatlas/error.hpp"
#include "rayatlas/surgery.hpp"

#include <set>

using namespace rayatlas;

namespace {
Angle r(long long n, long long d) { return Angle::rational(n, d); }

std::set<std::string> strs(const std::vector<Angle>& v) {
    std::set<std::string> s;
    for (const auto& a : v) s.insert(a.str());
    return s;
}

const auto L = WakeSide::left;
const auto R = WakeSide::right;
} // namespace

TEST_CASE("six-fold model with four wakes") {
    auto m = build_model(6, 2, 0, {L, L, R, R});
    std::vector<Angle> primes;
    for (const auto& w : m.wakes) primes.push_back(w.theta_prime);
    CHECK(strs(primes) == std::set<std::string>{"1/30", "7/30", "23/30", "29/30"});
    CHECK(strs(m.predicted_fiber) == std::set<std::string>{"0/1", "1/5", "2/5", "3/5", "4/5"});
    CHECK(m.predicted_fiber.size() == 5);
    // all wakes sit in ]3/5, 2/5[, so the window starts at theta_3
    CHECK(m.j == 3);
    CHECK(m.notes.size() == 1);
    CHECK(strs(m.isolated_candidates) == std::set<std::string>{"4/5", "0/1", "1/5"});
    for (const auto& w : m.wakes) {
        CHECK(mul_mod1(w.theta, 6) == w.theta);
        CHECK(mul_mod1(w.theta_prime, 6) == w.theta);
    }
}

TEST_CASE("cubic and quartic models") {
    auto m3 = build_model(3, 2, 0, {L});
    REQUIRE(m3.wakes.size() == 1);
    CHECK(m3.wakes[0].J.a == r(1, 6));
    CHECK(m3.wakes[0].J.b == r(1, 2));
    CHECK(m3.j == 0);
    CHECK(m3.notes.empty());
    CHECK(strs(m3.predicted_fiber) == std::set<std::string>{"0/1", "1/2"});
    CHECK(m3.isolated_candidates.empty());

    auto m4 = build_model(4, 2, 0, {L, R});
    CHECK(m4.wakes[0].J.a == r(1, 12));
    CHECK(m4.wakes[0].J.b == r(1, 3));
    CHECK(m4.wakes[1].J.a == r(2, 3));
    CHECK(m4.wakes[1].J.b == r(11, 12));
    CHECK(strs(m4.predicted_fiber) == std::set<std::string>{"0/1", "1/3", "2/3"});
    REQUIRE(m4.isolated_candidates.size() == 1);
    CHECK(m4.isolated_candidates[0] == r(0, 1));
}

TEST_CASE("invalid collections are rejected") {
    auto expect = [](int D, int d, int j, std::vector<WakeSide> c) {
        try {
            build_model(D, d, j, c);
            FAIL("expected InvalidChoices");
        } catch (const Error& e) {
            CHECK(e.code() == "InvalidChoices");
        }
    };
    expect(4, 2, 0, {R, L});     // J_1 = ]1/3,7/12[ and J_2 = ]5/12,2/3[ overlap
    expect(4, 2, 0, {L});        // wrong count
    expect(3, 3, 0, {});         // d must be < D
    expect(6, 2, 0, {R, L, R, L});
}

TEST_CASE("number of admissible collections") {
    for (int D = 3; D <= 7; ++D)
        for (int d = 2; d < D; ++d) {
            auto all = enumerate_collections(D, d, 0);
            CHECK_MESSAGE(static_cast<int>(all.size()) == D - d + 1, "D=" << D << " d=" << d);
        }
}

TEST_CASE("wake exhaustion sequences") {
    auto a3 = wake_exhaustion(3, r(0, 1), R, 4);
    CHECK(a3[0] == r(1, 3));
    CHECK(a3[1] == r(4, 9));
    CHECK(a3[2] == r(13, 27));
    auto a6 = wake_exhaustion(6, r(0, 1), R, 3);
    CHECK(a6[0] == r(1, 6));
    CHECK(a6[1] == r(7, 36));
    CHECK(a6[2] == r(43, 216));
    auto a4 = wake_exhaustion(4, r(0, 1), R, 3);
    CHECK(a4[2] == r(21, 64));

    // D(alpha_n) = alpha_{n-1} exactly, and alpha_n approaches alpha_0 + 1/(D-1)
    for (int D : {3, 4, 6}) {
        auto m = build_model(D, 2, 0, std::vector<WakeSide>(D - 2, L));
        for (const auto& w : m.wakes) {
            auto a = wake_exhaustion(m, w.i, 50);
            CHECK(mul_mod1(a[0], D) == w.theta);
            CHECK(a[0] == w.theta_prime);
            for (std::size_t n = 1; n < a.size(); ++n) CHECK(mul_mod1(a[n], D) == a[n - 1]);
            Angle limit = w.side == R ? add_mod1(w.theta, r(1, D - 1)) : sub_mod1(w.theta, r(1, D - 1));
            CHECK(circle_dist(a.back().value(), limit.value()) < 1e-15);
        }
    }
}

TEST_CASE("models checked against traced polynomials") {
    VerifyOptions o;
    o.n_max = 8;
    {
        RayTracer rt(Polynomial({0.0, 0.0, cplx(0.3162050828743217, -1.9255222181353253), 1.0}));
        auto rep = verify_against_polynomial(build_model(3, 2, 0, {L}), rt, {0.0, 1}, o);
        for (const auto& l : rep.lines) CHECK_MESSAGE(l.pass, l.property << ": " << l.detail);
        CHECK_NOTHROW(require_verified(rep));
    }
    {
        RayTracer rt(Polynomial({0.0, 0.0, 2.4471213915392602, -1.64846, 1.0}));
        auto rep = verify_against_polynomial(build_model(4, 2, 0, {L, R}), rt, {0.0, 1}, o);
        for (const auto& l : rep.lines) CHECK_MESSAGE(l.pass, l.property << ": " << l.detail);
        CHECK(rep.lines.back().detail == "0/1");
    }
    {
        // perturbed coefficient: whatever the outcome, ok must agree with the lines
        RayTracer rt(Polynomial({0.0, 0.0, 1.1 * cplx(0.3162050828743217, -1.9255222181353253), 1.0}));
        o.check_semiconj = false;
        auto rep = verify_against_polynomial(build_model(3, 2, 0, {L}), rt, {0.0, 1}, o);
        bool all = true;
        for (const auto& l : rep.lines) all = all && l.pass;
        CHECK(rep.ok == all);
        if (!rep.ok) {
            try {
                require_verified(rep);
                FAIL("expected VerificationFailed");
            } catch (const Error& e) {
                CHECK(e.code() == "VerificationFailed");
            }
        }
    }
}
