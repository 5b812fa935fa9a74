#include "rayatlas/surgery.hpp"
#include "rayatlas/error.hpp"
#include "rayatlas/semiconj.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rayatlas {

std::string to_string(WakeSide s) { return s == WakeSide::left ? "left" : "right"; }

WakeSide parse_wake_side(const std::string& s) {
    if (s == "left" || s == "L") return WakeSide::left;
    if (s == "right" || s == "R") return WakeSide::right;
    throw Error("InvalidArgument", "wake side must be left or right, got '" + s + "'");
}

Angle fixed_angle(int D, int i) {
    const long long n = D - 1;
    return Angle::rational(((i % n) + n) % n, n);
}

namespace {

using Q = boost::multiprecision::cpp_rational;

Q q(const Angle& a) { return Q(a.num(), a.den()); }

Q off(const Q& x, const Q& from) {
    Q r = x - from;
    while (r < 0) r += 1;
    while (r >= 1) r -= 1;
    return r;
}

Wake make_wake(int D, int i, WakeSide side) {
    Wake w;
    w.i = i;
    w.side = side;
    w.theta = fixed_angle(D, i);
    Angle step = Angle::rational(1, D);
    if (side == WakeSide::right) {
        w.theta_prime = add_mod1(w.theta, step);
        w.J = Arc{w.theta, w.theta_prime};
    } else {
        w.theta_prime = sub_mod1(w.theta, step);
        w.J = Arc{w.theta_prime, w.theta};
    }
    return w;
}

bool inside_window(int D, int d, int j, const Wake& w) {
    Q start = q(fixed_angle(D, j));
    Q span = off(q(fixed_angle(D, j + D - d)), start);
    Q a = off(q(w.J.a), start);
    return a + Q(1, D) <= span;
}

bool closures_disjoint(int D, const Wake& x, const Wake& y) {
    Q len(1, D);
    return off(q(y.J.a), q(x.J.a)) > len && off(q(x.J.a), q(y.J.a)) > len;
}

std::string describe(const Wake& w) {
    return "J_" + std::to_string(w.i) + " = ]" + w.J.a.str() + "," + w.J.b.str() + "[";
}

} // namespace

SurgeryModel build_model(int D, int d, int j, const std::vector<WakeSide>& choices) {
    if (d < 2 || d >= D) throw Error("InvalidChoices", "need 2 <= d < D");
    if (static_cast<int>(choices.size()) != D - d)
        throw Error("InvalidChoices", "expected " + std::to_string(D - d) + " choices, got " + std::to_string(choices.size()));
    SurgeryModel m;
    m.D = D;
    m.d = d;
    m.j_requested = j;
    const int n = D - 1;
    for (int k = 0; k < D - d; ++k) m.wakes.push_back(make_wake(D, j + 1 + k, choices[k]));

    for (std::size_t a = 0; a < m.wakes.size(); ++a)
        for (std::size_t b = a + 1; b < m.wakes.size(); ++b)
            if (!closures_disjoint(D, m.wakes[a], m.wakes[b]))
                throw Error("InvalidChoices", "condition (ii): closures of " + describe(m.wakes[a]) + " and " +
                                                  describe(m.wakes[b]) + " meet");

    int found = -1;
    for (int t = 0; t < n && found < 0; ++t) {
        int cand = ((j + t) % n + n) % n;
        bool all = true;
        for (const auto& w : m.wakes) all = all && inside_window(D, d, cand, w);
        if (all) found = cand;
    }
    if (found < 0) {
        std::string bad;
        for (const auto& w : m.wakes)
            if (!inside_window(D, d, j, w)) bad = describe(w);
        throw Error("InvalidChoices", "condition (i): " + bad + " is not inside ]" + fixed_angle(D, j).str() + "," +
                                          fixed_angle(D, j + D - d).str() + "[ and no other window holds all wakes");
    }
    m.j = found;
    if (found != ((j % n) + n) % n)
        m.notes.push_back("wakes lie in ]" + fixed_angle(D, found).str() + "," + fixed_angle(D, found + D - d).str() +
                          "[, not in ]" + fixed_angle(D, j).str() + "," + fixed_angle(D, j + D - d).str() +
                          "[; window start moved from j=" + std::to_string(j) + " to j=" + std::to_string(found));
    for (int k = 0; k <= D - d; ++k) m.predicted_fiber.push_back(fixed_angle(D, m.j + k));
    for (int k = 1; k < D - d; ++k) m.isolated_candidates.push_back(fixed_angle(D, m.j + k));
    return m;
}

std::vector<std::vector<std::pair<int, WakeSide>>> enumerate_collections(int D, int d, int j) {
    std::vector<Wake> cand;
    for (int i = j; i <= j + D - d; ++i)
        for (WakeSide s : {WakeSide::left, WakeSide::right}) {
            Wake w = make_wake(D, i, s);
            if (inside_window(D, d, j, w)) cand.push_back(w);
        }
    std::vector<std::vector<std::pair<int, WakeSide>>> out;
    const int want = D - d;
    const int nc = static_cast<int>(cand.size());
    for (unsigned mask = 0; mask < (1u << nc); ++mask) {
        if (__builtin_popcount(mask) != want) continue;
        std::vector<const Wake*> pick;
        for (int b = 0; b < nc; ++b)
            if (mask & (1u << b)) pick.push_back(&cand[b]);
        bool ok = true;
        for (std::size_t a = 0; a < pick.size() && ok; ++a)
            for (std::size_t b = a + 1; b < pick.size() && ok; ++b) ok = closures_disjoint(D, *pick[a], *pick[b]);
        if (!ok) continue;
        std::vector<std::pair<int, WakeSide>> c;
        for (const Wake* w : pick) c.push_back({w->i, w->side});
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<Angle> wake_exhaustion(int D, const Angle& alpha0, WakeSide side, int n_max) {
    std::vector<Angle> out;
    BigInt pw = 1;
    Angle sum = Angle::rational(0, 1);
    for (int n = 1; n <= n_max; ++n) {
        pw *= D;
        sum = add_mod1(sum, Angle::rational(BigInt(1), pw));
        out.push_back(side == WakeSide::right ? add_mod1(alpha0, sum) : sub_mod1(alpha0, sum));
    }
    return out;
}

std::vector<Angle> wake_exhaustion(const SurgeryModel& m, int i, int n_max) {
    for (const auto& w : m.wakes)
        if (((w.i - i) % (m.D - 1)) == 0) return wake_exhaustion(m.D, w.theta, w.side, n_max);
    throw Error("InvalidArgument", "no wake at index " + std::to_string(i));
}

VerificationReport verify_against_polynomial(const SurgeryModel& m, const RayTracer& rt, const ComponentSeed& seed,
                                             const VerifyOptions& opt) {
    VerificationReport r;
    auto add = [&](std::string prop, bool pass, std::string detail) {
        r.lines.push_back({std::move(prop), pass, std::move(detail)});
        r.ok = r.ok && pass;
    };
    if (rt.poly().degree() != m.D) {
        add("degree", false, "polynomial has degree " + std::to_string(rt.poly().degree()) + ", model D=" + std::to_string(m.D));
        return r;
    }

    const auto& crit = rt.critical();
    std::vector<int> esc;
    int escaping_mult = 0, bounded_mult = 0;
    for (std::size_t c = 0; c < crit.size(); ++c) {
        if (crit[c].escaping) {
            esc.push_back(static_cast<int>(c));
            escaping_mult += crit[c].multiplicity;
        } else {
            bounded_mult += crit[c].multiplicity;
        }
    }
    {
        bool simple = escaping_mult == static_cast<int>(esc.size());
        std::ostringstream os;
        os << esc.size() << " escaping (multiplicity " << escaping_mult << "), expected " << (m.D - m.d)
           << " simple; bounded multiplicity " << bounded_mult;
        add("(ii) escaping critical points distinct, D-d of them", simple && escaping_mult == m.D - m.d, os.str());
    }

    std::vector<int> used;
    for (const auto& w : m.wakes) {
        int hit = -1;
        for (int c : esc) {
            if (std::find(used.begin(), used.end(), c) != used.end()) continue;
            std::vector<Angle> A;
            try {
                A = rt.crash_angles(c);
            } catch (const Error&) {
                continue;
            }
            auto has = [&](const Angle& t) {
                for (const Angle& x : A)
                    if (circle_dist(x.value(), t.value()) <= opt.angle_tol + x.err()) return true;
                return false;
            };
            if (has(w.theta) && has(w.theta_prime)) {
                hit = c;
                break;
            }
        }
        if (hit >= 0) used.push_back(hit);
        add("(iii) R_" + w.theta.str() + " and R_" + w.theta_prime.str() + " crash into one escaping critical point",
            hit >= 0, hit >= 0 ? "critical point " + std::to_string(hit) : "no escaping critical point has both crash angles");
    }

    // one-sided limits that stay on K: minus for a wake on the right, plus for a wake on the left
    TraceOptions to;
    to.s_min = opt.s_min;
    bool landed = true;
    std::string why;
    for (const Angle& t : m.predicted_fiber) {
        Side side = Side::smooth;
        for (const auto& w : m.wakes)
            if (w.theta == t) side = w.side == WakeSide::right ? Side::minus : Side::plus;
        try {
            RayTrace tr = rt.trace(t, side, to);
            if (!tr.landing) {
                landed = false;
                why = "ray " + t.str() + " (" + to_string(side) + ") did not land";
                r.landing.push_back(tr.samples.empty() ? cplx{} : tr.samples.back().z);
            } else {
                r.landing.push_back(*tr.landing);
            }
        } catch (const Error& e) {
            landed = false;
            why = "ray " + t.str() + ": " + e.what();
            r.landing.push_back(cplx{});
        }
    }
    double spread = 0.0;
    for (const cplx& z : r.landing) spread = std::max(spread, std::abs(z - r.landing.front()));
    double fixed_res = std::abs(eval(rt.poly(), r.landing.front()) - r.landing.front());
    {
        std::ostringstream os;
        os.precision(3);
        if (!landed) os << why << "; ";
        os << "spread " << spread << ", |P(beta)-beta| " << fixed_res;
        add("fiber rays co-land at a fixed point", landed && spread <= opt.coland_tol && fixed_res <= opt.coland_tol, os.str());
    }

    if (opt.check_semiconj) {
        try {
            auto table = build_pi_table(rt, seed, m.d, opt.n_max);
            // the sharpest Pi value among the predicted members (exact on C_n)
            PiValue tau = evaluate_pi(table, m.predicted_fiber.front());
            for (const Angle& t : m.predicted_fiber) {
                PiValue v = evaluate_pi(table, t);
                if (v.err < tau.err) tau = v;
            }
            auto f = fiber(table, tau.value);
            bool match = f.size() == m.predicted_fiber.size();
            for (const Angle& t : m.predicted_fiber) {
                bool found = false;
                for (const auto& x : f) found = found || circle_dist(x.angle.value(), t.value()) <= opt.angle_tol + x.err;
                match = match && found;
            }
            std::ostringstream os;
            os << "fiber of " << tau.value.str() << ":";
            for (const auto& x : f) os << " " << x.angle.str();
            add("semiconjugacy fiber equals the predicted fiber", match, os.str());
        } catch (const Error& e) {
            add("semiconjugacy fiber equals the predicted fiber", false, e.what());
        }
    }

    std::string iso;
    for (const Angle& t : m.isolated_candidates) iso += (iso.empty() ? "" : " ") + t.str();
    r.lines.push_back({"isolated points of I (interior fiber members)", true, iso.empty() ? "none" : iso});
    return r;
}

void require_verified(const VerificationReport& r) {
    if (r.ok) return;
    std::string msg;
    for (const auto& l : r.lines)
        if (!l.pass) msg += (msg.empty() ? "" : "; ") + l.property + " [" + l.detail + "]";
    throw Error("VerificationFailed", msg);
}

} // namespace rayatlas
