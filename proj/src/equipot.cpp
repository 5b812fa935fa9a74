#include "rayatlas/equipot.hpp"
#include "rayatlas/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace rayatlas {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

cplx project_to_level(const Polynomial& p, cplx z, double s, bool* ok = nullptr) {
    for (int it = 0; it < 12; ++it) {
        GreenValue g = green(p, z);
        if (g.orbit != Orbit::escaped || g.log_derivative == 0.0) {
            // inside K: push outward is impossible to direct; give up
            if (ok) *ok = false;
            return z;
        }
        double r = s - g.value;
        z += r * std::conj(g.log_derivative) / std::norm(g.log_derivative);
        if (std::fabs(r) < 1e-14 * s) break;
    }
    if (ok) *ok = true;
    return z;
}

std::optional<double> angle_at(const Polynomial& p, cplx z) {
    try {
        return external_angle(p, z).value();
    } catch (const Error&) {
        return std::nullopt;
    }
}

double predicted_increment(cplx ld0, cplx ld1, cplx dz) { return (0.5 * (ld0 + ld1) * dz).imag() / kTwoPi; }

struct Snap {
    double value;
    std::vector<double> crash; // potentials of crashes at or above s
};

// Angles whose broken rays crash at potential >= s lie in D^-m(A_c) with G(c)/D^m >= s.
std::optional<Snap> snap_endpoint(const RayTracer& rt, double x, double s, double tol) {
    const int D = rt.poly().degree();
    std::optional<Snap> best;
    double best_d = tol;
    for (std::size_t i = 0; i < rt.critical().size(); ++i) {
        const auto& c = rt.critical()[i];
        if (!c.escaping) continue;
        auto A = rt.crash_angles(static_cast<int>(i));
        double t = c.potential;
        double Dm = 1.0;
        for (int m = 0; t >= s * (1.0 - 1e-9); ++m, t /= D, Dm *= D) {
            for (const auto& a : A) {
                double j = std::round(x * Dm - a.value());
                double phi = wrap01((a.value() + j) / Dm);
                double dist = circle_dist(phi, x);
                if (dist < best_d + 1e-15) {
                    if (!best || dist < best_d - 1e-15) {
                        best = Snap{phi, {}};
                        best_d = dist;
                    }
                    if (circle_dist(best->value, phi) < 1e-13) best->crash.push_back(t);
                }
            }
            if (Dm > 1e15) break;
        }
    }
    return best;
}

bool point_in_polygon(const std::vector<cplx>& poly, cplx q) {
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const cplx& a = poly[i];
        const cplx& b = poly[j];
        if ((a.imag() > q.imag()) != (b.imag() > q.imag())) {
            double x = (b.real() - a.real()) * (q.imag() - a.imag()) / (b.imag() - a.imag()) + a.real();
            if (q.real() < x) inside = !inside;
        }
    }
    return inside;
}

std::vector<cplx> compose_power(const Polynomial& p, int j) {
    // coefficients of P^j, constant first
    std::vector<cplx> acc{0.0, 1.0};
    for (int it = 0; it < j; ++it) {
        std::vector<cplx> out{p.coeffs()[p.degree()]};
        // Horner: out = out*acc + c_i
        for (int i = p.degree() - 1; i >= 0; --i) {
            std::vector<cplx> prod(out.size() + acc.size() - 1, 0.0);
            for (std::size_t a = 0; a < out.size(); ++a)
                for (std::size_t b = 0; b < acc.size(); ++b) prod[a + b] += out[a] * acc[b];
            prod[0] += p.coeffs()[i];
            out = std::move(prod);
        }
        acc = std::move(out);
    }
    return acc;
}

struct CritOfPower {
    cplx z;
    int multiplicity;
    bool escaping;
    double potential;
    int base; // index of the critical point of P it maps onto
};

std::vector<CritOfPower> critical_points_of_power(const RayTracer& rt, int k) {
    std::vector<CritOfPower> out;
    const Polynomial& p = rt.poly();
    for (std::size_t i = 0; i < rt.critical().size(); ++i) {
        const auto& c = rt.critical()[i];
        out.push_back({c.location, c.multiplicity, c.escaping, c.potential, static_cast<int>(i)});
        for (int j = 1; j < k; ++j) {
            std::vector<cplx> q = compose_power(p, j);
            q[0] -= c.location;
            for (cplx r : polynomial_roots(q, 1e-15)) {
                GreenValue g = green(p, r);
                bool esc = g.orbit == Orbit::escaped && g.value > 0;
                out.push_back({r, c.multiplicity, esc, esc ? g.value : 0.0, static_cast<int>(i)});
            }
        }
    }
    return out;
}

struct DArc {
    double a;
    double len;
};

std::vector<DArc> to_darcs(const ArcSet& s) {
    std::vector<DArc> v;
    if (s.full()) return {{0.0, 1.0}};
    for (const auto& arc : s.arcs()) v.push_back({arc.a.value(), arc.length()});
    return v;
}

ArcSet from_darcs(const std::vector<DArc>& v, double err) {
    std::vector<Arc> arcs;
    for (const auto& x : v) arcs.push_back({Angle::approx(x.a, err), Angle::approx(wrap01(x.a + x.len), err)});
    return ArcSet(std::move(arcs));
}

// Intersection of two sets of disjoint circle arcs; arcs given with start in [0,1).
std::vector<DArc> intersect(const std::vector<DArc>& X, const std::vector<DArc>& Y, double sliver) {
    auto unroll = [](const std::vector<DArc>& v) {
        std::vector<std::pair<double, double>> out;
        for (const auto& x : v) {
            double e = x.a + x.len;
            if (e <= 1.0) out.push_back({x.a, e});
            else {
                out.push_back({x.a, 1.0});
                out.push_back({0.0, e - 1.0});
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    };
    auto ux = unroll(X), uy = unroll(Y);
    std::vector<std::pair<double, double>> res;
    std::size_t i = 0, j = 0;
    while (i < ux.size() && j < uy.size()) {
        double lo = std::max(ux[i].first, uy[j].first);
        double hi = std::min(ux[i].second, uy[j].second);
        if (hi - lo > sliver) res.push_back({lo, hi});
        if (ux[i].second < uy[j].second) ++i;
        else ++j;
    }
    // glue pieces split at 0 and pieces touching at a shared endpoint
    std::vector<std::pair<double, double>> merged;
    for (const auto& r : res) {
        if (!merged.empty() && r.first - merged.back().second <= 1e-15) merged.back().second = std::max(merged.back().second, r.second);
        else merged.push_back(r);
    }
    if (merged.size() > 1 && merged.front().first <= 1e-15 && merged.back().second >= 1.0 - 1e-15) {
        merged.back().second = 1.0 + merged.front().second;
        merged.erase(merged.begin());
    }
    std::vector<DArc> out;
    for (const auto& m : merged) out.push_back({wrap01(m.first), m.second - m.first});
    std::sort(out.begin(), out.end(), [](const DArc& a, const DArc& b) { return a.a < b.a; });
    return out;
}

std::string num(double x) {
    std::ostringstream os;
    os.precision(12);
    os << x;
    return os.str();
}

} // namespace

void check_seed(const Polynomial& p, const ComponentSeed& seed) {
    if (seed.k < 1) throw Error("InvalidArgument", "period k must be >= 1");
    if (green(p, seed.marker).orbit == Orbit::escaped)
        throw Error("SeedEscapes", "marker is not in the filled Julia set");
}

EquipotentialCurve equipotential_trace(const RayTracer& rt, const ComponentSeed& seed, double s, const CurveOptions& opt) {
    const Polynomial& p = rt.poly();
    check_seed(p, seed);
    if (!(s > 0)) throw Error("InvalidArgument", "potential must be positive");

    // first point with G = s on a ray from the marker
    const cplx dir = 1.0;
    double t = 0.0, t_prev = 0.0;
    const double base_step = 1e-3 * (1.0 + std::abs(seed.marker));
    for (int it = 0;; ++it) {
        if (it > 10000000) throw Error("CurveNotClosed", "no point with the requested potential on the search line");
        GreenValue g = green(p, seed.marker + t * dir);
        if (g.value >= s) break;
        double step = base_step + 0.5 * t;
        if (g.value > 0 && std::abs(g.log_derivative) > 0)
            step = std::min(step, std::max(1e-12, 0.5 * (s - g.value) / std::abs(g.log_derivative)));
        t_prev = t;
        t += step;
    }
    double lo = t_prev, hi = t;
    for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (lo + hi);
        if (green(p, seed.marker + mid * dir).value >= s) hi = mid;
        else lo = mid;
    }
    cplx z0 = project_to_level(p, seed.marker + hi * dir, s);

    EquipotentialCurve curve;
    curve.s = s;
    std::vector<cplx> lds;
    GreenValue g0 = green(p, z0);
    curve.points.push_back(z0);
    lds.push_back(g0.log_derivative);
    cplx z = z0, ld = g0.log_derivative;
    const double hs = opt.rel_step * std::min(s, 1.0);
    double h = hs / std::abs(ld);
    double far = 0.0;
    bool closed = false;
    for (int step = 0; step < opt.max_steps; ++step) {
        cplx T = cplx(0, 1) * std::conj(ld) / std::abs(ld);
        cplx zp = z + h * T;
        bool ok = true;
        cplx zn = project_to_level(p, zp, s, &ok);
        GreenValue gn = green(p, zn);
        bool accept = ok && gn.orbit == Orbit::escaped && std::abs(zn - zp) < 0.25 * h;
        if (accept) {
            cplx Tn = cplx(0, 1) * std::conj(gn.log_derivative) / std::abs(gn.log_derivative);
            accept = std::fabs(std::arg(Tn / T)) < opt.max_turn;
        }
        if (!accept) {
            h *= 0.5;
            if (h < 1e-14 * (1.0 + std::abs(z))) throw Error("CurveNotClosed", "step underflow while following the level curve");
            continue;
        }
        // closure: the new chord passes next to the starting point
        if (far > 10.0 * h && curve.points.size() > 8) {
            cplx seg = zn - z;
            double u = std::clamp(((z0 - z) * std::conj(seg)).real() / std::norm(seg), 0.0, 1.0);
            if (std::abs(z + u * seg - z0) < 0.5 * std::abs(seg)) {
                closed = true;
                break;
            }
        }
        z = zn;
        ld = gn.log_derivative;
        curve.points.push_back(z);
        lds.push_back(ld);
        far = std::max(far, std::abs(z - z0));
        h = std::min(h * 1.25, hs / std::abs(ld));
    }
    if (!closed) throw Error("CurveNotClosed", "level curve did not close within the step budget");

    const std::size_t n = curve.points.size();
    // Simpson increments of Theta along each chord (ld is analytic off K)
    std::vector<double> inc(n);
    for (std::size_t i = 0; i < n; ++i) {
        cplx A = curve.points[i], B = curve.points[(i + 1) % n];
        cplx ldm = green(p, 0.5 * (A + B)).log_derivative;
        inc[i] = ((lds[i] + 4.0 * ldm + lds[(i + 1) % n]) * (B - A)).imag() / (6.0 * kTwoPi);
    }
    curve.theta_int.assign(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) curve.theta_int[i] = curve.theta_int[i - 1] + inc[i - 1];
    curve.angular_length = curve.theta_int.back() + inc[n - 1];
    if (!opt.angles) return curve;

    // absolute angles on a coarse stride; blocks whose ends disagree with the
    // integrated increment are resolved point by point
    std::vector<std::optional<double>> abs(n);
    const std::size_t stride = std::max<std::size_t>(1, n / 256);
    auto block_ok = [&](std::size_t a, std::size_t b, double span) {
        return abs[a] && abs[b % n] && std::fabs(centered(*abs[b % n] - *abs[a] - span)) <= 0.05 * std::fabs(span) + 1e-9;
    };
    abs[0] = angle_at(p, curve.points[0]);
    for (std::size_t a = 0; a < n; a += stride) {
        std::size_t b = std::min(a + stride, n);
        if (!abs[b % n]) abs[b % n] = angle_at(p, curve.points[b % n]);
        double span = 0.0;
        for (std::size_t i = a; i < b; ++i) span += inc[i];
        if (block_ok(a, b, span)) {
            for (std::size_t i = a + 1; i < b; ++i) abs[i] = wrap01(*abs[a] + curve.theta_int[i] - curve.theta_int[a]);
        } else {
            for (std::size_t i = a + 1; i < b; ++i) abs[i] = angle_at(p, curve.points[i]);
        }
    }
    curve.theta_abs.assign(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < n; ++i)
        if (abs[i]) curve.theta_abs[i] = *abs[i];
    if (abs[0])
        for (double& v : curve.theta_int) v += *abs[0];
    double total_len = 0.0;
    for (std::size_t i = 0; i < n; ++i) total_len += std::abs(curve.points[(i + 1) % n] - curve.points[i]);

    // roots: segments where the absolute angle jumps ahead of the integrated increment
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = (i + 1) % n;
        cplx A = curve.points[i], B = curve.points[j];
        double pred = inc[i];
        std::optional<double> ta = abs[i], tb = abs[j];
        if (ta && tb) {
            double jump = centered(*tb - *ta - pred);
            if (std::fabs(jump) <= 0.05 * std::fabs(pred) + 1e-9) continue;
        }
        if (!ta || !tb)
            throw Error("CurveNotClosed", "external angle unresolved at a curve sample near " + num(A.real()) + "," + num(A.imag()));
        auto consistent = [&](double th0, cplx ld0, cplx z0s, double th1, cplx ld1, cplx z1s) {
            double pr = predicted_increment(ld0, ld1, z1s - z0s);
            return std::fabs(centered(th1 - th0 - pr)) < 1e-7 + 0.05 * std::fabs(pr);
        };
        // a segment may hide several jumps; peel them off from the left
        double ua = 0.0;
        cplx qa = A, lda = lds[i];
        double tha = *ta;
        for (int guard = 0; guard < 64 && !consistent(tha, lda, qa, *tb, lds[j], B); ++guard) {
            double lo = ua, hi = 1.0;
            cplx qb = B, ldb = lds[j];
            double thb = *tb;
            cplx ql = qa, ldl = lda;
            double thl = tha;
            while ((hi - lo) * std::abs(B - A) > opt.root_tol * total_len) {
                double um = 0.5 * (lo + hi);
                cplx qm = project_to_level(p, A + um * (B - A), s);
                auto tm = angle_at(p, qm);
                if (!tm) break;
                cplx ldm = green(p, qm).log_derivative;
                if (consistent(thl, ldl, ql, *tm, ldm, qm)) {
                    lo = um;
                    ql = qm;
                    thl = *tm;
                    ldl = ldm;
                } else {
                    hi = um;
                    qb = qm;
                    thb = *tm;
                    ldb = ldm;
                }
            }
            cplx root = 0.5 * (ql + qb);
            double left = wrap01(thl + predicted_increment(ldl, ldl, root - ql));
            double right = wrap01(thb - predicted_increment(ldb, ldb, qb - root));
            RootPoint rp;
            rp.index = i;
            rp.z = root;
            double err = std::fabs(predicted_increment(ldl, ldb, qb - ql)) + 1e-12;
            auto sl = snap_endpoint(rt, left, s, std::max(1e-7, 10 * err));
            auto sr = snap_endpoint(rt, right, s, std::max(1e-7, 10 * err));
            rp.left = sl ? Angle::approx(sl->value, 1e-14) : Angle::approx(left, err);
            rp.right = sr ? Angle::approx(sr->value, 1e-14) : Angle::approx(right, err);
            rp.snapped = sl.has_value() && sr.has_value();
            if (sl && sr) {
                for (double x : sl->crash)
                    for (double y : sr->crash)
                        if (std::fabs(x - y) < 1e-9 * x) rp.crash_s = std::max(rp.crash_s, x);
            }
            curve.roots.push_back(rp);
            ua = hi;
            qa = qb;
            tha = thb;
            lda = ldb;
        }
    }
    return curve;
}

IntervalSystem interval_system_from_curve(const RayTracer& rt, const EquipotentialCurve& c, int k, int d) {
    (void)rt;
    IntervalSystem sys;
    sys.s = c.s;
    sys.k = k;
    sys.d = d;
    if (c.roots.empty()) {
        if (std::fabs(c.angular_length - 1.0) > 1e-3)
            throw Error("CurveNotClosed", "curve without root points does not wind once");
        sys.arcs = ArcSet::full_circle();
        sys.degenerate = true;
        return sys;
    }
    std::vector<Arc> arcs;
    const std::size_t r = c.roots.size();
    double err = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        const auto& cur = c.roots[i];
        const auto& nxt = c.roots[(i + 1) % r];
        arcs.push_back({cur.right, nxt.left});
        sys.gaps.push_back({cur.left, cur.right, cur.crash_s});
        err = std::max({err, cur.left.err(), cur.right.err()});
    }
    sys.arcs = ArcSet(arcs);
    sys.endpoint_err = err;
    std::sort(sys.gaps.begin(), sys.gaps.end(), [](const Gap& a, const Gap& b) { return a.a.value() < b.a.value(); });
    return sys;
}

IntervalSystem extract_interval_system(const RayTracer& rt, const ComponentSeed& seed, double s, int d, const CurveOptions& opt) {
    CurveOptions o = opt;
    o.angles = true;
    return interval_system_from_curve(rt, equipotential_trace(rt, seed, s, o), seed.k, d);
}

PushforwardReport pushforward_check(const IntervalSystem& sys, const IntervalSystem& image, int D, double tol) {
    PushforwardReport rep;
    if (sys.degenerate || image.degenerate) {
        rep.ok = sys.degenerate && image.degenerate;
        if (!rep.ok) throw Error("MismatchBeyondTolerance", "only one of the systems is the full circle");
        return rep;
    }
    double Dk = std::pow(static_cast<double>(D), sys.k);
    long long Dki = static_cast<long long>(std::llround(Dk));
    std::vector<std::pair<double, double>> pieces;
    for (const auto& arc : sys.arcs.arcs()) {
        double a = mul_mod1(arc.a, Dki).value();
        double len = std::min(1.0, Dk * arc.length());
        pieces.push_back({a, a + len});
    }
    std::sort(pieces.begin(), pieces.end());
    std::vector<std::pair<double, double>> merged;
    for (const auto& pc : pieces) {
        if (!merged.empty() && pc.first <= merged.back().second + tol) {
            if (pc.first > merged.back().second - tol && pc.first < merged.back().second + tol && pc.first != merged.back().second)
                rep.events.push_back("image endpoint " + num(pc.first) + " meets " + num(merged.back().second));
            merged.back().second = std::max(merged.back().second, pc.second);
        } else {
            merged.push_back(pc);
        }
    }
    if (merged.size() > 1 && merged.back().second >= merged.front().first + 1.0 - tol) {
        merged.front().first = merged.back().first - 1.0;
        merged.front().second = std::max(merged.front().second, merged.back().second - 1.0);
        merged.pop_back();
    }
    std::vector<std::pair<double, double>> target;
    for (const auto& arc : image.arcs.arcs()) target.push_back({arc.a.value(), arc.a.value() + arc.length()});
    if (merged.size() != target.size()) {
        rep.ok = false;
        rep.max_deviation = 1.0;
        throw Error("MismatchBeyondTolerance", "image has " + std::to_string(merged.size()) + " arcs, expected " +
                                                   std::to_string(target.size()));
    }
    // match cyclically by the closest start
    for (const auto& m : merged) {
        double best = 1.0;
        for (const auto& t : target)
            best = std::min(best, std::max(circle_dist(m.first, t.first), std::fabs((m.second - m.first) - (t.second - t.first))));
        rep.max_deviation = std::max(rep.max_deviation, best);
    }
    if (rep.max_deviation > tol) {
        rep.ok = false;
        throw Error("MismatchBeyondTolerance", "deviation " + num(rep.max_deviation));
    }
    return rep;
}

SStar estimate_s_star(const RayTracer& rt, const ComponentSeed& seed, int d, double s_cap) {
    check_seed(rt.poly(), seed);
    SStar out;
    auto crits = critical_points_of_power(rt, seed.k);
    std::vector<double> esc_pot;
    for (const auto& c : crits)
        if (c.escaping) esc_pot.push_back(c.potential);
    std::sort(esc_pot.begin(), esc_pot.end());
    esc_pot.erase(std::unique(esc_pot.begin(), esc_pot.end(), [](double a, double b) { return std::fabs(a - b) < 1e-12 * a; }),
                  esc_pot.end());
    if (esc_pot.empty()) {
        out.value = s_cap;
        out.degenerate = true;
        return out;
    }
    CurveOptions o;
    o.angles = false;
    auto good = [&](double s) {
        EquipotentialCurve c = equipotential_trace(rt, seed, s, o);
        int nonesc = 0;
        for (const auto& cp : crits) {
            if (cp.escaping && cp.potential >= s) continue;
            if (!point_in_polygon(c.points, cp.z)) continue;
            if (cp.escaping) return false;
            nonesc += cp.multiplicity;
        }
        return nonesc == d - 1;
    };
    double lo = 0.5 * esc_pot.front();
    if (!good(lo)) throw Error("NoPolynomialLikeRestriction", "V_s has the wrong critical points even at small s");
    double hi = 0.0;
    for (double t : esc_pot) {
        if (t > s_cap) break;
        if (good(t * 1.02)) lo = t * 1.02;
        else {
            hi = t * 1.02;
            break;
        }
    }
    if (hi == 0.0) {
        out.value = s_cap;
        out.degenerate = true;
        return out;
    }
    while (hi - lo > 0.01 * lo) {
        double mid = 0.5 * (lo + hi);
        if (good(mid)) lo = mid;
        else hi = mid;
    }
    out.lo = lo;
    out.hi = hi;
    out.value = lo;
    // V_s swallows an escaping critical point exactly at its potential
    for (double t : esc_pot)
        if (t >= lo * (1.0 - 1e-12) && t <= hi * (1.0 + 1e-12)) out.value = t;
    for (std::size_t i = 0; i < rt.critical().size(); ++i)
        if (rt.critical()[i].escaping) out.excluded.push_back(static_cast<int>(i));
    return out;
}

namespace {

std::vector<IntervalSystem> ladder_impl(const RayTracer* rt, const IntervalSystem& base, int D, int levels) {
    std::vector<IntervalSystem> out{base};
    if (base.degenerate) {
        for (int n = 1; n <= levels; ++n) {
            IntervalSystem next = base;
            next.s = out.back().s / std::pow(D, base.k);
            out.push_back(next);
        }
        return out;
    }
    const long long Dk = static_cast<long long>(std::llround(std::pow(static_cast<double>(D), base.k)));
    double err = std::max(base.endpoint_err, 1e-16);
    for (int n = 1; n <= levels; ++n) {
        const IntervalSystem& prev = out.back();
        std::vector<DArc> cur = to_darcs(prev.arcs);
        std::vector<DArc> pre;
        pre.reserve(cur.size() * Dk);
        for (long long j = 0; j < Dk; ++j)
            for (const auto& x : cur) pre.push_back({wrap01((x.a + j) / Dk), x.len / Dk});
        std::sort(pre.begin(), pre.end(), [](const DArc& a, const DArc& b) { return a.a < b.a; });
        err = std::max(err / Dk, 1e-16);
        std::vector<DArc> inter = intersect(pre, cur, 1e-13);
        IntervalSystem next;
        next.s = prev.s / Dk;
        next.k = prev.k;
        next.d = prev.d;
        next.endpoint_err = err;
        next.arcs = from_darcs(inter, err);
        // gaps with crash potentials: image gap potential / D^k, or a critical point of P^k
        const auto& arcs = next.arcs.arcs();
        for (std::size_t i = 0; i < arcs.size(); ++i) {
            Gap g;
            g.a = arcs[i].b;
            g.b = arcs[(i + 1) % arcs.size()].a;
            double ia = mul_mod1(g.a, Dk).value(), ib = mul_mod1(g.b, Dk).value();
            if (circle_dist(ia, ib) < 1e-9) {
                if (!rt) {
                    next.gaps.push_back(g);
                    continue;
                }
                auto pa = rt->predicted_crashes(Angle::approx(g.a.value(), err), next.s * (1 - 1e-9));
                auto pb = rt->predicted_crashes(Angle::approx(g.b.value(), err), next.s * (1 - 1e-9));
                for (const auto& x : pa)
                    for (const auto& y : pb)
                        if (std::fabs(x.potential - y.potential) < 1e-9 * x.potential) g.crash_s = std::max(g.crash_s, x.potential);
            } else {
                bool found = false;
                for (const auto& pg : prev.gaps) {
                    if (circle_dist(pg.a.value(), ia) < 1e-9 && circle_dist(pg.b.value(), ib) < 1e-9) {
                        g.crash_s = pg.crash_s / Dk;
                        found = true;
                        break;
                    }
                }
                if (!found) next.notes.push_back("gap ]" + num(g.a.value()) + "," + num(g.b.value()) + "[ does not map onto a gap");
            }
            next.gaps.push_back(g);
        }
        std::sort(next.gaps.begin(), next.gaps.end(), [](const Gap& a, const Gap& b) { return a.a.value() < b.a.value(); });
        out.push_back(std::move(next));
    }
    return out;
}

} // namespace

std::vector<IntervalSystem> build_ladder(const RayTracer& rt, const IntervalSystem& base, int levels) {
    return ladder_impl(&rt, base, rt.poly().degree(), levels);
}

std::vector<IntervalSystem> build_ladder(const IntervalSystem& base, int D, int levels) {
    return ladder_impl(nullptr, base, D, levels);
}

double arc_measure_from(const IntervalSystem& sys, double theta0, double x) {
    if (sys.arcs.full()) return arc_length(theta0, x);
    double L = arc_length(theta0, x);
    double total = 0.0;
    for (const auto& arc : sys.arcs.arcs()) {
        double a = arc_length(theta0, arc.a.value());
        double len = arc.length();
        // the arc containing theta0 wraps past 1 in the rotated frame
        if (a + len > 1.0) {
            total += std::clamp(L, 0.0, a + len - 1.0);
            total += std::clamp(L - a, 0.0, 1.0 - a);
        } else {
            total += std::clamp(L - a, 0.0, len);
        }
    }
    return total / sys.measure();
}

PiecewiseAffineCircleMap build_gs(const IntervalSystem& sys, const IntervalSystem& image, const Angle& theta0, int D) {
    if (sys.degenerate) return PiecewiseAffineCircleMap::multiplication(sys.d);
    pushforward_check(sys, image, D);
    const double Dk = std::pow(static_cast<double>(D), sys.k);
    const long long Dki = std::llround(Dk);
    const double t0 = theta0.value();
    if (sys.arcs.locate(t0, 1e-12) < 0) throw Error("FixedAngleNotInI", "theta0 is not in I_s");
    const double total = sys.measure();
    std::vector<double> ends;
    for (const auto& arc : sys.arcs.arcs()) {
        ends.push_back(arc.a.value());
        ends.push_back(wrap01(arc.a.value() + arc.length()));
    }
    std::vector<Breakpoint> bps;
    // walk arcs of I_s counterclockwise starting at theta0
    struct Piece {
        double theta;
        double len;
    };
    std::vector<Piece> pieces;
    for (const auto& arc : sys.arcs.arcs()) {
        double a = arc.a.value(), len = arc.length();
        std::vector<double> cuts{0.0, len};
        for (double e : ends)
            for (long long j = 0; j < Dki; ++j) {
                double x = arc_length(a, (e + j) / Dk);
                if (x > 1e-15 && x < len - 1e-15) cuts.push_back(x);
            }
        double x0 = arc_length(a, t0);
        if (x0 > 1e-15 && x0 < len - 1e-15) cuts.push_back(x0);
        std::sort(cuts.begin(), cuts.end());
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
            if (cuts[i + 1] - cuts[i] > 1e-15) pieces.push_back({wrap01(a + cuts[i]), cuts[i + 1] - cuts[i]});
    }
    std::sort(pieces.begin(), pieces.end(), [&](const Piece& p, const Piece& q) {
        return arc_length(t0, p.theta) < arc_length(t0, q.theta);
    });
    double x = 0.0, y = 0.0;
    for (const auto& pc : pieces) {
        double mid = wrap01(Dk * wrap01(pc.theta + 0.5 * pc.len));
        bool in = sys.arcs.locate(mid, 0.0) >= 0;
        double slope = in ? Dk : 0.0;
        bps.push_back({x, y, slope});
        x += pc.len / total;
        y += slope * pc.len / total;
    }
    // merge consecutive equal slopes
    std::vector<Breakpoint> merged;
    for (const auto& b : bps) {
        if (!merged.empty() && merged.back().slope == b.slope) continue;
        merged.push_back(b);
    }
    int degree = static_cast<int>(std::lround(y));
    if (std::fabs(y - degree) > 1e-6) throw Error("LevelConstructionFailed", "g_s does not have integer degree (" + num(y) + ")");
    // snap the last segment so that the lift closes up exactly
    return PiecewiseAffineCircleMap(merged, degree);
}

std::vector<Angle> fixed_angles_in(const IntervalSystem& sys, int D, double tol) {
    const long long Dk = std::llround(std::pow(static_cast<double>(D), sys.k));
    std::vector<Angle> out;
    for (long long j = 0; j < Dk - 1; ++j) {
        Angle a = Angle::rational(j, Dk - 1);
        if (sys.arcs.locate(a.value(), tol) >= 0) out.push_back(a);
    }
    return out;
}

} // namespace rayatlas
