#include "rayatlas/semiconj.hpp"
#include "rayatlas/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace rayatlas {

MeasureIndex::MeasureIndex(const ArcSet& arcs, double theta0) : theta0_(theta0), full_(arcs.full()) {
    if (full_) {
        start_ = {0.0};
        len_ = {1.0};
        cum_ = {0.0};
        total_ = 1.0;
        return;
    }
    std::vector<std::pair<double, double>> pieces;
    for (const auto& arc : arcs.arcs()) {
        double o = arc_length(theta0, arc.a.value());
        double len = arc.length();
        if (o + len > 1.0) {
            pieces.push_back({o, 1.0 - o});
            pieces.push_back({0.0, o + len - 1.0});
        } else {
            pieces.push_back({o, len});
        }
    }
    std::sort(pieces.begin(), pieces.end());
    double acc = 0.0;
    for (const auto& [o, len] : pieces) {
        start_.push_back(o);
        len_.push_back(len);
        cum_.push_back(acc);
        acc += len;
    }
    total_ = acc;
}

double MeasureIndex::pi(double x) const {
    double u = arc_length(theta0_, x);
    if (full_) return u;
    auto it = std::upper_bound(start_.begin(), start_.end(), u);
    if (it == start_.begin()) return 0.0;
    std::size_t i = static_cast<std::size_t>(it - start_.begin()) - 1;
    return (cum_[i] + std::clamp(u - start_[i], 0.0, len_[i])) / total_;
}

int MeasureIndex::locate(double x, double tol) const {
    if (full_) return 0;
    if (start_.empty()) return -1;
    double u = arc_length(theta0_, x);
    auto hit = [&](std::size_t i, double v) { return v >= start_[i] - tol && v <= start_[i] + len_[i] + tol; };
    auto it = std::upper_bound(start_.begin(), start_.end(), u + tol);
    if (it != start_.begin()) {
        std::size_t i = static_cast<std::size_t>(it - start_.begin()) - 1;
        if (hit(i, u)) return static_cast<int>(i);
        if (i > 0 && hit(i - 1, u)) return static_cast<int>(i - 1);
    }
    if (u > 1.0 - tol && hit(0, u - 1.0)) return 0;
    if (u < tol && hit(start_.size() - 1, u + 1.0)) return static_cast<int>(start_.size() - 1);
    return -1;
}

namespace {

long long ipow(long long b, int e) {
    long long r = 1;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
}

// nearest angle of the form j / (D^a (D^p - 1)) or j / D^a, within tol
std::optional<Angle> snap_preperiodic(double x, int D, double tol) {
    std::optional<Angle> best;
    double best_d = tol;
    long long Da = 1;
    for (int a = 0; a <= 12 && Da <= 100000000LL; ++a, Da *= D) {
        long long Dp = 1;
        for (int p = 0; p <= 6; ++p, Dp *= D) {
            long long q = p == 0 ? Da : Da * (Dp - 1);
            if (q <= 0 || q > 100000000LL) break;
            double j = std::round(x * static_cast<double>(q));
            double dist = std::fabs(x * static_cast<double>(q) - j) / static_cast<double>(q);
            if (dist < best_d) {
                best_d = dist;
                best = Angle::rational(static_cast<long long>(j) % q, q);
            }
        }
    }
    return best;
}

double member_tol(const IntervalSystem& s) { return std::max(1e-12, 8.0 * s.endpoint_err); }

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

// position of x counterclockwise from theta0; exact angles are compared exactly when positions tie
double pos(const SemiconjTable& t, const Angle& x) { return arc_length(t.theta0.value(), x.value()); }

} // namespace

SemiconjTable build_pi_table(const std::vector<IntervalSystem>& ladder, int D, const Angle* theta0) {
    if (ladder.empty()) throw Error("InvalidArgument", "empty ladder");
    SemiconjTable t;
    t.D = D;
    t.k = ladder[0].k;
    t.d = ladder[0].d;
    const long long Dk = ipow(D, t.k);
    const IntervalSystem& deep = ladder.back();
    const double tol = member_tol(deep);

    if (theta0) {
        if (deep.arcs.locate(theta0->value(), tol) < 0 && !deep.arcs.full())
            throw Error("FixedAngleNotInI", "theta0 = " + theta0->str() + " is not in I");
        if (!same_angle(mul_mod1(*theta0, Dk), *theta0, 1e-12))
            throw Error("FixedAngleNotInI", "theta0 = " + theta0->str() + " is not fixed by D^k");
        t.theta0 = *theta0;
    } else {
        auto fixed = fixed_angles_in(deep, D, tol);
        if (fixed.empty()) throw Error("FixedAngleNotInI", "no fixed angle of D^k in I");
        t.theta0 = fixed.front();
    }

    for (std::size_t n = 0; n < ladder.size(); ++n) {
        PiLevel lv;
        lv.n = static_cast<int>(n);
        lv.sys = ladder[n];
        lv.index = MeasureIndex(ladder[n].arcs, t.theta0.value());
        t.levels.push_back(std::move(lv));
    }
    const MeasureIndex& deep_idx = t.levels.back().index;
    const int N = t.n_max();

    t.levels[0].C = {t.theta0};
    std::vector<Angle> fresh{t.theta0};
    for (int n = 1; n <= N; ++n) {
        std::vector<Angle> next_fresh;
        std::vector<Angle> Cn = t.levels[n - 1].C;
        for (const Angle& th : fresh) {
            const double parent_pi = t.levels[N - 1 >= 0 ? N - 1 : 0].index.pi(th.value());
            // is th the start of an arc of I_N (right end of a gap) or its end?
            int side = 0;
            int ai = deep_idx.locate(th.value(), tol);
            if (ai >= 0 && !deep_idx.full()) {
                double u = pos(t, th);
                if (std::fabs(u - deep_idx.start(ai)) <= tol || std::fabs(u - 1.0 - deep_idx.start(ai)) <= tol) side = +1;
                else if (std::fabs(u - deep_idx.start(ai) - deep_idx.length(ai)) <= tol) side = -1;
            }
            std::map<long long, std::vector<Angle>> groups;
            for (const Angle& c : preimages(th, static_cast<int>(Dk))) {
                if (deep_idx.locate(c.value(), tol) < 0) continue;
                double x = t.d * deep_idx.pi(c.value()) - parent_pi;
                long long g = ((std::llround(x) % t.d) + t.d) % t.d;
                if (std::fabs(x - std::round(x)) > 1e-6)
                    t.log.push_back("level " + std::to_string(n) + ": preimage " + c.str() + " off its d-adic slot by " +
                                    fmt(x - std::round(x)));
                groups[g].push_back(c);
            }
            if (static_cast<int>(groups.size()) != t.d)
                throw Error("LevelConstructionFailed", "level " + std::to_string(n) + ": " + std::to_string(groups.size()) +
                                                           " preimage classes of " + th.str() + ", expected " +
                                                           std::to_string(t.d));
            for (auto& [g, members] : groups) {
                const Angle* pick = &members.front();
                bool known = false;
                for (const Angle& m : members)
                    if (m == t.theta0) {
                        pick = &m;
                        known = true;
                    }
                if (!known && members.size() > 1) {
                    std::sort(members.begin(), members.end(),
                              [&](const Angle& a, const Angle& b) { return pos(t, a) < pos(t, b); });
                    // a pair of gap endpoints; right endpoints pull back to right endpoints
                    if (side > 0) pick = &members.back();
                    else pick = &members.front();
                    if (side == 0)
                        t.log.push_back("level " + std::to_string(n) + ": tie between " + members.front().str() + " and " +
                                        members.back().str() + ", kept the left one");
                }
                if (known) continue;
                Cn.push_back(*pick);
                next_fresh.push_back(*pick);
            }
        }
        std::sort(Cn.begin(), Cn.end(), [&](const Angle& a, const Angle& b) { return pos(t, a) < pos(t, b); });
        const long long dn = ipow(t.d, n);
        if (static_cast<long long>(Cn.size()) != dn)
            throw Error("LevelConstructionFailed", "level " + std::to_string(n) + ": |C_n| = " + std::to_string(Cn.size()));
        const IntervalSystem& sn = t.levels[n].sys;
        const double vtol = 1e-7 + 8.0 * sn.endpoint_err / std::max(t.levels[n].index.total(), 1e-300);
        for (long long i = 0; i < dn; ++i) {
            double v = t.levels[n].index.pi(Cn[i].value());
            double want = static_cast<double>(i) / static_cast<double>(dn);
            if (std::fabs(centered(v - want)) > vtol)
                throw Error("LevelConstructionFailed", "level " + std::to_string(n) + ": Pi_n(" + Cn[i].str() + ") = " +
                                                           fmt(v) + ", expected " + fmt(want));
        }
        t.levels[n].C = std::move(Cn);
        fresh = std::move(next_fresh);
    }
    t.resolution = 1.0 / static_cast<double>(ipow(t.d, N));
    return t;
}

SemiconjTable build_pi_table(const RayTracer& rt, const ComponentSeed& seed, int d, int n_max, const Angle* theta0) {
    SStar ss = estimate_s_star(rt, seed, d);
    IntervalSystem base = extract_interval_system(rt, seed, ss.degenerate ? 1.0 : 0.9 * ss.value, d);
    return build_pi_table(build_ladder(rt, base, n_max), rt.poly().degree(), theta0);
}

PiValue evaluate_pi(const SemiconjTable& t, const Angle& theta) {
    const PiLevel& deep = t.deepest();
    const long long dn = ipow(t.d, deep.n);
    if (theta.exact()) {
        double u = pos(t, theta);
        auto it = std::lower_bound(deep.C.begin(), deep.C.end(), u - 1e-12,
                                   [&](const Angle& c, double v) { return pos(t, c) < v; });
        for (int step = 0; step < 3 && it != deep.C.end(); ++step, ++it) {
            if (*it == theta) {
                long long i = it - deep.C.begin();
                return {Angle::rational(i, dn), 0.0};
            }
        }
    }
    if (deep.index.locate(theta.value(), member_tol(deep.sys) + theta.err()) < 0)
        throw Error("OutsideI", theta.str() + " is not in I at the table resolution");
    double err = t.resolution + 8.0 * deep.sys.endpoint_err / deep.index.total() + theta.err() / deep.index.total();
    return {Angle::approx(wrap01(deep.index.pi(theta.value())), err), err};
}

std::vector<FiberPoint> fiber(const SemiconjTable& t, const Angle& tau, int depth) {
    const int N = t.n_max();
    const int L = depth < 0 ? N : std::clamp(depth, 1, N);
    if (N < 1) throw Error("InvalidArgument", "table needs at least one level");
    const PiLevel& lvL = t.levels[L];
    const PiLevel& deep = t.deepest();
    const MeasureIndex& idx = deep.index;
    const long long dL = ipow(t.d, L);
    const double u = wrap01(tau.value());

    // bracket in C_L: fiber lies in ]C[i-1], C[i+1][ if tau = i/d^L, else in [C[i], C[i+1]]
    std::optional<Angle> center;
    long long i = static_cast<long long>(std::floor(u * static_cast<double>(dL) + 1e-12)) % dL;
    bool on_grid = false;
    if (tau.exact()) {
        BigInt scaled = tau.num() * BigInt(dL);
        on_grid = (scaled % tau.den()) == 0;
    } else {
        on_grid = std::fabs(u * static_cast<double>(dL) - std::round(u * static_cast<double>(dL))) < 1e-12;
        if (on_grid) i = std::llround(u * static_cast<double>(dL)) % dL;
    }
    Angle lo, hi;
    if (on_grid) {
        center = lvL.C[i];
        lo = lvL.C[(i + dL - 1) % dL];
        hi = lvL.C[(i + 1) % dL];
    } else {
        lo = lvL.C[i];
        hi = lvL.C[(i + 1) % dL];
    }
    const double wa = lo.value();
    double W = arc_length(wa, hi.value());
    if (W == 0.0) W = 1.0;

    // pieces of I_N inside the window, in window coordinates
    std::vector<std::pair<double, double>> pieces;
    for (std::size_t j = 0; j < idx.size(); ++j) {
        double a = wrap01(t.theta0.value() + idx.start(j));
        double p = arc_length(wa, a), len = idx.length(j);
        auto add = [&](double x0, double x1) {
            x0 = std::max(x0, 0.0);
            x1 = std::min(x1, W);
            if (x1 >= x0 && (x1 > x0 || (x0 > 0.0 && x0 < W))) pieces.push_back({x0, x1});
        };
        add(p, p + len);
        if (p + len > 1.0) add(0.0, p + len - 1.0);
    }
    std::sort(pieces.begin(), pieces.end());
    if (!on_grid && pieces.empty()) pieces.push_back({0.0, W});
    // drop the bracket points themselves when the window is open
    if (on_grid) {
        std::vector<std::pair<double, double>> kept;
        for (auto pc : pieces) {
            if (pc.first <= 0.0) pc.first = std::nextafter(0.0, 1.0);
            if (pc.second >= W) pc.second = std::nextafter(W, 0.0);
            if (pc.second >= pc.first) kept.push_back(pc);
        }
        pieces.swap(kept);
    }

    // clusters: split at gaps that already exist at level N/2
    const MeasureIndex& old = t.levels[N / 2].index;
    std::vector<std::vector<std::pair<double, double>>> clusters;
    for (const auto& pc : pieces) {
        if (!clusters.empty()) {
            double g0 = clusters.back().back().second, g1 = pc.first;
            bool old_gap = g1 > g0 && old.locate(wrap01(wa + 0.5 * (g0 + g1)), 0.0) < 0;
            if (!old_gap) {
                clusters.back().push_back(pc);
                continue;
            }
        }
        clusters.push_back({pc});
    }

    const double cpos = center ? arc_length(wa, center->value()) : -1.0;
    std::vector<FiberPoint> out;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        const auto& cl = clusters[c];
        double x0 = cl.front().first, x1 = cl.back().second;
        FiberPoint fp;
        double rep;
        if (center && cpos >= x0 && cpos <= x1) {
            fp.angle = *center;
            fp.err = 0.0;
            out.push_back(fp);
            continue;
        }
        bool after = center ? x0 > cpos : c + 1 == clusters.size() && clusters.size() > 1;
        bool before = center ? x1 < cpos : c == 0 && clusters.size() > 1;
        if (after) {
            rep = x0;
            fp.err = cl.front().second - cl.front().first;
        } else if (before) {
            rep = x1;
            fp.err = cl.back().second - cl.back().first;
        } else {
            rep = 0.5 * (x0 + x1);
            fp.err = 0.5 * (x1 - x0);
        }
        double maxgap = 0.0;
        for (std::size_t j = 1; j < cl.size(); ++j) maxgap = std::max(maxgap, cl[j].first - cl[j - 1].second);
        fp.possibly_split = x1 > x0 && maxgap / (x1 - x0) > 0.5;
        fp.err += 8.0 * deep.sys.endpoint_err;
        Angle raw = Angle::approx(wrap01(wa + rep), fp.err);
        // keep the cluster only if its limit Pi-range can still reach tau
        double lo_pi = centered(idx.pi(wrap01(wa + x0)) - u), hi_pi = centered(idx.pi(wrap01(wa + x1)) - u);
        auto slack = [&](double off) {
            double x = wrap01(wa + off);
            return 2.0 * std::fabs(centered(idx.pi(x) - t.levels[N - 1].index.pi(x))) + 1e-12;
        };
        if (lo_pi - slack(x0) > 0.0 || hi_pi + slack(x1) < 0.0) continue;
        auto snapped = snap_preperiodic(raw.value(), t.D, 1e-11);
        fp.angle = snapped ? *snapped : raw;
        out.push_back(fp);
    }
    std::sort(out.begin(), out.end(), [](const FiberPoint& a, const FiberPoint& b) { return a.angle.value() < b.angle.value(); });
    return out;
}

std::string to_string(GapKind k) { return k == GapKind::major ? "major" : "minor"; }
std::string to_string(Tautness t) { return t == Tautness::taut ? "taut" : "loose"; }
std::string to_string(OrbitClass c) {
    switch (c) {
    case OrbitClass::to_taut: return "to_taut";
    case OrbitClass::periodic: return "periodic";
    case OrbitClass::preperiodic_to_periodic: return "preperiodic_to_periodic";
    case OrbitClass::unresolved: return "unresolved";
    }
    return "unresolved";
}

namespace {

struct RawGap {
    double a, b; // at the deepest level
    double mid;
    int first_level;
};

std::vector<RawGap> deepest_gaps(const SemiconjTable& t) {
    const MeasureIndex& idx = t.deepest().index;
    std::vector<RawGap> out;
    const double th0 = t.theta0.value();
    const std::size_t n = idx.size();
    for (std::size_t j = 0; j < n; ++j) {
        double a = idx.start(j) + idx.length(j);
        double b = j + 1 < n ? idx.start(j + 1) : 1.0 + idx.start(0);
        if (b - a <= 1e-15) continue;
        RawGap g{wrap01(th0 + a), wrap01(th0 + b), wrap01(th0 + 0.5 * (a + b)), t.n_max()};
        for (int l = t.n_max(); l >= 0; --l) {
            if (t.levels[l].index.locate(g.mid, 0.0) < 0) g.first_level = l;
            else break;
        }
        out.push_back(g);
    }
    return out;
}

// endpoints of the gap of I_l containing x
std::pair<double, double> gap_at(const MeasureIndex& idx, double theta0, double x) {
    const double u = arc_length(theta0, x);
    const std::size_t n = idx.size();
    std::size_t j = 0;
    while (j < n && idx.start(j) <= u) ++j;
    // gap between piece j-1 and piece j
    double a = j == 0 ? idx.start(n - 1) + idx.length(n - 1) - 1.0 : idx.start(j - 1) + idx.length(j - 1);
    double b = j == n ? 1.0 + idx.start(0) : idx.start(j);
    return {wrap01(theta0 + a), wrap01(theta0 + b)};
}

double aitken(double x0, double x1, double x2) {
    double d1 = x1 - x0, d2 = x2 - x1, den = d2 - d1;
    if (std::fabs(d2) < 1e-15 || std::fabs(den) < 1e-15) return x2;
    double r = d2 / d1;
    if (!(r > 0.0 && r < 1.0)) return x2;
    return x2 - d2 * d2 / den;
}

Angle snap_endpoint(double x, int D) {
    auto s = snap_preperiodic(x, D, 1e-11);
    return s ? *s : Angle::approx(x, 1e-9);
}

} // namespace

GapReport classify_gaps(const SemiconjTable& t, int orbit_depth) {
    GapReport rep;
    if (t.deepest().sys.arcs.full()) {
        rep.full_circle = true;
        return rep;
    }
    const int N = t.n_max();
    const long long Dk = ipow(t.D, t.k);
    const double th0 = t.theta0.value();
    std::vector<RawGap> raw = deepest_gaps(t);

    struct Tracked {
        double a, b, len;
        RawGap raw;
    };
    std::vector<Tracked> tr;
    for (const auto& g : raw) {
        if (g.first_level > N - 2 && N >= 2) continue; // too young to extrapolate
        double a0, a1, a2, b0, b1, b2;
        std::tie(a0, b0) = gap_at(t.levels[std::max(N - 2, 0)].index, th0, g.mid);
        std::tie(a1, b1) = gap_at(t.levels[std::max(N - 1, 0)].index, th0, g.mid);
        std::tie(a2, b2) = gap_at(t.levels[N].index, th0, g.mid);
        // unwrap around the deepest endpoints
        auto un = [](double x, double ref) { return ref + centered(x - ref); };
        double ra = un(aitken(un(a0, a2), un(a1, a2), a2), a2);
        double rb = un(aitken(un(b0, b2), un(b1, b2), b2), b2);
        tr.push_back({wrap01(ra), wrap01(rb), arc_length(wrap01(ra), wrap01(rb)), g});
    }

    const IntervalSystem& deep = t.deepest().sys;
    for (const auto& g : tr) {
        GapRecord r;
        r.a = snap_endpoint(g.a, t.D);
        r.b = snap_endpoint(g.b, t.D);
        r.length = (r.a.exact() && r.b.exact()) ? arc_length(r.a, r.b).value() : g.len;
        double x = static_cast<double>(Dk) * r.length;
        long long m = std::llround(x);
        if (m >= 1 && std::fabs(x - static_cast<double>(m)) < 1e-6) {
            r.tautness = Tautness::taut;
            r.multiplicity = static_cast<int>(m);
        } else {
            r.multiplicity = static_cast<int>(std::floor(x));
        }
        r.kind = r.multiplicity >= 1 ? GapKind::major : GapKind::minor;
        r.first_level = g.raw.first_level;
        for (const auto& dg : deep.gaps)
            if (circle_dist(dg.a.value(), g.raw.a) < 1e-9 && circle_dist(dg.b.value(), g.raw.b) < 1e-9) r.crash_s = dg.crash_s;
        rep.gaps.push_back(r);
    }

    // gap orbits under the induced gap map
    auto image_of = [&](std::size_t i) -> int {
        const auto& r = rep.gaps[i];
        double ia = mul_mod1(r.a, Dk).value(), ib = mul_mod1(r.b, Dk).value();
        for (std::size_t j = 0; j < rep.gaps.size(); ++j)
            if (circle_dist(rep.gaps[j].a.value(), ia) < 1e-6 && circle_dist(rep.gaps[j].b.value(), ib) < 1e-6)
                return static_cast<int>(j);
        return -1;
    };
    for (std::size_t i = 0; i < rep.gaps.size(); ++i) {
        std::vector<int> path{static_cast<int>(i)};
        OrbitClass cls = OrbitClass::unresolved;
        int steps = orbit_depth;
        for (int s = 0; s <= orbit_depth; ++s) {
            int cur = path.back();
            if (rep.gaps[cur].tautness == Tautness::taut) {
                cls = OrbitClass::to_taut;
                steps = s;
                break;
            }
            if (s == orbit_depth) break;
            int nx = image_of(cur);
            if (nx < 0) break;
            auto seen = std::find(path.begin(), path.end(), nx);
            if (seen != path.end()) {
                cls = seen == path.begin() ? OrbitClass::periodic : OrbitClass::preperiodic_to_periodic;
                steps = static_cast<int>(seen - path.begin());
                break;
            }
            path.push_back(nx);
        }
        rep.gaps[i].orbit_class = cls;
        rep.gaps[i].orbit_steps = steps;
        if (cls == OrbitClass::unresolved) ++rep.unresolved;
        rep.multiplicity_total += rep.gaps[i].multiplicity;
    }

    // gaps of the maximal Cantor set: runs of gaps of I separated only by massless pieces
    std::sort(rep.gaps.begin(), rep.gaps.end(), [&](const GapRecord& x, const GapRecord& y) {
        return arc_length(th0, x.a.value()) < arc_length(th0, y.a.value());
    });
    const std::size_t G = rep.gaps.size();
    if (G == 0) return rep;
    const MeasureIndex& idxN = t.levels[N].index;
    const MeasureIndex& idxM = t.levels[std::max(N - 3, 0)].index;
    auto mass = [&](const MeasureIndex& idx, double a, double b) {
        double m = idx.pi(b) - idx.pi(a);
        return m < 0 ? m + 1.0 : m;
    };
    std::vector<bool> joined(G, false); // joined[i]: gap i and i+1 lie in the same fiber
    std::vector<double> conf(G, 0.0);
    for (std::size_t i = 0; i < G; ++i) {
        const auto& g = rep.gaps[i];
        const auto& h = rep.gaps[(i + 1) % G];
        if (G == 1) break;
        double mN = mass(idxN, g.b.value(), h.a.value());
        double mM = mass(idxM, g.b.value(), h.a.value());
        if (mN < 8.0 * t.resolution && mN < 0.5 * mM + 1e-15) {
            joined[i] = true;
            conf[i] = 1.0 - (mM > 0 ? mN / mM : 0.0);
        }
    }
    std::size_t startg = 0;
    while (startg < G && joined[(startg + G - 1) % G]) ++startg;
    if (startg == G) startg = 0;
    for (std::size_t c = 0; c < G;) {
        std::size_t i = (startg + c) % G;
        CantorGap cg;
        cg.a = rep.gaps[i].a;
        double confidence = 1.0;
        std::size_t j = i;
        ++c;
        while (joined[j] && c < G) {
            const auto& nxt = rep.gaps[(j + 1) % G];
            double mid = rep.gaps[j].b.value() + 0.5 * arc_length(rep.gaps[j].b.value(), nxt.a.value());
            cg.isolated.push_back(snap_endpoint(wrap01(mid), t.D));
            confidence = std::min(confidence, conf[j]);
            j = (j + 1) % G;
            ++c;
        }
        cg.b = rep.gaps[j].b;
        double len = arc_length(cg.a.value(), cg.b.value());
        if (len == 0.0) len = 1.0;
        double x = static_cast<double>(Dk) * len;
        cg.multiplicity = static_cast<int>(std::floor(x + 1e-6));
        cg.confidence = cg.isolated.empty() ? 1.0 : confidence;
        rep.cantor_gaps.push_back(cg);
    }
    return rep;
}

DimensionEstimate box_dimension_estimate(const SemiconjTable& t) {
    DimensionEstimate e;
    e.ceiling = std::log(static_cast<double>(t.d)) / (t.k * std::log(static_cast<double>(t.D)));
    if (t.deepest().sys.arcs.full()) {
        e.estimate = 1.0;
        e.applicable = false;
        return e;
    }
    std::vector<double> xs, ys;
    for (int n = std::min(2, t.n_max()); n <= t.n_max(); ++n) {
        const auto& arcs = t.levels[n].sys.arcs.arcs();
        double maxlen = 0.0;
        for (const auto& a : arcs) maxlen = std::max(maxlen, a.length());
        if (arcs.empty() || maxlen <= 0) continue;
        xs.push_back(std::log(1.0 / maxlen));
        ys.push_back(std::log(static_cast<double>(arcs.size())));
    }
    if (xs.size() < 2) {
        e.applicable = false;
        return e;
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= xs.size();
    my /= ys.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    e.estimate = sxx > 0 ? sxy / sxx : 0.0;
    return e;
}

ValenceAudit valence_audit(const SemiconjTable& t, int depth) {
    ValenceAudit a;
    a.strict = t.k == 1;
    a.bound = t.D - t.d + (a.strict ? 1 : 2);
    depth = std::clamp(depth, 1, t.n_max());
    const long long dn = ipow(t.d, depth);
    for (long long i = 0; i < dn; ++i) {
        Angle tau = Angle::rational(i, dn);
        auto f = fiber(t, tau, depth);
        for (const auto& p : f) a.possibly_split += p.possibly_split ? 1 : 0;
        if (static_cast<int>(f.size()) > a.max_cardinality) {
            a.max_cardinality = static_cast<int>(f.size());
            a.worst = tau;
        }
    }
    a.ok = a.max_cardinality <= a.bound;
    return a;
}

int uniqueness_check(const SemiconjTable& a, const SemiconjTable& b) {
    if (a.D != b.D || a.k != b.k || a.d != b.d) throw Error("NoRotationMatches", "tables describe different maps");
    const int rot = std::max(1, a.d - 1);
    const int levels = std::min(a.n_max(), b.n_max());
    std::vector<Angle> pts = a.levels[levels].C;
    for (const auto& c : b.levels[levels].C) pts.push_back(c);
    for (int j = 0; j < rot; ++j) {
        bool ok = true;
        for (const auto& th : pts) {
            PiValue va = evaluate_pi(a, th), vb = evaluate_pi(b, th);
            double diff = centered(va.value.value() - vb.value.value() - static_cast<double>(j) / rot);
            if (std::fabs(diff) > va.err + vb.err + 1e-9) {
                ok = false;
                break;
            }
        }
        if (ok) return j;
    }
    throw Error("NoRotationMatches", "no rotation by j/(d-1) relates the two tables");
}

} // namespace rayatlas
