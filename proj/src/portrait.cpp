#include "rayatlas/portrait.hpp"
#include "rayatlas/error.hpp"
#include "rayatlas/semiconj.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

namespace rayatlas {

std::string to_string(SectorKind k) {
    switch (k) {
    case SectorKind::essential: return "essential";
    case SectorKind::ghost: return "ghost";
    default: return "unknown";
    }
}

namespace {

Rational q(const Angle& a) {
    if (!a.exact()) throw Error("InconsistentPortrait", "angle " + a.str() + " is not exact");
    return Rational(a.num(), a.den());
}

// x in the open counterclockwise arc ]a,b[; a == b means the circle minus a
bool inside(const Rational& x, const Rational& a, const Rational& b) {
    if (a < b) return a < x && x < b;
    if (a > b) return x > a || x < b;
    return x != a;
}

Rational ccw_length(const Rational& a, const Rational& b) {
    Rational l = b - a;
    if (l <= 0) l += 1;
    return l;
}

std::string fmtq(const Rational& r) {
    std::ostringstream os;
    os << r;
    return os.str();
}

int index_of(const std::vector<Angle>& v, const Angle& x) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] == x) return static_cast<int>(i);
    return -1;
}

} // namespace

OrbitPortrait build_portrait(int D, int k, std::vector<std::vector<Angle>> lambda,
                             std::vector<std::vector<Side>> turn_sides) {
    if (D < 2) throw Error("InvalidArgument", "D must be >= 2");
    if (k < 1) throw Error("InvalidArgument", "k must be >= 1");
    const int L = static_cast<int>(lambda.size());
    if (L == 0) throw Error("InconsistentPortrait", "no Lambda sets");
    if (L % k != 0) throw Error("InconsistentPortrait", "orbit length " + std::to_string(L) + " is not a multiple of k");
    if (turn_sides.empty())
        for (const auto& s : lambda) turn_sides.emplace_back(s.size(), Side::smooth);
    if (turn_sides.size() != lambda.size()) throw Error("InconsistentPortrait", "turn_sides does not match lambda_sets");

    OrbitPortrait p;
    p.D = D;
    p.k = k;
    p.orbit_length = L;
    p.ell = L / k;

    std::vector<Rational> all;
    for (int i = 0; i < L; ++i) {
        if (lambda[i].empty()) throw Error("InconsistentPortrait", "empty Lambda set at z_" + std::to_string(i));
        if (turn_sides[i].size() != lambda[i].size())
            throw Error("InconsistentPortrait", "turn_sides size mismatch at z_" + std::to_string(i));
        std::vector<std::pair<Rational, std::size_t>> order;
        for (std::size_t j = 0; j < lambda[i].size(); ++j) order.push_back({q(lambda[i][j]), j});
        std::sort(order.begin(), order.end());
        std::vector<Angle> sorted;
        std::vector<Side> sides;
        for (const auto& [v, j] : order) {
            sorted.push_back(lambda[i][j]);
            sides.push_back(turn_sides[i][j]);
            all.push_back(v);
        }
        p.lambda.push_back(std::move(sorted));
        p.turn_sides.push_back(std::move(sides));
    }
    std::sort(all.begin(), all.end());
    if (std::adjacent_find(all.begin(), all.end()) != all.end())
        throw Error("InconsistentPortrait", "an angle lands at two orbit points");

    for (int i = 0; i < L; ++i) {
        const auto& next = p.lambda[(i + 1) % L];
        if (next.size() != p.lambda[i].size())
            throw Error("InconsistentPortrait", "Lambda(z_" + std::to_string(i) + ") and its image differ in size");
        std::vector<Angle> img;
        for (const Angle& t : p.lambda[i]) {
            Angle u = mul_mod1(t, D);
            if (index_of(next, u) < 0)
                throw Error("InconsistentPortrait", t.str() + " maps to " + u.str() + ", not in Lambda(z_" +
                                                        std::to_string((i + 1) % L) + ")");
            if (index_of(img, u) >= 0) throw Error("InconsistentPortrait", "two angles of Lambda(z_" + std::to_string(i) + ") share an image");
            img.push_back(u);
        }
    }

    // first return map on Lambda(z_0)
    const auto& l0 = p.lambda[0];
    const int m = static_cast<int>(l0.size());
    int shift = -1;
    for (int j = 0; j < m; ++j) {
        Angle t = l0[j];
        for (int r = 0; r < L; ++r) t = mul_mod1(t, D);
        int idx = index_of(l0, t);
        int s = ((idx - j) % m + m) % m;
        if (shift < 0) shift = s;
        else if (s != shift) throw Error("InconsistentPortrait", "first return map does not preserve cyclic order");
    }
    int g = std::gcd(shift, m);
    p.rot_p = shift / g;
    p.rot_q = m / g;
    p.ray_period = L * p.rot_q;

    std::vector<Angle> seen;
    for (const auto& set : p.lambda)
        for (const Angle& t : set) {
            if (index_of(seen, t) >= 0) continue;
            std::vector<Angle> cyc{t};
            Angle u = mul_mod1(t, D);
            while (!(u == t)) {
                if (static_cast<int>(cyc.size()) > p.ray_period)
                    throw Error("InconsistentPortrait", t.str() + " is not periodic with the orbit");
                cyc.push_back(u);
                u = mul_mod1(u, D);
            }
            if (static_cast<int>(cyc.size()) != p.ray_period)
                throw Error("InconsistentPortrait", t.str() + " has period " + std::to_string(cyc.size()) + ", expected " +
                                                        std::to_string(p.ray_period));
            for (const Angle& c : cyc) seen.push_back(c);
            p.cycles.push_back(std::move(cyc));
        }
    return p;
}

int SectorSet::find(int base, const Angle& a, const Angle& b) const {
    for (std::size_t i = 0; i < sectors.size(); ++i)
        if (sectors[i].base == base && sectors[i].a == a && sectors[i].b == b) return static_cast<int>(i);
    return -1;
}

int SectorSet::count(SectorKind k) const {
    return static_cast<int>(std::count_if(sectors.begin(), sectors.end(), [&](const Sector& s) { return s.kind == k; }));
}

int SectorSet::minimal_count() const {
    return static_cast<int>(std::count_if(sectors.begin(), sectors.end(), [](const Sector& s) { return s.minimal; }));
}

SectorSet sectors_of(const OrbitPortrait& p, const std::vector<SectorRef>& essential) {
    SectorSet out;
    const int L = p.orbit_length;
    for (int i = 0; i < L; ++i) {
        const auto& set = p.lambda[i];
        const std::size_t m = set.size();
        for (std::size_t j = 0; j < m; ++j) {
            Sector s;
            s.base = i;
            s.a = set[j];
            s.b = set[(j + 1) % m];
            Rational a = q(s.a), b = q(s.b);
            s.length = m == 1 ? Rational(1) : ccw_length(a, b);
            Rational dl = s.length * p.D;
            s.weight = static_cast<int>(BigInt(boost::multiprecision::numerator(dl) / boost::multiprecision::denominator(dl)));
            for (int o = 0; o < L; ++o)
                if (o != i && inside(q(p.lambda[o][0]), a, b)) s.contains.push_back(o);
            s.a_attachable = p.turn_sides[i][j] == Side::minus;
            s.b_attachable = p.turn_sides[i][(j + 1) % m] == Side::plus;
            out.sectors.push_back(std::move(s));
        }
    }
    for (auto& s : out.sectors) {
        s.image = out.find((s.base + 1) % L, mul_mod1(s.a, p.D), mul_mod1(s.b, p.D));
        if (s.image < 0)
            throw Error("InconsistentPortrait", "sector ]" + s.a.str() + "," + s.b.str() + "[ has no image sector");
    }
    for (std::size_t i = 0; i < out.sectors.size(); ++i) out.sectors[out.sectors[i].image].preimage = static_cast<int>(i);

    for (std::size_t i = 0; i < out.sectors.size(); ++i) {
        if (out.sectors[i].cycle >= 0) continue;
        std::vector<int> cyc;
        int c = static_cast<int>(i);
        while (out.sectors[c].cycle < 0) {
            out.sectors[c].cycle = static_cast<int>(out.cycles.size());
            cyc.push_back(c);
            c = out.sectors[c].image;
        }
        out.cycles.push_back(std::move(cyc));
    }

    if (!essential.empty()) {
        std::vector<bool> ess(out.cycles.size(), false);
        for (const auto& r : essential) {
            int idx = out.find(r.base, r.a, r.b);
            if (idx < 0)
                throw Error("InvalidArgument", "S(z_" + std::to_string(r.base) + "," + r.a.str() + "," + r.b.str() +
                                                   ") is not a sector of the portrait");
            ess[out.sectors[idx].cycle] = true;
        }
        for (auto& s : out.sectors) {
            s.kind = ess[s.cycle] ? SectorKind::essential : SectorKind::ghost;
            s.minimal = s.kind == SectorKind::ghost && s.contains.empty();
        }
        for (std::size_t c = 0; c < out.cycles.size(); ++c) (ess[c] ? out.essential_cycles : out.ghost_cycles)++;
        for (int i = 0; i < L; ++i) {
            bool any = false;
            for (const auto& s : out.sectors) any = any || (s.base == i && s.kind == SectorKind::essential);
            if (!any) out.notes.push_back("no essential sector at z_" + std::to_string(i));
        }
    } else {
        out.notes.push_back("sector kinds not classified");
    }
    return out;
}

SectorSet sectors_of(const OrbitPortrait& p, const SemiconjTable& t) {
    const auto& deep = t.deepest();
    std::vector<SectorRef> ess;
    const auto& set = p.lambda[0];
    const std::size_t m = set.size();
    std::vector<std::string> notes;
    for (std::size_t j = 0; j < m; ++j) {
        const Angle& a = set[j];
        const Angle& b = set[(j + 1) % m];
        double mass = 0.0;
        if (deep.sys.arcs.full()) {
            mass = m == 1 ? 1.0 : arc_length(a.value(), b.value());
        } else {
            for (const auto& arc : deep.sys.arcs.arcs()) {
                // overlap of the closed arc with ]a,b[, measured from a
                double lo = arc_length(a.value(), arc.a.value());
                double len = arc.length();
                double span = m == 1 ? 1.0 : arc_length(a.value(), b.value());
                double hi = lo + len;
                mass += std::max(0.0, std::min(hi, span) - std::min(lo, span));
                if (hi > 1.0) mass += std::max(0.0, std::min(hi - 1.0, span));
            }
            mass /= deep.index.total();
        }
        if (mass > t.resolution) ess.push_back({0, a, b});
        else if (mass > 0.25 * t.resolution)
            notes.push_back("sector ]" + a.str() + "," + b.str() + "[ carries Pi-mass " + std::to_string(mass) +
                            ", below resolution; taken as ghost");
    }
    SectorSet s = sectors_of(p, ess);
    s.notes.insert(s.notes.end(), notes.begin(), notes.end());
    return s;
}

std::vector<int> fiber_sizes(const SectorSet& s, int base) {
    std::vector<const Sector*> at;
    for (const auto& x : s.sectors)
        if (x.base == base) at.push_back(&x);
    std::vector<int> cuts;
    for (std::size_t j = 0; j < at.size(); ++j) {
        if (at[j]->kind == SectorKind::unknown) return {};
        if (at[j]->kind == SectorKind::essential) cuts.push_back(static_cast<int>(j));
    }
    if (cuts.empty()) return {};
    const int m = static_cast<int>(at.size());
    std::vector<int> out;
    for (std::size_t c = 0; c < cuts.size(); ++c) {
        int next = cuts[(c + 1) % cuts.size()];
        int n = ((next - cuts[c]) % m + m) % m;
        out.push_back(n == 0 ? m : n);
    }
    return out;
}

int estimate_n1(const SectorSet& s) {
    int n = 0;
    for (const auto& x : s.sectors)
        if (x.minimal && x.preimage >= 0) n += s.sectors[x.preimage].weight;
    return n;
}

bool unlinked(const OrbitPortrait& p) {
    for (std::size_t i = 0; i < p.lambda.size(); ++i) {
        const auto& A = p.lambda[i];
        for (std::size_t j = 0; j < p.lambda.size(); ++j) {
            if (i == j) continue;
            // every angle of B sits in the same complementary arc of A
            int slot = -1;
            for (const Angle& x : p.lambda[j]) {
                Rational v = q(x);
                int here = -1;
                for (std::size_t a = 0; a < A.size(); ++a)
                    if (A.size() == 1 || inside(v, q(A[a]), q(A[(a + 1) % A.size()]))) {
                        here = static_cast<int>(a);
                        break;
                    }
                if (slot < 0) slot = here;
                else if (here != slot) return false;
            }
        }
    }
    return true;
}

AuditReport audit_counts(const OrbitPortrait& p, const SectorSet& s, int d, int N1, int N2,
                         const std::vector<PreperiodicCount>& preperiodic) {
    AuditReport r;
    auto add = [&](std::string name, bool pass, std::string lhs, std::string rhs) {
        r.lines.push_back({std::move(name), pass, std::move(lhs), std::move(rhs)});
        r.ok = r.ok && pass;
    };
    const bool strict = p.k == 1;

    bool weights = true;
    std::string bad;
    for (const auto& x : s.sectors) {
        if (x.length == 1) continue;
        Rational lhs = s.sectors[x.image].length;
        Rational rhs = x.length * p.D - x.weight;
        if (lhs != rhs) {
            weights = false;
            bad = "S(z_" + std::to_string(x.base) + "," + x.a.str() + "," + x.b.str() + "): " + fmtq(lhs) + " vs " + fmtq(rhs);
        }
    }
    add("sigma length identity |sigma(S)| = D|S| - w(S)", weights, weights ? "all sectors" : bad, "exact");

    bool classified = s.count(SectorKind::unknown) == 0;
    if (classified) {
        bool kinds = true;
        for (const auto& x : s.sectors) kinds = kinds && x.kind == s.sectors[x.image].kind;
        add("sigma preserves sector kind", kinds, kinds ? "yes" : "no", "yes");
    }

    for (std::size_t c = 0; c < s.cycles.size(); ++c) {
        const auto& cyc = s.cycles[c];
        int shortest = cyc[0];
        for (int i : cyc)
            if (s.sectors[i].length < s.sectors[shortest].length) shortest = i;
        const Sector& sh = s.sectors[shortest];
        if (sh.length == 1) continue;
        int w = s.sectors[sh.preimage].weight;
        add("shortest sector of cycle " + std::to_string(c) + " has a critical value attached", w >= 1,
            "S(z_" + std::to_string(sh.base) + "," + sh.a.str() + "," + sh.b.str() + "), preimage weight " + std::to_string(w),
            ">= 1");
    }

    bool ul = unlinked(p);
    add("rays of distinct orbit points are unlinked", ul, ul ? "yes" : "no", "yes");

    add("N1 + N2 <= D - d", N1 + N2 <= p.D - d, std::to_string(N1 + N2), std::to_string(p.D - d));

    if (classified) {
        const int M = s.ghost_cycles;
        if (strict) add("ghost cycles <= N1 (k = 1)", M <= N1, std::to_string(M), std::to_string(N1));
        else add("ghost cycles <= N1 + 1", M <= N1 + 1, std::to_string(M), std::to_string(N1 + 1));

        auto sizes = fiber_sizes(s, 0);
        int nu = sizes.empty() ? 0 : *std::max_element(sizes.begin(), sizes.end());
        if (strict) add("fiber size <= N1 + 1 (k = 1)", nu <= N1 + 1, std::to_string(nu), std::to_string(N1 + 1));
        else add("fiber size <= N1 + 2", nu <= N1 + 2, std::to_string(nu), std::to_string(N1 + 2));
        int bound = strict ? p.D - d + 1 : p.D - d + 2;
        add(strict ? "fiber size <= D - d + 1 (k = 1)" : "fiber size <= D - d + 2", nu <= bound, std::to_string(nu),
            std::to_string(bound));
    }

    for (std::size_t i = 0; i < preperiodic.size(); ++i) {
        const auto& pc = preperiodic[i];
        add("preperiodic gap " + std::to_string(i) + ": #([a,b]∩I) <= #([a_n,b_n]∩I) + N2",
            pc.in_gap <= pc.in_image + N2, std::to_string(pc.in_gap), std::to_string(pc.in_image + N2));
    }
    return r;
}

} // namespace rayatlas
