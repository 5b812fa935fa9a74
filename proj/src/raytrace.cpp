#include "rayatlas/raytrace.hpp"
#include "rayatlas/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace rayatlas {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

// Precritical point: Newton on P^m(omega) = c from z.
// Falls back to z when Newton leaves the neighbourhood or overflows (deep levels).
cplx locate_precritical(const Polynomial& p, cplx z, cplx c, int m) {
    if (m == 0) return c;
    cplx w = z;
    bool done = false;
    for (int it = 0; it < 60 && !done; ++it) {
        auto [v, dv] = iterate_deriv(p, w, m);
        if (dv == 0.0 || !std::isfinite(std::abs(dv))) break;
        cplx step = (v - c) / dv;
        w -= step;
        done = std::abs(step) < 1e-15 * (1.0 + std::abs(w));
    }
    if (!std::isfinite(std::abs(w)) || std::abs(w - z) > 1e-2) return z;
    if (!done) {
        cplx v = iterate_deriv(p, w, m).first;
        if (!(std::abs(v - c) < 1e-8 * (1.0 + std::abs(c)))) return z;
    }
    return w;
}

} // namespace

std::string to_string(Side s) {
    switch (s) {
    case Side::smooth: return "smooth";
    case Side::plus: return "plus";
    case Side::minus: return "minus";
    }
    return "smooth";
}

std::string to_string(Turn t) { return t == Turn::right ? "right" : "left"; }

Side parse_side(const std::string& s) {
    if (s == "smooth" || s == "0") return Side::smooth;
    if (s == "plus" || s == "+") return Side::plus;
    if (s == "minus" || s == "-") return Side::minus;
    throw Error("InvalidArgument", "unknown side '" + s + "'");
}

struct RayTracer::Target {
    Angle base;
    double eps;
    int D;
    std::vector<Angle> bn;
    std::vector<double> en;

    double at(int n) {
        while (static_cast<int>(bn.size()) <= n) {
            if (bn.empty()) {
                bn.push_back(base);
                en.push_back(std::fabs(eps));
            } else {
                bn.push_back(mul_mod1(bn.back(), D));
                en.push_back(wrap01(D * en.back()));
            }
        }
        return wrap01(bn[n].value() + (eps < 0 ? -en[n] : en[n]));
    }
};

struct RayTracer::Segment {
    std::vector<RaySample> samples;
    std::vector<cplx> lds;
    bool ok = true;
    double s_fail = 0.0;
    cplx z_fail;
};

RayTracer::RayTracer(Polynomial p) : p_(std::move(p)) {
    crit_ = critical_points(p_);
    s_max_ = rayatlas::s_max(crit_);
    s_hi_ = std::log(p_.bottcher_radius()) + 0.5;
    rho_.assign(crit_.size(), 1.0);
    for (std::size_t i = 0; i < crit_.size(); ++i) {
        cplx c = crit_[i].location;
        std::vector<cplx> q = p_.coeffs();
        q[0] -= eval(p_, c);
        auto roots = polynomial_roots(q, 1e-15);
        double best = std::numeric_limits<double>::infinity();
        for (cplx r : roots) {
            double d = std::abs(r - c);
            if (d > 1e-4 * (1.0 + std::abs(c))) best = std::min(best, d);
        }
        if (!std::isfinite(best)) {
            // P(z) - P(c) has no other root: fall back to the spacing of critical points
            best = 1.0;
            for (std::size_t j = 0; j < crit_.size(); ++j)
                if (j != i) best = std::min(best, std::abs(crit_[j].location - c));
        }
        rho_[i] = best;
    }
}

int RayTracer::level_for(double s) const {
    const int D = p_.degree();
    int n = 0;
    double v = s;
    while (v < s_hi_) {
        v *= D;
        ++n;
        if (n > 2000) throw Error("StepCollapse", "potential too small");
    }
    return n;
}

bool RayTracer::newton(Target& tgt, double s, cplx& z, cplx& ld) const {
    const int D = p_.degree();
    const int n0 = level_for(s);
    for (int it = 0; it < 60; ++it) {
        auto [w, dq] = iterate_deriv(p_, z, n0);
        int n = n0;
        while (finite(w) && std::abs(w) < p_.bottcher_radius() && n < n0 + 6) {
            auto [v, dv] = eval_deriv(p_, w);
            dq *= dv;
            w = v;
            ++n;
        }
        if (!finite(w) || !finite(dq) || std::abs(w) < p_.bottcher_radius()) return false;
        cplx dphi;
        cplx phi = log_bottcher_far(p_, w, &dphi);
        const double Dn = std::pow(static_cast<double>(D), n);
        const double target_re = Dn * s;
        cplx F(phi.real() - target_re, kTwoPi * centered(phi.imag() / kTwoPi - tgt.at(n)));
        cplx J = dphi * dq;
        if (J == 0.0 || !finite(J)) return false;
        ld = J / Dn;
        cplx dz = -F / J;
        z += dz;
        if (std::abs(F) < 4e-15 * (target_re + kTwoPi) || std::abs(dz) < 1e-15 * (1.0 + std::abs(z))) return true;
    }
    return false;
}

bool RayTracer::solve_point(const Angle& base, double eps, double s, cplx guess, cplx& z, cplx& ld) const {
    Target tgt{base, eps, p_.degree(), {}, {}};
    z = guess;
    return newton(tgt, s, z, ld);
}

std::vector<double> RayTracer::make_grid(double s_stop, const std::vector<double>& extra, int steps) const {
    const int D = p_.degree();
    const int K = static_cast<int>(std::ceil(steps * std::log(s_hi_ / s_stop) / std::log(static_cast<double>(D))));
    std::vector<double> g;
    g.reserve(K + 1 + extra.size());
    for (int k = 0; k <= K; ++k) g.push_back(s_stop * std::pow(static_cast<double>(D), static_cast<double>(K - k) / steps));
    g.back() = s_stop;
    for (double e : extra) {
        if (!(e > s_stop && e < g.front())) continue;
        auto it = std::min_element(g.begin(), g.end(), [&](double a, double b) { return std::fabs(a - e) < std::fabs(b - e); });
        if (std::fabs(*it - e) < 1e-9 * e) {
            if (it != g.end() - 1) *it = e;
        } else {
            g.push_back(e);
        }
    }
    std::sort(g.begin(), g.end(), std::greater<>());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

RayTracer::Segment RayTracer::continue_line(Target& tgt, const std::vector<double>& grid, cplx z0, cplx ld0) const {
    Segment seg;
    seg.samples.push_back({grid[0], z0});
    seg.lds.push_back(ld0);
    cplx z_cur = z0, ld_cur = ld0;
    double s_cur = grid[0];
    double h = grid.size() > 1 ? grid[1] - grid[0] : 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double s_target = grid[i];
        h = std::max(h, s_target - s_cur);
        while (s_cur > s_target) {
            double s_try = std::max(s_target, s_cur + h);
            cplx zp = z_cur + (s_try - s_cur) / ld_cur;
            cplx z = zp, ld;
            bool ok = finite(zp) && newton(tgt, s_try, z, ld);
            if (ok && std::abs(z - zp) <= 0.1 * std::abs(zp - z_cur) + 1e-13 * (1.0 + std::abs(z))) {
                s_cur = s_try;
                z_cur = z;
                ld_cur = ld;
                h *= 1.6;
            } else {
                h *= 0.5;
                if (std::fabs(h) < 1e-15 * s_cur) {
                    seg.ok = false;
                    seg.s_fail = s_cur;
                    seg.z_fail = z_cur;
                    return seg;
                }
            }
        }
        s_cur = s_target;
        seg.samples.push_back({s_target, z_cur});
        seg.lds.push_back(ld_cur);
        double next_gap = i + 1 < grid.size() ? grid[i + 1] - s_target : h;
        h = std::max(h, next_gap);
    }
    return seg;
}

void RayTracer::ensure_crash_angles() const {
    std::call_once(crash_once_, [this] {
        const int D = p_.degree();
        crash_sets_.assign(crit_.size(), {});
        for (std::size_t i = 0; i < crit_.size(); ++i) {
            const auto& cp = crit_[i];
            if (!cp.escaping) continue;
            const cplx c = cp.location;
            const cplx v = eval(p_, c);
            Angle tv = external_angle(p_, v);
            std::vector<cplx> q = p_.coeffs();
            q[0] -= v;
            auto roots = polynomial_roots(q, 1e-15);
            const double t_stop = cp.potential * (1.0 + 1e-6);
            std::vector<double> grid = make_grid(t_stop, {}, TraceOptions{}.steps_per_level);
            std::vector<Angle> found;
            for (int j = 0; j < D; ++j) {
                Angle phi = Angle::approx((tv.value() + j) / D, tv.err() / D + 1e-15);
                bool earlier = false;
                for (std::size_t k = 0; k < i && !earlier; ++k) {
                    if (!crit_[k].escaping || crit_[k].potential <= cp.potential * (1.0 + 1e-9)) continue;
                    for (int m = 0; crit_[k].potential / std::pow(D, m) > cp.potential * (1.0 + 1e-9); ++m) {
                        double x = mul_mod1(phi, pow(BigInt(D), m)).value();
                        for (const auto& a : crash_sets_[k])
                            if (circle_dist(x, a.value()) <= 1e-9 + a.err()) earlier = true;
                    }
                }
                if (earlier) continue;
                Target tgt{phi, 0.0, D, {}, {}};
                cplx z = std::exp(cplx(grid[0], kTwoPi * phi.value())), ld;
                if (!newton(tgt, grid[0], z, ld)) throw Error("BisectionFailed", "cannot start crash-angle candidate");
                Segment seg = continue_line(tgt, grid, z, ld);
                if (!seg.ok) throw Error("BisectionFailed", "candidate field line stalled above the critical potential");
                cplx ze = seg.samples.back().z;
                double dc = std::abs(ze - c);
                double dother = std::numeric_limits<double>::infinity();
                for (cplx r : roots)
                    if (std::abs(r - c) > 1e-4 * (1.0 + std::abs(c))) dother = std::min(dother, std::abs(ze - r));
                if (dc < dother) found.push_back(phi);
            }
            if (found.empty() || static_cast<int>(found.size()) > cp.multiplicity + 1)
                throw Error("BisectionFailed", "unexpected number of crash angles (" + std::to_string(found.size()) + ")");
            crash_sets_[i] = std::move(found);
        }
    });
}

std::vector<Angle> RayTracer::crash_angles(int i) const {
    if (i < 0 || i >= static_cast<int>(crit_.size()) || !crit_[i].escaping)
        throw Error("InvalidArgument", "crash angles need an escaping critical point");
    ensure_crash_angles();
    return crash_sets_[i];
}

std::vector<RayTracer::Prediction> RayTracer::predicted_crashes(const Angle& theta, double s_min) const {
    ensure_crash_angles();
    const int D = p_.degree();
    std::vector<Prediction> out;
    for (std::size_t i = 0; i < crit_.size(); ++i) {
        if (!crit_[i].escaping) continue;
        Angle x = theta;
        double t = crit_[i].potential;
        for (int m = 0; t >= s_min; ++m) {
            for (const auto& a : crash_sets_[i]) {
                if (circle_dist(x.value(), a.value()) <= 1e-9 + a.err() + x.err()) {
                    out.push_back({static_cast<int>(i), m, t});
                    break;
                }
            }
            x = mul_mod1(x, D);
            t /= D;
        }
    }
    std::sort(out.begin(), out.end(), [](const Prediction& a, const Prediction& b) { return a.potential > b.potential; });
    return out;
}

RayTrace RayTracer::trace_offset(const Angle& theta, double eps, const std::vector<double>& grid,
                                 std::vector<std::size_t>* /*unused*/) const {
    Target tgt{theta, eps, p_.degree(), {}, {}};
    cplx z = std::exp(cplx(grid[0], kTwoPi * tgt.at(0))), ld;
    if (!newton(tgt, grid[0], z, ld)) throw Error("StepCollapse", "cannot place the starting point");
    Segment seg = continue_line(tgt, grid, z, ld);
    RayTrace tr;
    tr.angle = theta;
    tr.degree = p_.degree();
    tr.epsilon = eps;
    tr.samples = std::move(seg.samples);
    if (!seg.ok) {
        tr.converged = false;
        tr.terminal_potential = seg.s_fail;
        tr.samples.push_back({seg.s_fail, seg.z_fail});
    } else {
        tr.terminal_potential = grid.back();
    }
    return tr;
}

namespace {

struct Candidate {
    double potential;
    int crit;
    int level;
};

} // namespace

RayTrace RayTracer::trace(const Angle& theta, Side side, const TraceOptions& opt) const {
    if (!(opt.s_min > 0)) throw Error("InvalidArgument", "s_min must be positive");
    if (opt.steps_per_level < 2) throw Error("InvalidArgument", "steps_per_level must be >= 2");
    const int D = p_.degree();
    auto preds = side == Side::smooth ? std::vector<Prediction>{} : predicted_crashes(theta, opt.s_min);
    std::vector<Prediction> smooth_preds;
    if (side == Side::smooth) smooth_preds = predicted_crashes(theta, opt.s_min);

    // every potential at which some precritical point of an escaping critical point lives
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < crit_.size(); ++i) {
        if (!crit_[i].escaping) continue;
        double t = crit_[i].potential;
        for (int m = 0; t >= opt.s_min; ++m, t /= D) cands.push_back({t, static_cast<int>(i), m});
    }
    std::vector<double> extra;
    for (const auto& c : cands) extra.push_back(c.potential);
    for (const auto& pr : smooth_preds) extra.push_back(pr.potential * (1.0 + 1e-8));
    std::vector<double> grid = make_grid(opt.s_min, extra, opt.steps_per_level);
    auto index_of = [&](double s) {
        auto it = std::find(grid.begin(), grid.end(), s);
        return it == grid.end() ? std::size_t(-1) : static_cast<std::size_t>(it - grid.begin());
    };
    auto miss_at = [&](cplx z, const Candidate& c) {
        cplx w = iterate_deriv(p_, z, c.level).first;
        return std::abs(w - crit_[c.crit].location) / rho_[c.crit];
    };

    if (side == Side::smooth) {
        RayTrace tr = trace_offset(theta, 0.0, grid, nullptr);
        tr.side = side;
        for (const auto& pr : smooth_preds) {
            std::size_t gi = index_of(pr.potential * (1.0 + 1e-8));
            Candidate c{pr.potential, pr.critical_index, pr.level};
            if (gi < tr.samples.size() && miss_at(tr.samples[gi].z, c) < 1e-2)
                throw Error("SideRequired", "smooth ray crashes at potential " + fmt(pr.potential));
        }
        for (const auto& c : cands) {
            std::size_t gi = index_of(c.potential);
            if (gi < tr.samples.size() && miss_at(tr.samples[gi].z, c) < 1e-4)
                throw Error("SideRequired", "smooth ray crashes at potential " + fmt(c.potential));
        }
        if (!tr.converged) {
            for (const auto& c : cands) {
                if (std::fabs(c.potential - tr.terminal_potential) < 1e-4 * c.potential &&
                    miss_at(tr.samples.back().z, c) < 0.05)
                    throw Error("SideRequired", "smooth ray crashes at potential " + fmt(c.potential));
            }
            throw Error("StepCollapse", "adaptive step underflow at potential " + fmt(tr.terminal_potential));
        }
        tr.landing = landing_point(tr, opt.landing_window, opt.landing_tol);
        return tr;
    }

    const double sign = side == Side::plus ? 1.0 : -1.0;
    const Turn turn = side == Side::plus ? Turn::right : Turn::left;

    auto finish = [&](RayTrace tr, double eps, bool conv, double agree) {
        tr.side = side;
        tr.epsilon = eps;
        tr.converged = conv;
        tr.agreement = agree;
        tr.crashes.clear();
        for (const auto& c : cands) {
            std::size_t gi = index_of(c.potential);
            if (gi >= tr.samples.size()) continue;
            bool predicted = std::any_of(preds.begin(), preds.end(), [&](const Prediction& p) {
                return p.critical_index == c.crit && p.level == c.level;
            });
            double miss = miss_at(tr.samples[gi].z, c);
            if (!predicted && miss >= 1e-3) continue;
            CrashEvent ev;
            ev.location = locate_precritical(p_, tr.samples[gi].z, crit_[c.crit].location, c.level);
            GreenValue g = green(p_, ev.location);
            ev.potential = g.value;
            ev.order = crit_[c.crit].multiplicity + 1;
            ev.turn = turn;
            ev.critical_index = c.crit;
            ev.level = c.level;
            ev.miss = miss;
            ev.predicted = predicted;
            // the one-sided limit passes through the precritical point itself
            tr.samples[gi].z = ev.location;
            tr.crashes.push_back(ev);
        }
        std::sort(tr.crashes.begin(), tr.crashes.end(),
                  [](const CrashEvent& a, const CrashEvent& b) { return a.potential > b.potential; });
        tr.landing = landing_point(tr, opt.landing_window, opt.landing_tol);
        return tr;
    };

    if (preds.empty()) {
        // possibly smooth: accept the unperturbed trace if it meets no critical point
        RayTrace tr = trace_offset(theta, 0.0, grid, nullptr);
        bool clean = tr.converged;
        for (const auto& c : cands) {
            std::size_t gi = index_of(c.potential);
            if (clean && gi < tr.samples.size() && miss_at(tr.samples[gi].z, c) < 1e-3) clean = false;
        }
        if (clean) {
            tr = finish(std::move(tr), 0.0, true, 0.0);
            return tr;
        }
    }

    std::optional<RayTrace> prev;
    double agree = std::numeric_limits<double>::infinity();
    for (double eps = opt.eps0; eps >= opt.eps_floor; eps *= 0.5) {
        RayTrace cur = trace_offset(theta, sign * eps, grid, nullptr);
        if (!cur.converged) {
            if (prev) break;
            continue;
        }
        cur = finish(std::move(cur), sign * eps, false, agree);
        if (prev && prev->samples.size() == cur.samples.size()) {
            double d = 0.0;
            for (std::size_t i = 0; i < cur.samples.size(); ++i) d = std::max(d, std::abs(cur.samples[i].z - prev->samples[i].z));
            agree = d;
            cur.agreement = d;
            if (d < opt.accept_tol) {
                cur.converged = true;
                return cur;
            }
        }
        prev = std::move(cur);
    }
    if (!prev) throw Error("StepCollapse", "no one-sided offset could be traced");
    prev->converged = false;
    prev->agreement = agree;
    return *prev;
}

double RayTracer::crash_potential(const Angle& theta, const TraceOptions& opt) const {
    try {
        trace(theta, Side::smooth, opt);
    } catch (const Error& e) {
        if (e.code() != "SideRequired") throw;
        auto preds = predicted_crashes(theta, opt.s_min);
        // the geometric detection reports the candidate potential; prefer the arithmetic one if it agrees
        std::string msg = e.what();
        double s = std::stod(msg.substr(msg.rfind(' ') + 1));
        for (const auto& pr : preds)
            if (std::fabs(pr.potential - s) < 1e-6 * s) return pr.potential;
        return s;
    }
    return 0.0;
}

std::optional<cplx> landing_point(const RayTrace& trace, int window, double tol) {
    const auto& smp = trace.samples;
    if (smp.size() < 4 || static_cast<int>(smp.size()) < window) return std::nullopt;
    const std::size_t n = smp.size();
    double diam = 0.0;
    for (std::size_t i = n - window; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) diam = std::max(diam, std::abs(smp[i].z - smp[j].z));

    // samples one level apart: potentials s0, D s0, D^2 s0, D^3 s0
    const double s0 = smp.back().s;
    auto find_s = [&](double s) -> std::optional<cplx> {
        for (std::size_t i = 0; i < n; ++i)
            if (std::fabs(smp[i].s - s) < 1e-9 * s) return smp[i].z;
        return std::nullopt;
    };
    std::optional<cplx> extrap;
    double extrap_err = std::numeric_limits<double>::infinity();
    const double level = trace.degree;
    {
        auto u0 = find_s(s0), u1 = find_s(s0 * level), u2 = find_s(s0 * level * level),
             u3 = find_s(s0 * level * level * level);
        if (u0 && u1 && u2 && u3) {
            cplx d0 = *u0 - *u1, d1 = *u1 - *u2, d2 = *u2 - *u3;
            if (d1 != 0.0 && d2 != 0.0) {
                cplx r = d0 / d1, r2 = d1 / d2;
                if (std::abs(r) < 0.95 && std::abs(r - r2) < 0.3 * std::abs(r2)) {
                    extrap = *u0 + d0 * r / (1.0 - r);
                    extrap_err = std::abs(d0) * std::abs(r - r2) / std::norm(1.0 - r) + std::abs(d0) * std::abs(r) * 1e-3;
                }
            }
        }
    }
    if (diam < tol) return extrap ? *extrap : smp.back().z;
    if (extrap && extrap_err < tol) return *extrap;
    return std::nullopt;
}

RayTrace trace_ray(const Polynomial& p, const Angle& theta, Side side, const TraceOptions& opt) {
    return RayTracer(p).trace(theta, side, opt);
}

double crash_potential(const Polynomial& p, const Angle& theta, const TraceOptions& opt) {
    return RayTracer(p).crash_potential(theta, opt);
}

std::vector<Angle> crash_angles(const Polynomial& p, const CriticalPoint& omega) {
    RayTracer rt(p);
    for (std::size_t i = 0; i < rt.critical().size(); ++i)
        if (std::abs(rt.critical()[i].location - omega.location) < 1e-8 * (1.0 + std::abs(omega.location)))
            return rt.crash_angles(static_cast<int>(i));
    throw Error("InvalidArgument", "not a critical point of this polynomial");
}

} // namespace rayatlas
