#include "rayatlas/polycore.hpp"
#include "rayatlas/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace rayatlas {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double tail_sum(const std::vector<cplx>& c, double r) {
    // sum_{j<D} |a_j| r^(j-D)
    const int D = static_cast<int>(c.size()) - 1;
    double s = 0.0;
    for (int j = 0; j < D; ++j) s += std::abs(c[j]) * std::pow(r, j - D);
    return s;
}

cplx log1p_c(cplx r) {
    if (std::abs(r) < 1e-5) return r - r * r / 2.0 + r * r * r / 3.0 - r * r * r * r / 4.0;
    return std::log(1.0 + r);
}

// r(w) = P(w)/w^D - 1 evaluated in powers of 1/w
cplx tail_ratio(const std::vector<cplx>& c, cplx w) {
    const int D = static_cast<int>(c.size()) - 1;
    cplx u = 1.0 / w;
    cplx acc = 0.0;
    for (int j = 0; j < D; ++j) acc = (acc + c[j]) * u;
    return acc;
}

double bail_radius(int D) { return std::min(1e30, std::pow(10.0, 280.0 / D)); }

} // namespace

Polynomial::Polynomial(std::vector<cplx> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.size() < 3) throw Error("InvalidPolynomial", "degree must be at least 2");
    if (std::abs(coeffs_.back() - 1.0) > 1e-12)
        throw Error("InvalidPolynomial", "leading coefficient must be 1");
    coeffs_.back() = 1.0;
    double sum = 0.0;
    for (std::size_t j = 0; j + 1 < coeffs_.size(); ++j) sum += std::abs(coeffs_[j]);
    r_esc_ = std::max(2.0, 1.0 + sum);
    double r = r_esc_;
    while (tail_sum(coeffs_, r) > 0.5) r *= 1.25;
    r_good_ = r;
}

Polynomial Polynomial::normalized(std::vector<cplx> coeffs, cplx* scale) {
    while (coeffs.size() > 1 && coeffs.back() == 0.0) coeffs.pop_back();
    if (coeffs.size() < 3) throw Error("InvalidPolynomial", "degree must be at least 2");
    const int D = static_cast<int>(coeffs.size()) - 1;
    cplx lead = coeffs.back();
    cplx lambda = 1.0;
    if (std::abs(lead - 1.0) > 1e-15) {
        lambda = std::pow(lead, 1.0 / (D - 1));
        for (int j = 0; j <= D; ++j) coeffs[j] *= std::pow(lambda, 1 - j);
    }
    if (scale) *scale = lambda;
    return Polynomial(std::move(coeffs));
}

std::string Polynomial::hash() const {
    std::uint64_t h = 14695981039346656037ULL;
    for (const auto& c : coeffs_) {
        std::array<double, 2> parts{c.real(), c.imag()};
        unsigned char bytes[sizeof(parts)];
        std::memcpy(bytes, parts.data(), sizeof(parts));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 1099511628211ULL;
        }
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

Polynomial Polynomial::derivative_monic() const {
    const int D = degree();
    std::vector<cplx> d(D);
    for (int j = 1; j <= D; ++j) d[j - 1] = coeffs_[j] * static_cast<double>(j) / static_cast<double>(D);
    if (D - 1 < 2) {
        // P' has degree 1; Polynomial needs degree >= 2, so pad through z*P'
        d.insert(d.begin(), 0.0);
    }
    return Polynomial(d);
}

cplx eval(const Polynomial& p, cplx z) {
    const auto& c = p.coeffs();
    cplx acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * z + *it;
    return acc;
}

std::pair<cplx, cplx> eval_deriv(const Polynomial& p, cplx z) {
    const auto& c = p.coeffs();
    cplx v = 0.0, d = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) {
        d = d * z + v;
        v = v * z + *it;
    }
    return {v, d};
}

std::pair<cplx, cplx> iterate_deriv(const Polynomial& p, cplx z, int n) {
    cplx w = z, dw = 1.0;
    for (int i = 0; i < n; ++i) {
        auto [v, d] = eval_deriv(p, w);
        dw *= d;
        w = v;
    }
    return {w, dw};
}

std::vector<cplx> polynomial_roots(const std::vector<cplx>& c, double tol) {
    const int n = static_cast<int>(c.size()) - 1;
    if (n < 1) return {};
    if (std::abs(c.back() - 1.0) > 1e-12) throw Error("InvalidPolynomial", "root finder expects a monic polynomial");
    auto ev = [&](cplx z) {
        cplx v = 0.0, d = 0.0;
        for (int j = n; j >= 0; --j) {
            d = d * z + v;
            v = v * z + c[j];
        }
        return std::pair<cplx, cplx>{v, d};
    };
    double bound = 0.0;
    for (int j = 0; j < n; ++j) bound = std::max(bound, std::abs(c[j]));
    double R = 1.0 + bound;
    std::vector<cplx> z(n);
    for (int k = 0; k < n; ++k) z[k] = std::polar(0.7 * R, kTwoPi * k / n + 0.4);
    bool converged = false;
    for (int it = 0; it < 2000 && !converged; ++it) {
        double worst = 0.0;
        for (int k = 0; k < n; ++k) {
            auto [v, d] = ev(z[k]);
            if (v == 0.0) continue;
            cplx ratio = v / d;
            cplx s = 0.0;
            for (int j = 0; j < n; ++j)
                if (j != k) s += 1.0 / (z[k] - z[j]);
            cplx w = ratio / (1.0 - ratio * s);
            if (!std::isfinite(w.real()) || !std::isfinite(w.imag())) w = ratio;
            z[k] -= w;
            worst = std::max(worst, std::abs(w) / (1.0 + std::abs(z[k])));
        }
        if (worst < tol) converged = true;
    }
    for (auto& r : z)
        if (!std::isfinite(r.real()) || !std::isfinite(r.imag()))
            throw Error("RootSolverDiverged", "non-finite root estimate");
    if (!converged) {
        // multiple roots converge slowly; accept if residuals are small
        for (auto& r : z) {
            auto [v, d] = ev(r);
            (void)d;
            if (std::abs(v) > 1e-6 * std::pow(1.0 + std::abs(r), n))
                throw Error("RootSolverDiverged", "Aberth iteration did not converge");
        }
    }
    return z;
}

GreenValue green(const Polynomial& p, cplx z, double eps, int max_iter) {
    (void)eps; // the bail-out radius makes the truncation error far below any sensible eps
    const int D = p.degree();
    const double bail = bail_radius(D);
    const double logD = std::log(static_cast<double>(D));
    GreenValue g;
    cplx w = z;
    cplx q = 1.0; // (P^n)'(z) / D^n
    constexpr int kRing = 32;
    std::array<cplx, kRing> ring{};
    for (int n = 0; n <= max_iter; ++n) {
        double aw = std::abs(w);
        if (aw > bail) {
            g.iterations_used = n;
            g.orbit = Orbit::escaped;
            g.value = std::exp(std::log(std::log(aw)) - n * logD);
            g.log_derivative = q / w;
            return g;
        }
        if (n >= 64 && aw < p.escape_radius()) {
            for (int lag = 1; lag < kRing && lag <= n; ++lag) {
                const cplx& prev = ring[(n - lag) % kRing];
                if (std::abs(prev - w) < 1e-13 * (1.0 + aw)) {
                    g.iterations_used = n;
                    g.orbit = Orbit::bounded;
                    return g;
                }
            }
        }
        ring[n % kRing] = w;
        auto [v, d] = eval_deriv(p, w);
        q *= d / static_cast<double>(D);
        w = v;
    }
    g.iterations_used = max_iter;
    g.orbit = Orbit::undecided;
    return g;
}

std::vector<CriticalPoint> critical_points(const Polynomial& p, double tol) {
    const int D = p.degree();
    std::vector<cplx> dc(D);
    for (int j = 1; j <= D; ++j) dc[j - 1] = p.coeffs()[j] * static_cast<double>(j) / static_cast<double>(D);
    std::vector<cplx> roots = polynomial_roots(dc, tol);
    // cluster roots that belong to one multiple root
    std::vector<int> cluster(roots.size(), -1);
    std::vector<CriticalPoint> out;
    for (std::size_t i = 0; i < roots.size(); ++i) {
        if (cluster[i] >= 0) continue;
        cplx sum = roots[i];
        int count = 1;
        cluster[i] = static_cast<int>(out.size());
        for (std::size_t j = i + 1; j < roots.size(); ++j) {
            if (cluster[j] >= 0) continue;
            if (std::abs(roots[j] - roots[i]) < 1e-5 * (1.0 + std::abs(roots[i]))) {
                cluster[j] = cluster[i];
                sum += roots[j];
                ++count;
            }
        }
        CriticalPoint cp;
        cp.location = sum / static_cast<double>(count);
        cp.multiplicity = count;
        if (count == 1) {
            // polish simple roots with Newton on P'
            for (int it = 0; it < 5; ++it) {
                cplx v = 0.0, d = 0.0;
                for (int j = D - 1; j >= 0; --j) {
                    d = d * cp.location + v;
                    v = v * cp.location + dc[j];
                }
                if (d == 0.0) break;
                cp.location -= v / d;
            }
        }
        out.push_back(cp);
    }
    for (auto& cp : out) {
        GreenValue g = green(p, cp.location);
        cp.escaping = g.orbit == Orbit::escaped && g.value > 0.0;
        cp.potential = cp.escaping ? g.value : 0.0;
    }
    std::sort(out.begin(), out.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
        if (a.potential != b.potential) return a.potential > b.potential;
        if (a.location.real() != b.location.real()) return a.location.real() < b.location.real();
        return a.location.imag() < b.location.imag();
    });
    return out;
}

double s_max(const std::vector<CriticalPoint>& crit) {
    double m = 0.0;
    for (const auto& c : crit) m = std::max(m, c.potential);
    return m;
}

static cplx log_bottcher_far_impl(const Polynomial& p, cplx w, cplx* deriv) {
    if (!(std::abs(w) >= p.bottcher_radius() * (1.0 - 1e-12)))
        throw Error("OutsideDomain", "log_bottcher_far needs |w| >= Bottcher radius");
    const int D = p.degree();
    const auto& c = p.coeffs();
    cplx acc = std::log(w);
    double scale = 1.0;
    cplx x = w;
    cplx q = 1.0 / w; // derivative of log x_n / D^n with respect to w, tracked as (P^n)'/(D^n P^n)
    cplx dlog = 1.0 / w;
    for (int n = 0; n < 200; ++n) {
        if (std::abs(x) > 1e150) break;
        cplx r = tail_ratio(c, x);
        scale /= D;
        cplx term = scale * log1p_c(r);
        acc += term;
        auto [v, d] = eval_deriv(p, x);
        q = q * (d * x / v) / static_cast<double>(D);
        dlog = q;
        x = v;
        if (std::abs(term) < 1e-18 * std::abs(acc) && std::abs(r) < 1e-17) break;
    }
    if (deriv) *deriv = dlog;
    return acc;
}

cplx log_bottcher_far(const Polynomial& p, cplx w) { return log_bottcher_far_impl(p, w, nullptr); }

cplx log_bottcher_far(const Polynomial& p, cplx w, cplx* deriv) { return log_bottcher_far_impl(p, w, deriv); }

namespace {

struct AscentResult {
    cplx z;      // endpoint with |z| >= Bottcher radius
    double err;  // accumulated angle error estimate
};

// Ascend along the field line through z, in the variable u = log G.
AscentResult ascend(const Polynomial& p, cplx z, const AngleOptions& opt) {
    auto rhs = [&](cplx x) -> cplx {
        GreenValue g = green(p, x);
        if (g.orbit != Orbit::escaped || g.log_derivative == 0.0)
            throw Error("AngleUnresolved", "field line left the escaping region");
        return g.value / g.log_derivative;
    };
    auto rk4 = [&](cplx x, double h) {
        cplx k1 = rhs(x);
        cplx k2 = rhs(x + 0.5 * h * k1);
        cplx k3 = rhs(x + 0.5 * h * k2);
        cplx k4 = rhs(x + h * k3);
        return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    };
    double h = 0.05;
    double err = 0.0;
    const double target = p.bottcher_radius();
    for (int step = 0; step < opt.max_steps; ++step) {
        if (std::abs(z) >= target) return {z, err};
        cplx full = rk4(z, h);
        cplx half = rk4(rk4(z, 0.5 * h), 0.5 * h);
        GreenValue g = green(p, z);
        double scale = std::abs(g.value / g.log_derivative);
        double e = std::abs(full - half);
        if (e <= opt.rk_tol * scale || h < 1e-9) {
            GreenValue gh = green(p, half);
            // transverse part of the local error, measured as an angle
            cplx corr = (half - full) / 15.0;
            err += std::fabs((gh.log_derivative * corr).imag()) / kTwoPi + 1e-17;
            z = half + corr;
            double grow = e > 0 ? std::pow(opt.rk_tol * scale / e, 0.2) : 2.0;
            h = std::min(0.5, h * std::clamp(grow, 0.5, 2.0));
        } else {
            double shrink = std::pow(opt.rk_tol * scale / e, 0.2);
            h *= std::clamp(shrink, 0.1, 0.9);
        }
    }
    throw Error("AngleUnresolved", "ascent step budget exhausted (point too near a crashing line)");
}

} // namespace

Angle external_angle(const Polynomial& p, cplx z, const AngleOptions& opt) {
    const int D = p.degree();
    GreenValue gz = green(p, z);
    if (gz.orbit != Orbit::escaped) throw Error("NotEscaping", "external angle needs an escaping point");
    if (std::abs(z) >= p.bottcher_radius())
        return Angle::approx(log_bottcher_far(p, z).imag() / kTwoPi, 1e-15);
    // exact angle of the first iterate in the Bottcher region
    cplx w = z;
    int m = 0;
    while (std::abs(w) < p.bottcher_radius()) {
        w = eval(p, w);
        ++m;
        if (m > 4000) throw Error("AngleUnresolved", "orbit too slow to reach the Bottcher region");
    }
    double theta_m = wrap01(log_bottcher_far(p, w).imag() / kTwoPi);
    AscentResult asc = ascend(p, z, opt);
    double theta_u = wrap01(log_bottcher_far(p, asc.z).imag() / kTwoPi);
    const double Dm = std::pow(static_cast<double>(D), m);
    if ((asc.err + 1e-13) * Dm < 0.25) {
        // branch selection: Theta(z) = (theta_m + j)/D^m closest to the ascended value
        Angle up = mul_mod1(Angle::approx(theta_u), pow(BigInt(D), m));
        double delta = centered(theta_m - up.value()) / Dm;
        return Angle::approx(theta_u + delta, 1e-15 * (1.0 + m));
    }
    if (asc.err > 1e-6) throw Error("AngleUnresolved", "branch tracking is ambiguous near a crashing line");
    return Angle::approx(theta_u, asc.err);
}

cplx bottcher(const Polynomial& p, cplx z, double eps) {
    (void)eps;
    if (std::abs(z) >= p.bottcher_radius()) return std::exp(log_bottcher_far(p, z));
    auto crit = critical_points(p);
    GreenValue g = green(p, z);
    double smax = s_max(crit);
    if (g.orbit != Orbit::escaped || g.value <= smax * (1.0 + 1e-9) + 1e-12)
        throw Error("OutsideDomain", "Bottcher coordinate requested at or below s_max");
    Angle t = external_angle(p, z);
    return std::polar(std::exp(g.value), kTwoPi * t.value());
}

} // namespace rayatlas
