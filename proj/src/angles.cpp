#include "rayatlas/angles.hpp"
#include "rayatlas/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rayatlas {

namespace {

BigInt mod_floor(const BigInt& a, const BigInt& m) {
    BigInt r = a % m;
    if (r < 0) r += m;
    return r;
}

double big_ratio(const BigInt& num, const BigInt& den) {
    // num < den; scale down both to keep 64 significant bits
    BigInt n = num, d = den;
    unsigned bits = msb(d);
    if (bits > 62) {
        unsigned shift = bits - 62;
        n >>= shift;
        d >>= shift;
    }
    return static_cast<double>(static_cast<long double>(n.convert_to<long long>()) /
                               static_cast<long double>(d.convert_to<long long>()));
}

} // namespace

double wrap01(double x) {
    double r = x - std::floor(x);
    if (r >= 1.0) r = 0.0;
    return r;
}

double centered(double x) {
    double r = wrap01(x);
    return r > 0.5 ? r - 1.0 : r;
}

double circle_dist(double a, double b) { return std::fabs(centered(a - b)); }

double arc_length(double a, double b) { return wrap01(b - a); }

Angle Angle::rational(BigInt num, BigInt den) {
    if (den <= 0) throw Error("InvalidAngle", "denominator must be positive");
    num = mod_floor(num, den);
    BigInt g = gcd(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    if (num == 0) den = 1;
    Angle t;
    t.exact_ = true;
    t.num_ = std::move(num);
    t.den_ = std::move(den);
    return t;
}

Angle Angle::rational(long long num, long long den) { return rational(BigInt(num), BigInt(den)); }

Angle Angle::approx(double value, double err) {
    if (!std::isfinite(value)) throw Error("InvalidAngle", "non-finite angle");
    Angle t;
    t.exact_ = false;
    t.value_ = wrap01(value);
    t.err_ = std::max(0.0, err);
    return t;
}

Angle Angle::parse(const std::string& text) {
    auto slash = text.find('/');
    if (slash != std::string::npos) {
        BigInt n(text.substr(0, slash)), d(text.substr(slash + 1));
        return rational(n, d);
    }
    auto pm = text.find("+-");
    double err = 0.0;
    std::string body = text;
    if (pm != std::string::npos) {
        err = std::stod(text.substr(pm + 2));
        body = text.substr(0, pm);
    }
    std::size_t used = 0;
    double v = std::stod(body, &used);
    if (used != body.size()) throw Error("InvalidAngle", "cannot parse angle '" + text + "'");
    return approx(v, err);
}

double Angle::value() const {
    if (!exact_) return value_;
    if (num_ == 0) return 0.0;
    return big_ratio(num_, den_);
}

std::string Angle::str() const {
    std::ostringstream os;
    if (exact_) {
        os << num_ << "/" << den_;
    } else {
        os.precision(17);
        os << value_;
        if (err_ > 0) {
            os.precision(3);
            os << "+-" << err_;
        }
    }
    return os.str();
}

bool Angle::operator==(const Angle& o) const {
    if (exact_ != o.exact_) return false;
    if (exact_) return num_ == o.num_ && den_ == o.den_;
    return value_ == o.value_ && err_ == o.err_;
}

Angle mul_mod1(const Angle& t, const BigInt& m) {
    if (m < 1) throw Error("InvalidArgument", "multiplier must be >= 1");
    if (t.exact()) return Angle::rational(mod_floor(t.num() * m, t.den()), t.den());
    // x*m mod 1 as a sum over the binary digits of m; doubling mod 1 is exact in binary floating point
    double x = t.value();
    double acc = 0.0;
    BigInt rest = m;
    while (rest > 0) {
        if ((rest & 1) != 0) acc = wrap01(acc + x);
        rest >>= 1;
        x = wrap01(2.0 * x);
    }
    return Angle::approx(acc, t.err() * m.convert_to<double>());
}

Angle mul_mod1(const Angle& t, long long m) { return mul_mod1(t, BigInt(m)); }

Angle add_mod1(const Angle& a, const Angle& b) {
    if (a.exact() && b.exact())
        return Angle::rational(a.num() * b.den() + b.num() * a.den(), a.den() * b.den());
    return Angle::approx(a.value() + b.value(), a.err() + b.err());
}

Angle sub_mod1(const Angle& a, const Angle& b) {
    if (a.exact() && b.exact())
        return Angle::rational(a.num() * b.den() - b.num() * a.den(), a.den() * b.den());
    return Angle::approx(a.value() - b.value(), a.err() + b.err());
}

Angle offset(const Angle& t, double delta) { return Angle::approx(t.value() + delta, t.err()); }

std::vector<Angle> preimages(const Angle& t, int m) {
    if (m < 2) throw Error("InvalidArgument", "preimages need m >= 2");
    std::vector<Angle> out;
    out.reserve(m);
    for (int j = 0; j < m; ++j) {
        if (t.exact())
            out.push_back(Angle::rational(t.num() + BigInt(j) * t.den(), t.den() * m));
        else
            out.push_back(Angle::approx((t.value() + j) / m, t.err() / m));
    }
    return out;
}

std::vector<Angle> fixed_points_of_power(int m) {
    if (m < 2) throw Error("InvalidArgument", "fixed points need m >= 2");
    std::vector<Angle> out;
    for (int j = 0; j < m - 1; ++j) out.push_back(Angle::rational(j, m - 1));
    return out;
}

Angle arc_length(const Angle& a, const Angle& b) {
    if (a.exact() && b.exact()) return sub_mod1(b, a);
    return Angle::approx(arc_length(a.value(), b.value()), a.err() + b.err());
}

bool same_angle(const Angle& a, const Angle& b, double tol) {
    if (a.exact() && b.exact() && tol == 0.0) return a == b;
    return circle_dist(a.value(), b.value()) <= a.err() + b.err() + tol;
}

bool in_open_arc(double x, double a, double b) {
    double len = arc_length(a, b);
    double pos = arc_length(a, x);
    if (len == 0.0) return pos != 0.0; // ]a,a[ is the punctured circle
    return pos > 0.0 && pos < len;
}

bool in_open_arc(const Angle& x, const Angle& a, const Angle& b) {
    if (x.exact() && a.exact() && b.exact()) {
        Angle len = sub_mod1(b, a);
        Angle pos = sub_mod1(x, a);
        if (pos.num() == 0) return false;
        if (len.num() == 0) return true;
        return pos.num() * len.den() < len.num() * pos.den();
    }
    return in_open_arc(x.value(), a.value(), b.value());
}

int compare(const Angle& a, const Angle& b) {
    if (a.exact() && b.exact()) {
        BigInt l = a.num() * b.den(), r = b.num() * a.den();
        return l < r ? -1 : (l > r ? 1 : 0);
    }
    double va = a.value(), vb = b.value();
    double e = a.err() + b.err();
    if (std::fabs(va - vb) <= e) {
        if (va == vb && e == 0.0) return 0;
        throw Error("AmbiguousOrder", a.str() + " vs " + b.str());
    }
    return va < vb ? -1 : 1;
}

std::optional<Angle> snap_rational(const Angle& t, long long max_den, double tol) {
    if (t.exact()) return t;
    double v = t.value();
    // continued-fraction convergents
    long long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double x = v;
    std::optional<Angle> best;
    for (int it = 0; it < 64; ++it) {
        double a = std::floor(x);
        long long ai = static_cast<long long>(a);
        long long p2 = ai * p1 + p0, q2 = ai * q1 + q0;
        if (q2 > max_den) break;
        double approx = static_cast<double>(p2) / static_cast<double>(q2);
        if (circle_dist(approx, v) <= tol + t.err()) {
            best = Angle::rational(p2, q2);
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        double frac = x - a;
        if (frac < 1e-18) break;
        x = 1.0 / frac;
    }
    if (!best && circle_dist(0.0, v) <= tol + t.err()) best = Angle::rational(0, 1);
    return best;
}

double Arc::length() const {
    double len = arc_length(a.value(), b.value());
    // a closed arc from a to a is a point, not the full circle
    return len;
}

ArcSet::ArcSet(std::vector<Arc> arcs) : arcs_(std::move(arcs)) {
    std::sort(arcs_.begin(), arcs_.end(),
              [](const Arc& x, const Arc& y) { return x.a.value() < y.a.value(); });
    validate();
}

ArcSet ArcSet::full_circle() {
    ArcSet s;
    s.full_ = true;
    return s;
}

double ArcSet::measure() const {
    if (full_) return 1.0;
    double m = 0.0;
    for (const auto& arc : arcs_) m += arc.length();
    return m;
}

int ArcSet::locate(double x, double tol) const {
    if (full_) return 0;
    for (std::size_t i = 0; i < arcs_.size(); ++i) {
        double a = arcs_[i].a.value();
        double len = arcs_[i].length();
        double pos = arc_length(a, x);
        if (pos <= len + tol || pos >= 1.0 - tol) return static_cast<int>(i);
    }
    return -1;
}

void ArcSet::validate() const {
    if (full_) return;
    double total = 0.0;
    const std::size_t n = arcs_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Arc& cur = arcs_[i];
        total += cur.length();
        if (n == 1) break;
        double end = cur.a.value() + cur.length();
        double next = (i + 1 < n) ? arcs_[i + 1].a.value() : arcs_[0].a.value() + 1.0;
        if (!(end < next))
            throw Error("ArcSetInvalid", "arcs overlap or are out of cyclic order near " + cur.a.str());
    }
    if (total > 1.0 + 1e-12) throw Error("ArcSetInvalid", "total length exceeds 1");
}

PiecewiseAffineCircleMap::PiecewiseAffineCircleMap(std::vector<Breakpoint> bps, int degree)
    : bps_(std::move(bps)), degree_(degree) {
    if (bps_.empty()) throw Error("InvalidMap", "no breakpoints");
    std::sort(bps_.begin(), bps_.end(), [](const Breakpoint& a, const Breakpoint& b) { return a.x < b.x; });
    const std::size_t n = bps_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& cur = bps_[i];
        if (cur.x < 0.0 || cur.x >= 1.0) throw Error("InvalidMap", "breakpoint outside [0,1)");
        if (cur.slope < 0.0) throw Error("InvalidMap", "negative slope");
        double next_x = (i + 1 < n) ? bps_[i + 1].x : bps_[0].x + 1.0;
        double next_y = (i + 1 < n) ? bps_[i + 1].y : bps_[0].y + degree_;
        double predicted = cur.y + cur.slope * (next_x - cur.x);
        if (std::fabs(predicted - next_y) > 1e-9 * std::max(1.0, std::fabs(next_y)))
            throw Error("InvalidMap", "lift is not continuous or does not have the declared degree");
    }
}

PiecewiseAffineCircleMap PiecewiseAffineCircleMap::multiplication(int d) {
    return PiecewiseAffineCircleMap({{0.0, 0.0, static_cast<double>(d)}}, d);
}

double PiecewiseAffineCircleMap::lift(double x) const {
    double fl = std::floor(x);
    double t = x - fl;
    auto it = std::upper_bound(bps_.begin(), bps_.end(), t,
                               [](double v, const Breakpoint& b) { return v < b.x; });
    double y;
    if (it == bps_.begin()) {
        // t is before the first breakpoint: continue from the last one, shifted down a period
        const auto& last = bps_.back();
        y = last.y - degree_ + last.slope * (t - (last.x - 1.0));
    } else {
        const auto& b = *(it - 1);
        y = b.y + b.slope * (t - b.x);
    }
    return y + fl * degree_;
}

bool PiecewiseAffineCircleMap::locally_constant_at(double x, double tol) const {
    double l = lift(x - tol), r = lift(x + tol);
    return r - l <= 1e-15;
}

std::vector<Angle> semi_repelling_fixed_points(const PiecewiseAffineCircleMap& g) {
    std::vector<double> found;
    const auto& bps = g.breakpoints();
    const std::size_t n = bps.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& b = bps[i];
        if (b.slope <= 1.0) continue;
        double x0 = b.x;
        double x1 = (i + 1 < n) ? bps[i + 1].x : bps[0].x + 1.0;
        // lift(x) - x - j = 0 on [x0, x1] with lift affine here
        double y0 = b.y, y1 = b.y + b.slope * (x1 - x0);
        double lo = std::min(y0 - x0, y1 - x1), hi = std::max(y0 - x0, y1 - x1);
        for (long long j = static_cast<long long>(std::ceil(lo - 1e-12));
             j <= static_cast<long long>(std::floor(hi + 1e-12)); ++j) {
            double x = (static_cast<double>(j) - y0 + b.slope * x0) / (b.slope - 1.0);
            x = std::clamp(x, x0, x1);
            found.push_back(wrap01(x));
        }
    }
    std::sort(found.begin(), found.end());
    std::vector<Angle> out;
    for (double x : found) {
        if (!out.empty() && circle_dist(out.back().value(), x) < 1e-12) continue;
        if (out.size() > 1 && circle_dist(out.front().value(), x) < 1e-12) continue;
        out.push_back(Angle::approx(x, 1e-12));
    }
    return out;
}

PiecewiseAffineCircleMap random_plateau_map(int d, double S, int runs, std::mt19937_64& rng) {
    if (S <= d) throw Error("InvalidArgument", "slope S must exceed the degree");
    std::uniform_real_distribution<double> uni(0.05, 1.0);
    std::vector<double> rise(runs), flat(runs);
    double rs = 0, fs = 0;
    for (int i = 0; i < runs; ++i) {
        rise[i] = uni(rng);
        flat[i] = uni(rng);
        rs += rise[i];
        fs += flat[i];
    }
    const double total_rise = static_cast<double>(d) / S; // x-length carrying slope S
    const double total_flat = 1.0 - total_rise;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double x = u01(rng) * 0.999;
    double y = u01(rng) * 3.0;
    std::vector<Breakpoint> bps;
    for (int i = 0; i < runs; ++i) {
        double lr = rise[i] / rs * total_rise;
        double lf = flat[i] / fs * total_flat;
        bps.push_back({x, y, S});
        y += S * lr;
        x += lr;
        bps.push_back({x, y, 0.0});
        x += lf;
    }
    // rotate so that x values lie in [0,1)
    for (auto& b : bps) {
        double fl = std::floor(b.x);
        b.x -= fl;
        b.y -= fl * d;
        if (b.x >= 1.0) {
            b.x -= 1.0;
            b.y -= d;
        }
    }
    return PiecewiseAffineCircleMap(bps, d);
}

} // namespace rayatlas
