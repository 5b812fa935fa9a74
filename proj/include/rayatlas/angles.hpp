#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rayatlas {

using BigInt = boost::multiprecision::cpp_int;

// A point of the circle R/Z.  Either an exact reduced rational in [0,1) or a
// float in [0,1) with an absolute error bound.
class Angle {
public:
    Angle() = default;

    static Angle rational(BigInt num, BigInt den);
    static Angle rational(long long num, long long den);
    static Angle approx(double value, double err = 0.0);
    // "p/q", "0.25", "0.25+-1e-9"
    static Angle parse(const std::string& text);

    bool exact() const { return exact_; }
    const BigInt& num() const { return num_; }
    const BigInt& den() const { return den_; }
    double value() const;
    double err() const { return exact_ ? 0.0 : err_; }

    std::string str() const;

    // Structural equality: same rational, or same float value and error.
    bool operator==(const Angle& o) const;
    bool operator!=(const Angle& o) const { return !(*this == o); }

private:
    bool exact_ = true;
    BigInt num_ = 0;
    BigInt den_ = 1;
    double value_ = 0.0;
    double err_ = 0.0;
};

Angle mul_mod1(const Angle& t, const BigInt& m);
Angle mul_mod1(const Angle& t, long long m);
Angle add_mod1(const Angle& a, const Angle& b);
Angle sub_mod1(const Angle& a, const Angle& b);
Angle offset(const Angle& t, double delta);

std::vector<Angle> preimages(const Angle& t, int m);
std::vector<Angle> fixed_points_of_power(int m);

// Counterclockwise length of ]a,b[ in [0,1).
double arc_length(double a, double b);
Angle arc_length(const Angle& a, const Angle& b);
double wrap01(double x);
// Signed representative of x in (-1/2, 1/2].
double centered(double x);
double circle_dist(double a, double b);
bool same_angle(const Angle& a, const Angle& b, double tol = 0.0);
// True if x lies in the open counterclockwise arc ]a,b[.
bool in_open_arc(double x, double a, double b);
bool in_open_arc(const Angle& x, const Angle& a, const Angle& b);

// -1, 0, +1 comparing representatives in [0,1).  Throws AmbiguousOrder when
// float error intervals overlap.
int compare(const Angle& a, const Angle& b);

// Closest rational with denominator <= max_den, if within tol.
std::optional<Angle> snap_rational(const Angle& t, long long max_den, double tol);

struct Arc {
    Angle a;
    Angle b;
    double length() const;
    bool point() const { return length() == 0.0; }
};

// Finite union of disjoint closed arcs, sorted counterclockwise by start.
class ArcSet {
public:
    ArcSet() = default;
    explicit ArcSet(std::vector<Arc> arcs);
    static ArcSet full_circle();

    bool full() const { return full_; }
    bool empty() const { return !full_ && arcs_.empty(); }
    const std::vector<Arc>& arcs() const { return arcs_; }
    std::size_t size() const { return arcs_.size(); }
    double measure() const;
    // Index of the arc containing x (closed, enlarged by tol), or -1.
    int locate(double x, double tol = 0.0) const;
    void validate() const;

private:
    std::vector<Arc> arcs_;
    bool full_ = false;
};

struct Breakpoint {
    double x;     // in [0,1)
    double y;     // lift value at x
    double slope; // slope on [x, next x)
};

// Continuous monotone circle map given by its lift on [0,1).
class PiecewiseAffineCircleMap {
public:
    PiecewiseAffineCircleMap(std::vector<Breakpoint> bps, int degree);
    static PiecewiseAffineCircleMap multiplication(int d);

    int degree() const { return degree_; }
    const std::vector<Breakpoint>& breakpoints() const { return bps_; }
    double lift(double x) const;
    double operator()(double x) const { return wrap01(lift(x)); }
    bool locally_constant_at(double x, double tol = 1e-12) const;

private:
    std::vector<Breakpoint> bps_;
    int degree_;
};

std::vector<Angle> semi_repelling_fixed_points(const PiecewiseAffineCircleMap& g);

// Random monotone degree-d map with slopes in {0, S}: alternating plateaus and
// slope-S runs, random lengths, random vertical offset.
PiecewiseAffineCircleMap random_plateau_map(int d, double S, int runs, std::mt19937_64& rng);

} // namespace rayatlas
