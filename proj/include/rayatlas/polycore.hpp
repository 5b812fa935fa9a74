#pragma once

#include "rayatlas/angles.hpp"

#include <complex>
#include <string>
#include <vector>

namespace rayatlas {

using cplx = std::complex<double>;

class Polynomial {
public:
    Polynomial() = default;
    // coeffs constant-first; the leading coefficient must be 1
    explicit Polynomial(std::vector<cplx> coeffs);
    // Conjugates c(z) by z = w/lambda with lambda^(D-1) = leading coefficient,
    // giving a monic polynomial; lambda is returned through scale.
    static Polynomial normalized(std::vector<cplx> coeffs, cplx* scale = nullptr);

    int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
    const std::vector<cplx>& coeffs() const { return coeffs_; }
    // |z| > escape_radius() implies monotone escape
    double escape_radius() const { return r_esc_; }
    // |w| >= bottcher_radius(): P(w)/w^D stays within 1/2 of 1 along the orbit
    double bottcher_radius() const { return r_good_; }
    std::string hash() const;
    Polynomial derivative_monic() const;

private:
    std::vector<cplx> coeffs_;
    double r_esc_ = 2.0;
    double r_good_ = 2.0;
};

cplx eval(const Polynomial& p, cplx z);
std::pair<cplx, cplx> eval_deriv(const Polynomial& p, cplx z);
// P^n(z) together with (P^n)'(z)
std::pair<cplx, cplx> iterate_deriv(const Polynomial& p, cplx z, int n);

// Roots of an arbitrary monic polynomial (Aberth iteration), not clustered.
std::vector<cplx> polynomial_roots(const std::vector<cplx>& monic_coeffs, double tol = 1e-14);

struct CriticalPoint {
    cplx location;
    int multiplicity = 1;
    bool escaping = false;
    double potential = 0.0;
};

enum class Orbit { escaped, bounded, undecided };

struct GreenValue {
    double value = 0.0;
    cplx log_derivative{0.0, 0.0}; // 2 dG/dz; conj() points along grad G
    int iterations_used = 0;
    Orbit orbit = Orbit::undecided;
};

GreenValue green(const Polynomial& p, cplx z, double eps = 1e-15, int max_iter = 10000);

std::vector<CriticalPoint> critical_points(const Polynomial& p, double tol = 1e-12);
double s_max(const std::vector<CriticalPoint>& crit);

// log of the Bottcher coordinate at w, valid for |w| >= bottcher_radius();
// real part is G(w), imaginary part 2*pi*Theta(w) up to 2*pi*Z.
cplx log_bottcher_far(const Polynomial& p, cplx w);
// same, also returning d/dw of the result
cplx log_bottcher_far(const Polynomial& p, cplx w, cplx* deriv);
cplx bottcher(const Polynomial& p, cplx z, double eps = 1e-14);

struct AngleOptions {
    double rk_tol = 1e-10;
    int max_steps = 200000;
};
// External angle of an escaping point.  The result is Theta(P^m z)/D^m shifted
// by the branch j/D^m selected by ascending the field line through z.
Angle external_angle(const Polynomial& p, cplx z, const AngleOptions& opt = {});

} // namespace rayatlas
