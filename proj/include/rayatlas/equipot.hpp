#pragma once

#include "rayatlas/angles.hpp"
#include "rayatlas/polycore.hpp"
#include "rayatlas/raytrace.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rayatlas {

struct ComponentSeed {
    cplx marker{0.0, 0.0};
    int k = 1;
};

struct Gap {
    Angle a;
    Angle b;
    double crash_s = 0.0; // potential of the critical point the bounding ray pair crashes into
};

struct IntervalSystem {
    double s = 0.0;
    ArcSet arcs;
    std::vector<Gap> gaps;
    int k = 1;
    int d = 2;
    double endpoint_err = 0.0;
    bool degenerate = false; // connected case: I_s is the whole circle
    std::vector<std::string> notes;

    double measure() const { return arcs.measure(); }
};

struct RootPoint {
    std::size_t index = 0; // root lies between samples index and index+1
    cplx z;
    Angle left;  // limit of Theta before the root (gap start)
    Angle right; // limit after the root (gap end)
    double crash_s = 0.0;
    bool snapped = false;
};

struct EquipotentialCurve {
    double s = 0.0;
    std::vector<cplx> points;
    std::vector<double> theta_int; // integrated angle, starting at theta_abs[0]
    std::vector<double> theta_abs; // external angle at each point (empty if not requested)
    std::vector<RootPoint> roots;
    double angular_length = 0.0; // total integrated angle = |Gamma_s|
};

struct CurveOptions {
    bool angles = true;
    int max_steps = 400000;
    double rel_step = 0.08;  // step <= rel_step * s / |grad G|
    double max_turn = 0.3;   // radians between consecutive tangents
    double root_tol = 1e-6;  // root localization, fraction of the curve length
};

void check_seed(const Polynomial& p, const ComponentSeed& seed);

EquipotentialCurve equipotential_trace(const RayTracer& rt, const ComponentSeed& seed, double s,
                                       const CurveOptions& opt = {});

IntervalSystem extract_interval_system(const RayTracer& rt, const ComponentSeed& seed, double s, int d,
                                       const CurveOptions& opt = {});
IntervalSystem interval_system_from_curve(const RayTracer& rt, const EquipotentialCurve& c, int k, int d);

struct PushforwardReport {
    bool ok = true;
    double max_deviation = 0.0;
    std::vector<std::string> events; // endpoints mapped into the interior of an arc
};
// D^k(I_s) = I_{D^k s}; raises MismatchBeyondTolerance past tol
PushforwardReport pushforward_check(const IntervalSystem& sys, const IntervalSystem& image, int D, double tol = 1e-4);

struct SStar {
    double value = 0.0;
    bool degenerate = false;
    double lo = 0.0, hi = 0.0;
    std::vector<int> excluded; // escaping critical points (indices into rt.critical()) outside V_s*
};
// Largest s (1% relative) for which V_s holds exactly d-1 critical points of P^k, all non-escaping.
SStar estimate_s_star(const RayTracer& rt, const ComponentSeed& seed, int d, double s_cap = 50.0);

// I_{n+1} = closure(D^-k(I_n) ∩ I_n), s_{n+1} = s_n / D^k; valid below s*.
std::vector<IntervalSystem> build_ladder(const RayTracer& rt, const IntervalSystem& base, int levels);
// Same recursion without a polynomial; gap crash potentials are left at 0 where they cannot be inherited.
std::vector<IntervalSystem> build_ladder(const IntervalSystem& base, int D, int levels);

// g_s = Pi_s o D^k o Pi_s^-1 as a degree-d circle map, normalized so theta0 goes to 0
PiecewiseAffineCircleMap build_gs(const IntervalSystem& sys, const IntervalSystem& image, const Angle& theta0, int D);

// Normalized measure of sys ∩ [theta0, x] (counterclockwise), i.e. Pi_s(x).
double arc_measure_from(const IntervalSystem& sys, double theta0, double x);

// Fixed points of D^k lying in I (closed, with tolerance), sorted.
std::vector<Angle> fixed_angles_in(const IntervalSystem& sys, int D, double tol = 1e-12);

} // namespace rayatlas
