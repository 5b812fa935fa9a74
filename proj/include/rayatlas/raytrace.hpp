#pragma once

#include "rayatlas/angles.hpp"
#include "rayatlas/polycore.hpp"

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace rayatlas {

enum class Side { smooth, plus, minus };
enum class Turn { right, left };

std::string to_string(Side s);
std::string to_string(Turn t);
Side parse_side(const std::string& s);

struct RaySample {
    double s;
    cplx z;
};

struct CrashEvent {
    double potential = 0.0;
    cplx location;
    int order = 2;
    Turn turn = Turn::right;
    int critical_index = -1; // index into RayTracer::critical()
    int level = 0;           // P^level(location) is the critical point
    double miss = 0.0;       // |P^level(z) - c| / rho_c for the trace point at this potential
    bool predicted = true;   // found by angle arithmetic (false: geometric near-pass only)
};

struct RayTrace {
    Angle angle;
    Side side = Side::smooth;
    int degree = 2;
    std::vector<RaySample> samples;
    std::vector<CrashEvent> crashes;
    double terminal_potential = 0.0;
    std::optional<cplx> landing;
    double epsilon = 0.0;     // last one-sided offset used (0 for smooth rays)
    bool converged = true;    // offsets reached the agreement tolerance
    double agreement = 0.0;   // sup-norm distance between the last two offsets
};

struct TraceOptions {
    double s_min = 1e-8;
    int steps_per_level = 16;
    double eps0 = 1e-3;
    double eps_floor = 1e-15;
    double accept_tol = 1e-6;
    int landing_window = 32;
    double landing_tol = 1e-5;
};

// Ray tracing context for one polynomial; caches critical data and crash angle sets.
class RayTracer {
public:
    explicit RayTracer(Polynomial p);

    const Polynomial& poly() const { return p_; }
    const std::vector<CriticalPoint>& critical() const { return crit_; }
    double s_max() const { return s_max_; }
    // potential above which rays are started (N = 0 region)
    double start_potential() const { return s_hi_; }
    double critical_scale(int i) const { return rho_[i]; }

    RayTrace trace(const Angle& theta, Side side, const TraceOptions& opt = {}) const;
    // s_theta, or 0 when the smooth ray reaches opt.s_min without crashing
    double crash_potential(const Angle& theta, const TraceOptions& opt = {}) const;
    // angles of the field lines crashing into escaping critical point i
    std::vector<Angle> crash_angles(int i) const;

    struct Prediction {
        int critical_index;
        int level;
        double potential;
    };
    // crashes of the one-sided limits at theta found by angle arithmetic, highest potential first
    std::vector<Prediction> predicted_crashes(const Angle& theta, double s_min) const;

    // Newton solve for the point of potential s on the field line with angle base+eps,
    // starting at guess.  Returns false if it does not converge.
    bool solve_point(const Angle& base, double eps, double s, cplx guess, cplx& z, cplx& ld) const;

private:
    struct Target;
    struct Segment;
    Segment continue_line(Target& tgt, const std::vector<double>& grid, cplx z0, cplx ld0) const;
    RayTrace trace_offset(const Angle& theta, double eps, const std::vector<double>& grid,
                          std::vector<std::size_t>* crash_idx) const;
    std::vector<double> make_grid(double s_stop, const std::vector<double>& extra, int steps) const;
    bool newton(Target& tgt, double s, cplx& z, cplx& ld) const;
    int level_for(double s) const;
    void ensure_crash_angles() const;

    Polynomial p_;
    std::vector<CriticalPoint> crit_;
    std::vector<double> rho_;
    double s_max_ = 0.0;
    double s_hi_ = 0.0;

    mutable std::once_flag crash_once_;
    mutable std::vector<std::vector<Angle>> crash_sets_;
};

RayTrace trace_ray(const Polynomial& p, const Angle& theta, Side side, const TraceOptions& opt = {});
double crash_potential(const Polynomial& p, const Angle& theta, const TraceOptions& opt = {});
std::vector<Angle> crash_angles(const Polynomial& p, const CriticalPoint& omega);
// Limit of the tail of the trace if it is Cauchy to tol (window samples or a geometric tail).
std::optional<cplx> landing_point(const RayTrace& trace, int window = 32, double tol = 1e-5);

} // namespace rayatlas
