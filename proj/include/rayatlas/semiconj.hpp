#pragma once

#include "rayatlas/angles.hpp"
#include "rayatlas/equipot.hpp"

#include <string>
#include <vector>

namespace rayatlas {

// Prefix sums over the arcs of one I_n, read counterclockwise from theta0.
class MeasureIndex {
public:
    MeasureIndex() = default;
    MeasureIndex(const ArcSet& arcs, double theta0);

    // Pi_n(x): normalized measure of I_n between theta0 and x
    double pi(double x) const;
    // arc index (in theta0 order) containing x, enlarged by tol; -1 if none
    int locate(double x, double tol = 0.0) const;
    std::size_t size() const { return start_.size(); }
    // offsets from theta0 in [0,1)
    double start(std::size_t i) const { return start_[i]; }
    double length(std::size_t i) const { return len_[i]; }
    double total() const { return total_; }
    bool full() const { return full_; }

private:
    double theta0_ = 0.0;
    bool full_ = false;
    std::vector<double> start_, len_, cum_;
    double total_ = 0.0;
};

struct PiLevel {
    int n = 0;
    IntervalSystem sys;
    std::vector<Angle> C; // C_n, sorted so that Pi_n(C[i]) = i / d^n
    MeasureIndex index;
};

struct SemiconjTable {
    Angle theta0;
    int D = 2, k = 1, d = 2;
    std::vector<PiLevel> levels;
    double resolution = 1.0; // 1/d^n_max
    std::vector<std::string> log;

    int n_max() const { return static_cast<int>(levels.size()) - 1; }
    const PiLevel& deepest() const { return levels.back(); }
};

// theta0 defaults to the smallest fixed angle of D^k in the deepest level.
SemiconjTable build_pi_table(const std::vector<IntervalSystem>& ladder, int D, const Angle* theta0 = nullptr);
SemiconjTable build_pi_table(const RayTracer& rt, const ComponentSeed& seed, int d, int n_max = 10,
                             const Angle* theta0 = nullptr);

struct PiValue {
    Angle value;
    double err = 0.0;
};
PiValue evaluate_pi(const SemiconjTable& t, const Angle& theta);

struct FiberPoint {
    Angle angle;
    double err = 0.0;
    bool possibly_split = false;
};
std::vector<FiberPoint> fiber(const SemiconjTable& t, const Angle& tau, int depth = -1);

enum class GapKind { minor, major };
enum class Tautness { taut, loose };
enum class OrbitClass { to_taut, periodic, preperiodic_to_periodic, unresolved };
std::string to_string(GapKind k);
std::string to_string(Tautness t);
std::string to_string(OrbitClass c);

struct GapRecord {
    Angle a, b;      // extrapolated limit endpoints
    double length = 0.0;
    GapKind kind = GapKind::minor;
    Tautness tautness = Tautness::loose;
    int multiplicity = 0;
    OrbitClass orbit_class = OrbitClass::unresolved;
    int orbit_steps = 0; // steps until taut / cycle entry, or the depth searched
    int first_level = 0; // first ladder level at which the gap is present
    double crash_s = 0.0;
};

struct CantorGap {
    Angle a, b;
    int multiplicity = 0;
    std::vector<Angle> isolated; // points of I inside the gap
    double confidence = 0.0;     // how clearly the inner points are separated at this resolution
};

struct GapReport {
    std::vector<GapRecord> gaps;
    std::vector<CantorGap> cantor_gaps;
    int multiplicity_total = 0;
    int unresolved = 0;
    bool full_circle = false;
};
GapReport classify_gaps(const SemiconjTable& t, int orbit_depth = 20);

struct DimensionEstimate {
    double estimate = 1.0;
    double ceiling = 1.0;
    bool applicable = true;
};
DimensionEstimate box_dimension_estimate(const SemiconjTable& t);

struct ValenceAudit {
    int max_cardinality = 0;
    int bound = 0;
    bool strict = false; // k = 1
    bool ok = true;
    Angle worst;
    int possibly_split = 0;
};
ValenceAudit valence_audit(const SemiconjTable& t, int depth = 10);

// j with Pi_a = Pi_b + j/(d-1); throws NoRotationMatches
int uniqueness_check(const SemiconjTable& a, const SemiconjTable& b);

} // namespace rayatlas
