#pragma once

#include "rayatlas/angles.hpp"
#include "rayatlas/raytrace.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <string>
#include <vector>

namespace rayatlas {

using Rational = boost::multiprecision::cpp_rational;

struct SemiconjTable;

struct OrbitPortrait {
    int D = 2;
    int k = 1;
    int orbit_length = 1; // k * ell
    int ell = 1;
    std::vector<std::vector<Angle>> lambda; // Lambda(z_i), sorted in [0,1)
    std::vector<std::vector<Side>> turn_sides;
    int rot_p = 0, rot_q = 1;               // combinatorial rotation number of the first return map
    int ray_period = 1;                     // common period of the angles under D
    std::vector<std::vector<Angle>> cycles; // cycles of D on the union of the Lambda sets
};

// Throws InconsistentPortrait unless D maps Lambda(z_i) bijectively onto Lambda(z_{i+1}) and all
// angles are exact and periodic.
OrbitPortrait build_portrait(int D, int k, std::vector<std::vector<Angle>> lambda,
                             std::vector<std::vector<Side>> turn_sides = {});

enum class SectorKind { essential, ghost, unknown };
std::string to_string(SectorKind k);

struct Sector {
    int base = 0;
    Angle a, b;
    Rational length; // 1 when Lambda(z_i) is a single angle
    int weight = 0;  // floor(D |S|)
    SectorKind kind = SectorKind::unknown;
    bool minimal = false;   // ghost sector containing no orbit point
    std::vector<int> contains; // orbit indices j whose rays lie inside ]a,b[
    int image = -1;            // index of sigma(S)
    int preimage = -1;
    int cycle = -1;
    // a critical point on the a-ray (b-ray) would be attached: a turns left, b turns right
    bool a_attachable = false, b_attachable = false;
};

struct SectorRef {
    int base = 0;
    Angle a, b;
};

struct SectorSet {
    std::vector<Sector> sectors;
    std::vector<std::vector<int>> cycles; // sigma-cycles, as indices
    int essential_cycles = 0;
    int ghost_cycles = 0;
    std::vector<std::string> notes;

    int find(int base, const Angle& a, const Angle& b) const;
    int count(SectorKind k) const;
    int minimal_count() const;
};

// Essential sectors are given up to sigma: every sector on the sigma-cycle of a listed sector is
// essential, every other sector is ghost.  An empty list leaves all kinds unknown.
SectorSet sectors_of(const OrbitPortrait& p, const std::vector<SectorRef>& essential = {});
// Kinds taken from Pi: a sector at z_0 is essential when ]a,b[ carries Pi-mass above the table
// resolution, then propagated along sigma.
SectorSet sectors_of(const OrbitPortrait& p, const SemiconjTable& t);

// Fiber sizes at z_0: runs of rays joined by ghost sectors.
std::vector<int> fiber_sizes(const SectorSet& s, int base = 0);

// Sum of weights of the sigma-preimages of minimal ghost sectors.  Overcounts when a preimage
// holds critical points of the orbit components or two critical points share a value.
int estimate_n1(const SectorSet& s);

struct AuditLine {
    std::string name;
    bool pass = true;
    std::string lhs, rhs;
};

struct PreperiodicCount {
    int in_gap = 0;    // #([a,b] ∩ I)
    int in_image = 0;  // #([a_n,b_n] ∩ I)
};

struct AuditReport {
    std::vector<AuditLine> lines;
    bool ok = true;
};

AuditReport audit_counts(const OrbitPortrait& p, const SectorSet& s, int d, int N1, int N2,
                         const std::vector<PreperiodicCount>& preperiodic = {});

// Chords joining angles of the same Lambda set never cross chords of another set.
bool unlinked(const OrbitPortrait& p);

} // namespace rayatlas
