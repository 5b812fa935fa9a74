#pragma once

#include "rayatlas/angles.hpp"
#include "rayatlas/equipot.hpp"
#include "rayatlas/raytrace.hpp"

#include <string>
#include <vector>

namespace rayatlas {

enum class WakeSide { left, right };
std::string to_string(WakeSide s);
WakeSide parse_wake_side(const std::string& s);

struct Wake {
    int i = 0;           // index of the fixed angle theta_i = i/(D-1)
    WakeSide side = WakeSide::right;
    Angle theta;         // theta_i
    Angle theta_prime;   // theta_i +- 1/D
    Arc J;               // open interval between them, counterclockwise
};

struct SurgeryModel {
    int D = 3, d = 2;
    int j = 0;           // first fixed angle of the fiber window, after normalization
    int j_requested = 0;
    std::vector<Wake> wakes;
    std::vector<Angle> predicted_fiber;     // theta_j, ..., theta_{j+D-d} counterclockwise
    std::vector<Angle> isolated_candidates; // interior members of the fiber
    std::vector<std::string> notes;
};

// Fixed angle theta_i = i/(D-1), index taken mod D-1.
Angle fixed_angle(int D, int i);

// choices[m] picks the side of J_{j+1+m}, m = 0..D-d-1.  When the wakes do not fit in
// ]theta_j, theta_{j+D-d}[ but do fit in another window of D-d+1 consecutive fixed angles, j is
// moved there and a note is recorded.  Throws InvalidChoices otherwise.
SurgeryModel build_model(int D, int d, int j, const std::vector<WakeSide>& choices);

// All admissible collections for the window starting at theta_j, as (index, side) lists.
std::vector<std::vector<std::pair<int, WakeSide>>> enumerate_collections(int D, int d, int j);

// alpha_1..alpha_n: alpha_n = alpha_0 +- (1/D + ... + 1/D^n), sign by the side of the wake.
std::vector<Angle> wake_exhaustion(int D, const Angle& alpha0, WakeSide side, int n_max);
std::vector<Angle> wake_exhaustion(const SurgeryModel& m, int i, int n_max);

struct VerificationLine {
    std::string property;
    bool pass = true;
    std::string detail;
};

struct VerificationReport {
    std::vector<VerificationLine> lines;
    bool ok = true;
    std::vector<cplx> landing; // landing points of the fiber rays, in predicted_fiber order
};

struct VerifyOptions {
    double angle_tol = 1e-6;
    double coland_tol = 1e-4;
    double s_min = 1e-8;
    bool check_semiconj = true;
    int n_max = 8;
};

VerificationReport verify_against_polynomial(const SurgeryModel& m, const RayTracer& rt, const ComponentSeed& seed,
                                             const VerifyOptions& opt = {});
// Throws VerificationFailed listing the failed properties.
void require_verified(const VerificationReport& r);

} // namespace rayatlas
