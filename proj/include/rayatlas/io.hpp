#pragma once

#include "rayatlas/equipot.hpp"
#include "rayatlas/portrait.hpp"
#include "rayatlas/raytrace.hpp"
#include "rayatlas/semiconj.hpp"
#include "rayatlas/surgery.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rayatlas {

using json = nlohmann::json;

// Schema ids written into every document; bump the suffix on incompatible changes.
namespace schema {
inline constexpr const char* trace = "rayatlas.trace/1";
inline constexpr const char* angle_set = "rayatlas.angle-set/1";
inline constexpr const char* interval_system = "rayatlas.interval-system/1";
inline constexpr const char* semiconj = "rayatlas.semiconj/1";
inline constexpr const char* portrait = "rayatlas.portrait/1";
inline constexpr const char* surgery_model = "rayatlas.surgery-model/1";
inline constexpr const char* verify = "rayatlas.verify/1";
inline constexpr const char* report = "rayatlas.report/1";
inline constexpr const char* stage = "rayatlas.stage/1";
inline constexpr const char* error = "rayatlas.error/1";
} // namespace schema

struct View {
    cplx center{0.0, 0.0};
    double radius = 2.0; // half width of the frame
};

struct PolynomialFile {
    std::string name;
    std::vector<cplx> raw; // as written, constant first
    Polynomial poly;       // monic conjugate
    cplx scale{1.0, 0.0};  // w = scale * z takes file coordinates to poly coordinates
    // optional metadata, in file coordinates
    std::optional<cplx> seed;
    std::optional<int> k, d;
    std::optional<View> view;
};

PolynomialFile polynomial_from_json(const json& j);
PolynomialFile load_polynomial(const std::filesystem::path& path);

// exact angles as "p/q", float angles as {"value", "err"}
json to_json(const Angle& a);
// accepts "p/q", "0.25", a number, {"num","den"} or {"value","err"}
Angle angle_from_json(const json& j);
json to_json(cplx z);
cplx cplx_from_json(const json& j);

json to_json(const RayTrace& t);
RayTrace trace_from_json(const json& j);

json to_json(const IntervalSystem& s);
IntervalSystem interval_system_from_json(const json& j);

json to_json(const SStar& s);
json to_json(const GapReport& g);
json to_json(const DimensionEstimate& d);
json to_json(const ValenceAudit& v);
json to_json(const std::vector<FiberPoint>& f);
// levels (C_n sizes, measures), without the per-level arc lists
json summary_json(const SemiconjTable& t);

struct PortraitInput {
    int D = 2, k = 1;
    std::vector<std::vector<Angle>> lambda;
    std::vector<std::vector<Side>> turn_sides;
    std::vector<SectorRef> essential;
    std::optional<int> d, N1, N2;
};
PortraitInput portrait_from_json(const json& j);

json to_json(const OrbitPortrait& p);
json to_json(const SectorSet& s);
json to_json(const AuditReport& a);

struct ModelInput {
    int D = 3, d = 2, j = 0;
    std::vector<WakeSide> choices;
};
ModelInput model_from_json(const json& j);

json to_json(const SurgeryModel& m);
json to_json(const VerificationReport& r);

std::string read_file(const std::filesystem::path& path);
json read_json(const std::filesystem::path& path);
// temp file in the same directory, then rename
void write_atomic(const std::filesystem::path& path, const std::string& content);
void write_json(const std::filesystem::path& path, const json& j);
// stable text form used for hashing and output
std::string dump(const json& j);
// 64-bit FNV-1a, hex
std::string content_hash(const std::string& text);

} // namespace rayatlas
