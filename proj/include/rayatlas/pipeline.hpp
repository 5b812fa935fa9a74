#pragma once

#include "rayatlas/io.hpp"
#include "rayatlas/render.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rayatlas {

struct RunConfig {
    std::filesystem::path poly;
    // seed, k, d fall back to the polynomial file, then to 0, 1, 2
    std::optional<cplx> seed;
    std::optional<int> k, d;
    int n_max = 10;
    double s0_factor = 0.9; // base level at s0_factor * s*
    int orbit_depth = 20;
    int valence_depth = 10;
    int n2 = 0;             // escaping critical values not attached to minimal ghost sectors
    TraceOptions trace;
    double coland_tol = 1e-4;
    std::filesystem::path out_dir = "rayatlas-out";
    std::filesystem::path cache_dir; // empty: no cache
    bool image = true;
    int width = 600, height = 600;
    int max_iter = 2000;
    int threads = 0;

    void validate() const;
};

// keys are the kebab-case flag names ("n-max", "s-min", ...); unknown keys are rejected
void apply_json(RunConfig& c, const json& j);
json to_json(const RunConfig& c);

// RAYATLAS_CACHE, or empty
std::filesystem::path cache_dir_from_env();

// Content-addressed JSON store; single writer per key, files replaced atomically.
class Cache {
public:
    Cache() = default;
    explicit Cache(std::filesystem::path dir) : dir_(std::move(dir)) {}
    bool enabled() const { return !dir_.empty(); }
    std::optional<json> get(const std::string& kind, const std::string& key) const;
    void put(const std::string& kind, const std::string& key, const json& value) const;
    std::filesystem::path path(const std::string& kind, const std::string& key) const;

private:
    std::filesystem::path dir_;
};

RayTrace cached_trace(const RayTracer& rt, const Cache& cache, const Angle& theta, Side side, const TraceOptions& opt);

struct Ladder {
    SStar s_star;
    std::vector<IntervalSystem> levels;
    bool from_cache = false;
};
Ladder cached_ladder(const RayTracer& rt, const Cache& cache, const ComponentSeed& seed, int d, int n_max, double s0_factor);

// Builders shared by the command line tool and the Python module.
json trace_report(const RayTracer& rt, const Cache& cache, const Angle& theta, Side side, const TraceOptions& opt);
json angle_set_report(const RayTracer& rt, const Cache& cache, const ComponentSeed& seed, int d, int levels,
                      double s0_factor, std::optional<double> potential);
json semiconj_report(const RayTracer& rt, const Cache& cache, const ComponentSeed& seed, int d, int n_max,
                     double s0_factor, const std::vector<Angle>& taus, int orbit_depth = 20, int valence_depth = 10);
json portrait_report(const PortraitInput& in);
json surgery_report(const ModelInput& in);
json verify_report(const ModelInput& in, const RayTracer& rt, const ComponentSeed& seed, const VerifyOptions& opt);

struct Overlay {
    std::vector<std::pair<Angle, Side>> rays;
    std::vector<double> levels;
    bool critical = true;
};
Image render_with_overlays(const RayTracer& rt, const Cache& cache, const Frame& f, const Overlay& o,
                           const TraceOptions& topt, const RenderOptions& ropt);
// view from the file, else a frame around the escape disc
Frame default_frame(const PolynomialFile& pf, int width, int height);

struct AnalyzeResult {
    json report;
    std::string text;
    std::vector<std::filesystem::path> files; // written, relative to out_dir
};
// equipot -> semiconj -> portrait -> audits; each stage is persisted under out_dir/stages
AnalyzeResult run_analyze(const RunConfig& c);

// one "path = value" line per leaf of the document
std::string text_summary(const json& j);

} // namespace rayatlas
