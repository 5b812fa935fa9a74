#include <doctest.h>

#include "rayatlas/error.hpp"
#include "rayatlas/io.hpp"

#include <filesystem>

using namespace rayatlas;
namespace fs = std::filesystem;

namespace {
const fs::path kData = RAYATLAS_DATA_DIR;

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("rayatlas_test_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

template <class F>
std::string code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}
} // namespace

TEST_CASE("angles in json") {
    CHECK(to_json(Angle::rational(1, 3)) == json("1/3"));
    CHECK(angle_from_json(json("2/6")) == Angle::rational(1, 3));
    CHECK(angle_from_json(json{{"num", 19}, {"den", 26}}) == Angle::rational(19, 26));
    CHECK(angle_from_json(json{{"num", "123456789012345678901"}, {"den", "1000000000000000000000"}}).exact());
    Angle f = Angle::approx(0.125, 1e-9);
    CHECK(angle_from_json(to_json(f)) == f);
    CHECK(angle_from_json(json(0.25)).value() == 0.25);
    CHECK(code_of([] { angle_from_json(json::array()); }) == "InvalidInput");
}

TEST_CASE("polynomial files") {
    auto f5 = load_polynomial(kData / "fig5.json");
    CHECK(f5.poly.degree() == 3);
    CHECK(f5.scale == cplx(1.0, 0.0));
    CHECK(f5.poly.coeffs()[2] == cplx(0.31629, -1.92522));
    REQUIRE(f5.d);
    CHECK(*f5.d == 2);
    CHECK(f5.view.has_value());

    // 2z^2 - z: conjugating by w = 2z gives w^2 - w
    auto g = polynomial_from_json(json{{"coeffs", {{0, 0}, {-1, 0}, {2, 0}}}});
    CHECK(std::abs(g.scale - 2.0) < 1e-15);
    for (cplx z : {cplx(0.3, 0.1), cplx(-1.2, 0.7)}) {
        cplx Pz = 2.0 * z * z - z;
        CHECK(std::abs(eval(g.poly, g.scale * z) - g.scale * Pz) < 1e-13);
    }
    CHECK(code_of([] { polynomial_from_json(json{{"coef", json::array()}}); }) == "InvalidInput");
    CHECK(code_of([] { polynomial_from_json(json{{"coeffs", {{1, 0}, {1, 0}}}}); }) == "InvalidPolynomial");
    CHECK(code_of([] { load_polynomial("/nonexistent/poly.json"); }) == "IoError");
}

TEST_CASE("trace documents round trip") {
    RayTracer rt(Polynomial({0.0, 0.0, cplx(0.3162050828743217, -1.9255222181353253), 1.0}));
    RayTrace t = rt.trace(Angle::rational(1, 2), Side::plus);
    json j = to_json(t);
    CHECK(j["schema"] == schema::trace);
    CHECK(j["crashes"].size() >= 1);
    for (const char* key : {"angle", "side", "samples", "crashes", "landing"}) CHECK(j.contains(key));
    RayTrace back = trace_from_json(json::parse(dump(j)));
    CHECK(dump(to_json(back)) == dump(j));
    CHECK(back.samples.size() == t.samples.size());
    CHECK(back.samples[17].z == t.samples[17].z);
}

TEST_CASE("interval systems round trip") {
    IntervalSystem s;
    s.s = 0.01;
    s.arcs = ArcSet({Arc{Angle::rational(1, 10), Angle::rational(2, 5)}, Arc{Angle::approx(0.5, 1e-9), Angle::rational(9, 10)}});
    s.gaps = {Gap{Angle::rational(2, 5), Angle::approx(0.5, 1e-9), 0.02}};
    s.notes = {"x"};
    json j = to_json(s);
    IntervalSystem b = interval_system_from_json(json::parse(dump(j)));
    CHECK(dump(to_json(b)) == dump(j));
    CHECK(b.measure() == doctest::Approx(0.7));

    IntervalSystem full;
    full.arcs = ArcSet::full_circle();
    full.degenerate = true;
    CHECK(interval_system_from_json(to_json(full)).arcs.full());
}

TEST_CASE("portrait and model files") {
    auto p = portrait_from_json(read_json(kData / "portrait_period3.json"));
    CHECK(p.D == 3);
    CHECK(p.k == 3);
    CHECK(p.lambda.size() == 3);
    CHECK(p.lambda[0][2] == Angle::rational(19, 26));
    CHECK(p.turn_sides[0][2] == Side::plus);
    REQUIRE(p.essential.size() == 1);
    CHECK(p.essential[0].b == Angle::rational(2, 26));
    CHECK(p.N1.value() == 1);

    auto m = model_from_json(read_json(kData / "model_d6.json"));
    CHECK(m.D == 6);
    CHECK(m.choices.size() == 4);
    CHECK(m.choices[2] == WakeSide::right);
    CHECK(code_of([] { model_from_json(json{{"D", 4}, {"d", 2}, {"choices", {"up"}}}); }) == "InvalidArgument");
    CHECK(code_of([] { model_from_json(json{{"d", 2}}); }) == "InvalidInput");
}

TEST_CASE("atomic writes and hashes") {
    fs::path dir = scratch("atomic");
    fs::path f = dir / "sub" / "a.json";
    write_json(f, json{{"x", 1}});
    write_json(f, json{{"x", 2}});
    CHECK(read_json(f)["x"] == 2);
    int entries = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir)) entries += e.is_regular_file();
    CHECK(entries == 1);
    CHECK(content_hash("") == "cbf29ce484222325");
    CHECK(content_hash("a") == "af63dc4c8601ec8c");
    CHECK(content_hash("a") != content_hash("b"));
    fs::remove_all(dir);
}
