#include <doctest.h>

#include "rayatlas/pipeline.hpp"
#include "rayatlas/render.hpp"

#include <cmath>

using namespace rayatlas;

TEST_CASE("unit disk for z^2") {
    Polynomial p({0.0, 0.0, 1.0});
    Frame f;
    f.view = {{0.0, 0.0}, 1.5};
    f.width = f.height = 121;
    Image img = render_escape(p, f);
    CHECK(img.get(60, 60) == Rgb{0, 0, 0});
    // the boundary along the middle row sits at |x| = 1, i.e. 40 pixels from the center
    int first = -1, last = -1;
    for (int x = 0; x < f.width; ++x)
        if (img.get(x, 60) == Rgb{0, 0, 0}) {
            if (first < 0) first = x;
            last = x;
        }
    CHECK(std::abs(first - 20) <= 1);
    CHECK(std::abs(last - 100) <= 1);
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) {
            cplx z = f.to_plane(x, y);
            if (std::abs(std::abs(z) - 1.0) > 2 * f.pixel_size()) CHECK((img.get(x, y) == Rgb{0, 0, 0}) == (std::abs(z) < 1.0));
        }
}

TEST_CASE("pixel mapping") {
    Frame f;
    f.view = {{1.0, -2.0}, 0.5};
    f.width = 200;
    f.height = 100;
    auto [x, y] = f.to_pixel(f.to_plane(13, 71));
    CHECK(x == doctest::Approx(13));
    CHECK(y == doctest::Approx(71));
    auto [cx, cy] = f.to_pixel(f.view.center);
    CHECK(cx == doctest::Approx(99.5));
    CHECK(cy == doctest::Approx(49.5));
    CHECK(f.to_plane(0, 0).imag() > f.view.center.imag());
}

TEST_CASE("rendering is deterministic and round trips through P6") {
    Polynomial p({0.0, 0.0, cplx(0.3162050828743217, -1.9255222181353253), 1.0});
    Frame f;
    f.view = {{-0.13, 0.6}, 1.6};
    f.width = 80;
    f.height = 60;
    RenderOptions one, many;
    one.threads = 1;
    many.threads = 7;
    one.levels = many.levels = {0.01};
    std::string a = to_ppm(render_escape(p, f, one));
    std::string b = to_ppm(render_escape(p, f, many));
    CHECK(a == b);
    CHECK(a.rfind("P6\n80 60\n255\n", 0) == 0);
    CHECK(a.size() == std::string("P6\n80 60\n255\n").size() + 80 * 60 * 3);
    Image back = from_ppm(a);
    CHECK(to_ppm(back) == a);
}

TEST_CASE("landmarks of the cubic figure") {
    PolynomialFile pf = load_polynomial(std::string(RAYATLAS_DATA_DIR) + "/fig5_realized.json");
    RayTracer rt(pf.poly);
    Frame f = default_frame(pf, 300, 300);
    Overlay o;
    o.rays = {{Angle::rational(0, 1), Side::smooth}};
    RenderOptions ro;
    ro.max_iter = 500;
    Image img = render_with_overlays(rt, Cache(), f, o, {}, ro);

    auto near_color = [&](cplx z, Rgb c) {
        auto [px, py] = f.to_pixel(z);
        const int tol = static_cast<int>(0.01 * f.width); // 1% of the frame
        for (int dy = -tol; dy <= tol; ++dy)
            for (int dx = -tol; dx <= tol; ++dx) {
                int x = static_cast<int>(std::lround(px)) + dx, y = static_cast<int>(std::lround(py)) + dy;
                if (x >= 0 && y >= 0 && x < img.width && y < img.height && img.get(x, y) == c) return true;
            }
        return false;
    };
    RayTrace r0 = rt.trace(Angle::rational(0, 1), Side::smooth);
    REQUIRE(r0.landing);
    cplx beta = *r0.landing;
    cplx omega;
    for (const auto& c : rt.critical())
        if (c.escaping) omega = c.location;
    auto [bx, by] = f.to_pixel(beta);
    CHECK(bx > 0);
    CHECK(bx < img.width);
    CHECK(by > 0);
    CHECK(by < img.height);
    CHECK(near_color(beta, {60, 200, 90}));
    CHECK(near_color(omega, {220, 30, 30}));
}
