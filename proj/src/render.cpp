#include "rayatlas/render.hpp"
#include "rayatlas/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

namespace rayatlas {

Image::Image(int w, int h, Rgb fill) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3) {
    if (w <= 0 || h <= 0) throw Error("InvalidArgument", "image size must be positive");
    for (std::size_t i = 0; i < rgb.size(); i += 3) std::copy(fill.begin(), fill.end(), rgb.begin() + i);
}

Rgb Image::get(int x, int y) const {
    std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

void Image::set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    rgb[i] = c[0];
    rgb[i + 1] = c[1];
    rgb[i + 2] = c[2];
}

cplx Frame::to_plane(double px, double py) const {
    const double h = pixel_size();
    return {view.center.real() + (px + 0.5 - 0.5 * width) * h, view.center.imag() - (py + 0.5 - 0.5 * height) * h};
}

std::pair<double, double> Frame::to_pixel(cplx z) const {
    const double h = pixel_size();
    return {(z.real() - view.center.real()) / h + 0.5 * width - 0.5, -(z.imag() - view.center.imag()) / h + 0.5 * height - 0.5};
}

namespace {

Rgb shade(double g, int D) {
    // band index: potential levels D^-n
    double t = -std::log(g) / std::log(static_cast<double>(D));
    double band = t - std::floor(t);
    double base = std::clamp(0.15 + 0.07 * t, 0.15, 0.85);
    double v = base * (0.8 + 0.2 * band);
    auto u = static_cast<std::uint8_t>(std::lround(255.0 * v));
    auto w = static_cast<std::uint8_t>(std::lround(255.0 * std::min(1.0, v * 1.15)));
    return {u, u, w};
}

} // namespace

Image render_escape(const Polynomial& p, const Frame& f, const RenderOptions& opt) {
    Image img(f.width, f.height);
    std::vector<double> G(static_cast<std::size_t>(f.width) * f.height, 0.0);
    auto row = [&](int y) {
        for (int x = 0; x < f.width; ++x) {
            GreenValue g = green(p, f.to_plane(x, y), 1e-15, opt.max_iter);
            G[static_cast<std::size_t>(y) * f.width + x] = g.orbit == Orbit::escaped ? g.value : 0.0;
        }
    };
    int nt = opt.threads > 0 ? opt.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    nt = std::min(nt, f.height);
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t)
        pool.emplace_back([&, t] {
            for (int y = t; y < f.height; y += nt) row(y);
        });
    for (auto& th : pool) th.join();

    const int D = p.degree();
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) {
            double g = G[static_cast<std::size_t>(y) * f.width + x];
            img.set(x, y, g > 0 ? shade(g, D) : opt.filled);
        }
    // level curves: sign change of G - s towards the right or lower neighbour
    for (double s : opt.levels)
        for (int y = 0; y + 1 < f.height; ++y)
            for (int x = 0; x + 1 < f.width; ++x) {
                double a = G[static_cast<std::size_t>(y) * f.width + x] - s;
                double b = G[static_cast<std::size_t>(y) * f.width + x + 1] - s;
                double c = G[static_cast<std::size_t>(y + 1) * f.width + x] - s;
                if ((a < 0) != (b < 0) || (a < 0) != (c < 0)) img.set(x, y, opt.level_color);
            }
    return img;
}

void draw_polyline(Image& img, const Frame& f, const std::vector<cplx>& pts, Rgb c) {
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        auto [x0, y0] = f.to_pixel(pts[i]);
        auto [x1, y1] = f.to_pixel(pts[i + 1]);
        double len = std::max(std::fabs(x1 - x0), std::fabs(y1 - y0));
        if (!std::isfinite(len)) continue;
        // skip segments far outside the frame
        if (std::max(x0, x1) < -1 || std::min(x0, x1) > img.width || std::max(y0, y1) < -1 || std::min(y0, y1) > img.height)
            continue;
        int n = static_cast<int>(std::ceil(len)) + 1;
        for (int k = 0; k <= n; ++k) {
            double t = static_cast<double>(k) / n;
            int x = static_cast<int>(std::lround(x0 + t * (x1 - x0))), y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
            img.set(x, y, c);
            img.set(x + 1, y, c);
            img.set(x, y + 1, c);
        }
    }
}

void draw_disc(Image& img, const Frame& f, cplx z, double radius_px, Rgb c) {
    auto [cx, cy] = f.to_pixel(z);
    int r = static_cast<int>(std::ceil(radius_px));
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            int x = static_cast<int>(std::lround(cx)) + dx, y = static_cast<int>(std::lround(cy)) + dy;
            if (dx * dx + dy * dy <= radius_px * radius_px) img.set(x, y, c);
        }
}

std::string to_ppm(const Image& img) {
    std::string head = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    return head + std::string(img.rgb.begin(), img.rgb.end());
}

Image from_ppm(const std::string& bytes) {
    std::istringstream in(bytes);
    std::string magic;
    int w = 0, h = 0, maxv = 0;
    in >> magic >> w >> h >> maxv;
    if (magic != "P6" || w <= 0 || h <= 0 || maxv != 255) throw Error("InvalidInput", "not an 8-bit P6 image");
    in.get();
    Image img(w, h);
    in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) throw Error("InvalidInput", "truncated P6 image");
    return img;
}

} // namespace rayatlas
