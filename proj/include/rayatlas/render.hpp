#pragma once

#include "rayatlas/io.hpp"
#include "rayatlas/polycore.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace rayatlas {

using Rgb = std::array<std::uint8_t, 3>;

struct Image {
    int width = 0, height = 0;
    std::vector<std::uint8_t> rgb; // row-major, top row first

    Image() = default;
    Image(int w, int h, Rgb fill = {0, 0, 0});
    Rgb get(int x, int y) const;
    void set(int x, int y, Rgb c);
};

// Maps the plane to pixels: view.radius is half the frame width, y points up.
struct Frame {
    View view;
    int width = 600, height = 600;

    double pixel_size() const { return 2.0 * view.radius / width; }
    cplx to_plane(double px, double py) const;
    // fractional pixel coordinates of z (x right, y down)
    std::pair<double, double> to_pixel(cplx z) const;
};

struct RenderOptions {
    int max_iter = 2000;
    int threads = 0;            // 0: hardware concurrency
    std::vector<double> levels; // equipotentials G = s
    Rgb filled = {0, 0, 0};
    Rgb level_color = {255, 255, 255};
};

// Escape-time picture: K_P in the filled color, the basin shaded by log G in bands of
// one potential level.  Output depends only on the inputs, not on the thread count.
Image render_escape(const Polynomial& p, const Frame& f, const RenderOptions& opt = {});

void draw_polyline(Image& img, const Frame& f, const std::vector<cplx>& pts, Rgb c);
void draw_disc(Image& img, const Frame& f, cplx z, double radius_px, Rgb c);

std::string to_ppm(const Image& img);
Image from_ppm(const std::string& bytes);

} // namespace rayatlas
