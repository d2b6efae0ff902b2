#include "skit/heightfield.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace skit {

HeightField HeightField::flat(double x0, double y0, double width, double height, double res,
                              double z) {
    HeightField hf;
    hf.x0 = x0;
    hf.y0 = y0;
    hf.res = res;
    hf.nx = std::max(2, static_cast<int>(std::ceil(width / res)) + 1);
    hf.ny = std::max(2, static_cast<int>(std::ceil(height / res)) + 1);
    hf.samples.assign(static_cast<size_t>(hf.nx) * hf.ny, z);
    return hf;
}

bool HeightField::contains(double x, double y) const {
    return x >= x0 && x <= x0 + width() && y >= y0 && y <= y0 + depth();
}

double HeightField::height(double x, double y) const {
    double gx = std::clamp((x - x0) / res, 0.0, static_cast<double>(nx - 1));
    double gy = std::clamp((y - y0) / res, 0.0, static_cast<double>(ny - 1));
    int ix = std::min(static_cast<int>(gx), nx - 2);
    int iy = std::min(static_cast<int>(gy), ny - 2);
    double fx = gx - ix;
    double fy = gy - iy;
    double h00 = at(ix, iy), h10 = at(ix + 1, iy);
    double h01 = at(ix, iy + 1), h11 = at(ix + 1, iy + 1);
    return (1 - fx) * (1 - fy) * h00 + fx * (1 - fy) * h10 + (1 - fx) * fy * h01 + fx * fy * h11;
}

void HeightField::add_ridge(double ax, double ay, double bx, double by, double peak,
                            double half_width) {
    Vec3 a{ax, ay, 0}, b{bx, by, 0};
    Vec3 ab = b - a;
    double len2 = dot(ab, ab);
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            Vec3 p{x0 + ix * res, y0 + iy * res, 0};
            double t = len2 > 0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
            double d = norm(p - (a + ab * t));
            if (d < half_width) {
                double w = 0.5 * (1.0 + std::cos(M_PI * d / half_width));
                at(ix, iy) += peak * w;
            }
        }
    }
}

std::optional<Vec3> raycast_terrain(const HeightField& hf, const Vec3& origin, const Vec3& dir,
                                    double step, double max_range) {
    if (step <= 0.0) throw std::invalid_argument("raycast step must be positive");
    constexpr double kTolerance = 0.01; // meters

    auto above = [&hf](const Vec3& p) { return p.z - hf.height(p.x, p.y); };

    double t_prev = 0.0;
    Vec3 p_prev = origin;
    bool started_inside = hf.contains(origin.x, origin.y);
    if (started_inside && above(origin) <= 0.0) return origin; // already at/below the surface

    for (double t = step; t <= max_range; t += step) {
        Vec3 p = origin + dir * t;
        bool inside = hf.contains(p.x, p.y);
        if (!inside) {
            if (started_inside) return std::nullopt; // left a convex domain, no re-entry
            t_prev = t;
            p_prev = p;
            continue;
        }
        started_inside = true;
        if (above(p) <= 0.0) {
            // bisection refinement on [t_prev, t]
            double lo = t_prev, hi = t;
            for (int i = 0; i < 64; ++i) {
                double mid = 0.5 * (lo + hi);
                Vec3 pm = origin + dir * mid;
                double a = hf.contains(pm.x, pm.y) ? above(pm) : 1.0;
                (a <= 0.0 ? hi : lo) = mid;
                if (std::fabs(a) < kTolerance && a <= 0.0) break;
            }
            return origin + dir * hi;
        }
        t_prev = t;
        p_prev = p;
    }
    (void)p_prev;
    return std::nullopt;
}

} // namespace skit
