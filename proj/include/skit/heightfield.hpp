#pragma once

#include "skit/vec.hpp"

#include <optional>
#include <vector>

namespace skit {

// Regular-grid terrain height samples with bilinear interpolation between
// sample points. Sample (ix, iy) sits at (x0 + ix*res, y0 + iy*res).
struct HeightField {
    double x0 = 0.0;
    double y0 = 0.0;
    double res = 1.0;
    int nx = 2;
    int ny = 2;
    std::vector<double> samples; // nx * ny, row-major in iy

    static HeightField flat(double x0, double y0, double width, double height, double res,
                            double z);

    double width() const { return (nx - 1) * res; }
    double depth() const { return (ny - 1) * res; }
    bool contains(double x, double y) const;
    double height(double x, double y) const; // clamped to the border outside

    double& at(int ix, int iy) { return samples[ix + static_cast<size_t>(iy) * nx]; }
    double at(int ix, int iy) const { return samples[ix + static_cast<size_t>(iy) * nx]; }

    // Raises a rounded ridge along the segment (ax,ay)-(bx,by).
    void add_ridge(double ax, double ay, double bx, double by, double peak, double half_width);
};

// First intersection of a ray with the terrain surface: fixed-step march
// followed by bisection refinement down to a 1 cm height tolerance. Returns
// the point on the ray, or nullopt when the ray leaves the field or exceeds
// max_range without crossing the surface.
std::optional<Vec3> raycast_terrain(const HeightField& hf, const Vec3& origin, const Vec3& dir,
                                    double step, double max_range = 10000.0);

} // namespace skit
