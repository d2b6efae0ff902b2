#include "skit/salient.hpp"

#include "skit/textio.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace skit::salient {

std::vector<std::pair<int, int>> threshold_grid(const fusion::VoxelGrid& grid, double threshold) {
    if (!(threshold > 0.5 && threshold < 1.0))
        throw std::invalid_argument("extraction threshold must be in (0.5, 1)");
    std::vector<std::pair<int, int>> cells;
    for (int iy = 0; iy < grid.ny(); ++iy)
        for (int ix = 0; ix < grid.nx(); ++ix)
            if (grid.probability(ix, iy) > threshold) cells.push_back({ix, iy});
    return cells;
}

std::vector<std::vector<int>> euclidean_clusters(std::span<const Vec3> points,
                                                 double max_link_dist) {
    if (max_link_dist <= 0.0) throw std::invalid_argument("link distance must be positive");
    const int n = static_cast<int>(points.size());
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&parent](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    double limit2 = max_link_dist * max_link_dist;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            Vec3 d = points[i] - points[j];
            if (dot(d, d) <= limit2) {
                int ra = find(i), rb = find(j);
                if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
            }
        }
    std::vector<std::vector<int>> clusters;
    std::vector<int> cluster_of(n, -1);
    for (int i = 0; i < n; ++i) {
        int r = find(i);
        if (cluster_of[r] < 0) {
            cluster_of[r] = static_cast<int>(clusters.size());
            clusters.emplace_back();
        }
        clusters[cluster_of[r]].push_back(i);
    }
    return clusters;
}

std::vector<SalientLocation> salient_locations(const fusion::VoxelGrid& grid, double threshold,
                                               double max_link_dist) {
    auto cells = threshold_grid(grid, threshold);
    std::vector<Vec3> centers;
    centers.reserve(cells.size());
    for (const auto& [ix, iy] : cells) centers.push_back(grid.cell_center(ix, iy));

    std::vector<SalientLocation> out;
    for (const auto& members : euclidean_clusters(centers, max_link_dist)) {
        SalientLocation loc;
        Vec3 point_sum{}, center_sum{};
        double prob_sum = 0.0;
        for (int m : members) {
            const auto& [ix, iy] = cells[m];
            loc.cells.push_back(cells[m]);
            prob_sum += grid.probability(ix, iy);
            center_sum = center_sum + centers[m];
            if (auto mp = grid.mean_point(ix, iy)) {
                point_sum = point_sum + *mp * static_cast<double>(grid.point_count(ix, iy));
                loc.point_count += grid.point_count(ix, iy);
            }
        }
        loc.cell_count = static_cast<int>(members.size());
        loc.probability = prob_sum / loc.cell_count;
        loc.position = loc.point_count > 0 ? point_sum * (1.0 / loc.point_count)
                                           : center_sum * (1.0 / loc.cell_count);
        out.push_back(std::move(loc));
    }
    return out;
}

std::string salient_csv(std::span<const SalientLocation> locations) {
    std::ostringstream out;
    out << "x,y,z,probability,cell_count,point_count\n";
    for (const auto& loc : locations) {
        out << fmt_double(loc.position.x, 12) << ',' << fmt_double(loc.position.y, 12) << ','
            << fmt_double(loc.position.z, 12) << ',' << fmt_double(loc.probability, 12) << ','
            << loc.cell_count << ',' << loc.point_count << "\n";
    }
    return out.str();
}

} // namespace skit::salient
