#pragma once

#include "skit/fusion.hpp"
#include "skit/vec.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace skit::salient {

struct SalientLocation {
    Vec3 position;            // mean of recorded detection points, else mean cell centre
    double probability = 0.0; // mean probability of the cluster's cells
    int cell_count = 0;
    int point_count = 0;      // contributing detection points
    std::vector<std::pair<int, int>> cells;
};

// Cells with probability strictly above the threshold; threshold in (0.5, 1).
std::vector<std::pair<int, int>> threshold_grid(const fusion::VoxelGrid& grid, double threshold);

// Single-linkage connected components: two points share a cluster iff they
// are joined by a chain of links each <= max_link_dist. Clusters are ordered
// by their smallest member index, members ascending.
std::vector<std::vector<int>> euclidean_clusters(std::span<const Vec3> points,
                                                 double max_link_dist);

std::vector<SalientLocation> salient_locations(const fusion::VoxelGrid& grid, double threshold,
                                               double max_link_dist);

std::string salient_csv(std::span<const SalientLocation> locations);

} // namespace skit::salient
