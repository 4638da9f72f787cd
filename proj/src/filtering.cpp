#include "mvsfuse/filtering.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_set>

#include "mvsfuse/error.hpp"
#include "mvsfuse/kd_tree.hpp"
#include "mvsfuse/parallel.hpp"

namespace mvsfuse {
namespace {

double srgb_to_linear(double c8) {
    const double c = c8 / 255.0;
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
    constexpr double delta = 6.0 / 29.0;
    return t > delta * delta * delta ? std::cbrt(t)
                                     : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

PointCloud select_points(const PointCloud& cloud, const std::vector<char>& keep, bool value) {
    PointCloud out;
    out.source = cloud.source;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (keep[i] != value) continue;
        out.positions.push_back(cloud.positions[i]);
        if (cloud.has_colors()) out.colors.push_back(cloud.colors[i]);
        if (cloud.has_normals()) out.normals.push_back(cloud.normals[i]);
        if (!cloud.point_sources.empty()) out.point_sources.push_back(cloud.point_sources[i]);
    }
    return out;
}

}  // namespace

Eigen::Vector3d rgb_to_lab(const Eigen::Vector3d& rgb) {
    const double r = srgb_to_linear(rgb[0]);
    const double g = srgb_to_linear(rgb[1]);
    const double b = srgb_to_linear(rgb[2]);

    // sRGB D65 primaries
    const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

    const double fx = lab_f(x / 0.95047);
    const double fy = lab_f(y / 1.0);
    const double fz = lab_f(z / 1.08883);

    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

SkySplit filter_sky(const PointCloud& cloud, const SkyFilterParams& params) {
    if (cloud.empty()) return {};
    if (!cloud.has_colors()) throw MissingColors("filter_sky: cloud has no colors");

    std::vector<char> sky(cloud.size(), 0);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Eigen::Vector3d& c = cloud.colors[i];
        const bool rgb_rule = c[2] >= c[0] + params.blue_dominance_margin &&
                              c[2] >= c[1] + params.blue_dominance_margin &&
                              c.mean() >= params.min_brightness;
        bool lab_rule = false;
        if (!rgb_rule) {
            const Eigen::Vector3d lab = rgb_to_lab(c);
            lab_rule = lab[0] >= params.min_l && lab[2] <= params.max_b;
        }
        sky[i] = rgb_rule || lab_rule;
    }
    return {select_points(cloud, sky, 0), select_points(cloud, sky, 1)};
}

PointCloud filter_outliers(const PointCloud& cloud, const OutlierParams& params) {
    if (!(params.quantile_margin > 0.0 && params.quantile_margin < 0.5)) {
        throw InvalidArgument("filter_outliers: quantile_margin must be in (0, 0.5)");
    }
    if (params.knn < 1) throw InvalidArgument("filter_outliers: knn must be >= 1");
    if (!(params.std_multiplier > 0.0)) {
        throw InvalidArgument("filter_outliers: std_multiplier must be positive");
    }
    const std::size_t k = static_cast<std::size_t>(params.knn);
    if (cloud.size() < k + 1) {
        throw TooFewPoints("filter_outliers: need at least " + std::to_string(k + 1) +
                           " points, got " + std::to_string(cloud.size()));
    }

    std::vector<char> keep(cloud.size(), 1);

    if (params.use_quantile_box) {
        Eigen::Vector3d lo, hi;
        std::vector<double> axis(cloud.size());
        for (int a = 0; a < 3; ++a) {
            for (std::size_t i = 0; i < cloud.size(); ++i) axis[i] = cloud.positions[i][a];
            std::sort(axis.begin(), axis.end());
            const auto n = static_cast<double>(axis.size() - 1);
            const double q_lo = axis[static_cast<std::size_t>(std::floor(params.quantile_margin * n))];
            const double q_hi = axis[static_cast<std::size_t>(std::ceil((1.0 - params.quantile_margin) * n))];
            const double extent = q_hi - q_lo;
            lo[a] = q_lo - 3.0 * extent;
            hi[a] = q_hi + 3.0 * extent;
        }
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const Eigen::Vector3d& p = cloud.positions[i];
            for (int a = 0; a < 3; ++a) {
                if (p[a] < lo[a] || p[a] > hi[a]) {
                    keep[i] = 0;
                    break;
                }
            }
        }
    }

    if (params.use_knn) {
        std::vector<std::size_t> survivors;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            if (keep[i]) survivors.push_back(i);
        }
        // The statistic needs k neighbors besides the point itself.
        if (survivors.size() >= k + 1) {
            std::vector<Eigen::Vector3d> pts(survivors.size());
            for (std::size_t i = 0; i < survivors.size(); ++i) {
                pts[i] = cloud.positions[survivors[i]];
            }
            const KdTree tree(pts);
            std::vector<double> mean_dist(survivors.size());
            parallel_blocks(survivors.size(), [&](std::size_t begin, std::size_t end) {
                for (std::size_t i = begin; i < end; ++i) {
                    const auto hits = tree.knearest(pts[i], k + 1);
                    double sum = 0.0;
                    std::size_t used = 0;
                    for (const auto& h : hits) {
                        if (static_cast<std::size_t>(h.index) == i) continue;
                        if (used == k) break;
                        sum += h.distance;
                        ++used;
                    }
                    mean_dist[i] = sum / static_cast<double>(used);
                }
            });

            double mean = 0.0;
            for (double d : mean_dist) mean += d;
            mean /= static_cast<double>(mean_dist.size());
            double var = 0.0;
            for (double d : mean_dist) var += (d - mean) * (d - mean);
            var /= static_cast<double>(mean_dist.size());
            const double cutoff = mean + params.std_multiplier * std::sqrt(var);

            for (std::size_t i = 0; i < survivors.size(); ++i) {
                if (mean_dist[i] > cutoff) keep[survivors[i]] = 0;
            }
        }
    }

    return select_points(cloud, keep, 1);
}

TriangleMesh filter_mesh_faces(const TriangleMesh& mesh, const MeshFilterThresholds& th) {
    mesh.validate();
    if (!(th.max_area > 0.0 && th.max_edge > 0.0 && th.max_aspect > 0.0)) {
        throw InvalidArgument("filter_mesh_faces: thresholds must be positive");
    }

    std::vector<const std::array<int, 3>*> kept_faces;
    for (const auto& f : mesh.faces) {
        const Eigen::Vector3d& v0 = mesh.vertices[static_cast<std::size_t>(f[0])];
        const Eigen::Vector3d& v1 = mesh.vertices[static_cast<std::size_t>(f[1])];
        const Eigen::Vector3d& v2 = mesh.vertices[static_cast<std::size_t>(f[2])];
        const double s0 = (v1 - v0).norm();
        const double s1 = (v2 - v1).norm();
        const double s2 = (v0 - v2).norm();
        const double s_max = std::max({s0, s1, s2});
        const double s_min = std::min({s0, s1, s2});
        const double area = 0.5 * (v1 - v0).cross(v2 - v0).norm();
        if (s_min <= 0.0) continue;  // coincident vertices, never keep
        if (area < th.max_area && s_max <= th.max_edge && s_max / s_min <= th.max_aspect) {
            kept_faces.push_back(&f);
        }
    }

    TriangleMesh out;
    std::vector<int> remap(mesh.vertices.size(), -1);
    for (const auto* f : kept_faces) {
        std::array<int, 3> nf{};
        for (int j = 0; j < 3; ++j) {
            const auto old = static_cast<std::size_t>((*f)[j]);
            if (remap[old] < 0) {
                remap[old] = static_cast<int>(out.vertices.size());
                out.vertices.push_back(mesh.vertices[old]);
                if (!mesh.vertex_colors.empty()) {
                    out.vertex_colors.push_back(mesh.vertex_colors[old]);
                }
            }
            nf[j] = remap[old];
        }
        out.faces.push_back(nf);
    }
    return out;
}

PointCloud merge_clouds(const std::vector<PointCloud>& clouds, double dedup_voxel) {
    if (clouds.empty()) throw EmptyList("merge_clouds: no input clouds");

    bool all_colors = true, all_normals = true, tags_differ = false, any_point_tags = false;
    for (const PointCloud& c : clouds) {
        all_colors = all_colors && (c.has_colors() || c.empty());
        all_normals = all_normals && (c.has_normals() || c.empty());
        tags_differ = tags_differ || (c.source != clouds.front().source);
        any_point_tags = any_point_tags || !c.point_sources.empty();
    }
    const bool per_point_tags = tags_differ || any_point_tags;

    struct VoxelHash {
        std::size_t operator()(const std::array<std::int64_t, 3>& v) const {
            std::size_t h = 0xcbf29ce484222325ULL;
            for (std::int64_t x : v) {
                h ^= static_cast<std::size_t>(x);
                h *= 0x100000001b3ULL;
            }
            return h;
        }
    };
    std::unordered_set<std::array<std::int64_t, 3>, VoxelHash> occupied;

    PointCloud out;
    if (!per_point_tags) out.source = clouds.front().source;
    for (const PointCloud& c : clouds) {
        for (std::size_t i = 0; i < c.size(); ++i) {
            const Eigen::Vector3d& p = c.positions[i];
            if (dedup_voxel > 0.0) {
                const std::array<std::int64_t, 3> key{
                    static_cast<std::int64_t>(std::floor(p[0] / dedup_voxel)),
                    static_cast<std::int64_t>(std::floor(p[1] / dedup_voxel)),
                    static_cast<std::int64_t>(std::floor(p[2] / dedup_voxel))};
                if (!occupied.insert(key).second) continue;
            }
            out.positions.push_back(p);
            if (all_colors) out.colors.push_back(c.colors[i]);
            if (all_normals) out.normals.push_back(c.normals[i]);
            if (per_point_tags) out.point_sources.push_back(c.source_of(i));
        }
    }
    return out;
}

}  // namespace mvsfuse
