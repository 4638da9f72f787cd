#include "mvsfuse/projection.hpp"

#include <Eigen/LU>

#include <cmath>
#include <cstdlib>

#include "mvsfuse/error.hpp"

namespace mvsfuse {
namespace {

// Unbiased bounded integer in [0, bound) from a splittable generator state.
// Rejection keeps the distribution exact and the result identical across
// platforms, unlike std::uniform_int_distribution.
std::uint64_t bounded_rand(std::uint64_t& state, std::uint64_t bound) {
    auto next = [&state]() {
        // xorshift64* is enough here; quality matters less than reproducibility.
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        return state * 0x2545F4914F6CDD1DULL;
    };
    const std::uint64_t threshold = -bound % bound;
    for (;;) {
        const std::uint64_t r = next();
        if (r >= threshold) return r % bound;
    }
}

}  // namespace

ProjectedPoint project_point(const CameraPose& cam, const Eigen::Vector3d& point) {
    const Eigen::Vector3d x = cam.K * (cam.R * point + cam.t);
    const double depth = x[2];
    if (std::abs(depth) < 1e-12) {
        throw DegenerateProjection("point projects onto the camera plane of '" + cam.id + "'");
    }
    ProjectedPoint out;
    out.pixel = x.head<2>() / depth;
    out.depth = depth;
    out.in_image = depth > 0.0 && out.pixel[0] >= 0.0 && out.pixel[0] < cam.width &&
                   out.pixel[1] >= 0.0 && out.pixel[1] < cam.height;
    return out;
}

Eigen::Vector3d backproject_point(const CameraPose& cam, const Eigen::Vector2d& pixel,
                                  double depth) {
    if (!(depth > 0.0)) {
        throw InvalidArgument("backproject_point: depth must be positive");
    }
    const Eigen::Vector3d x(pixel[0] * depth, pixel[1] * depth, depth);
    return cam.R.transpose() * (cam.K.inverse() * x - cam.t);
}

DistributedPoints distribute_points(const PointCloud& cloud,
                                    const std::vector<CameraPose>& cams,
                                    OutOfRangePolicy policy) {
    if (cloud.empty()) throw EmptyCloud("distribute_points: empty cloud");

    DistributedPoints out;
    out.point_ids.resize(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        out.point_ids[i] = static_cast<std::int64_t>(i);
    }

    out.views.reserve(cams.size());
    for (const CameraPose& cam : cams) {
        ViewTrack track;
        track.camera_id = cam.id;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            ProjectedPoint pp;
            try {
                pp = project_point(cam, cloud.positions[i]);
            } catch (const DegenerateProjection&) {
                continue;  // point sits on the camera plane, unobservable
            }
            if (policy == OutOfRangePolicy::kStrict && !pp.in_image) continue;
            track.observations.emplace_back(out.point_ids[i], pp.pixel);
        }
        out.views.push_back(std::move(track));
    }
    return out;
}

PointCloud sample_uniform(const PointCloud& cloud, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw InvalidCount("sample_uniform: sample size must be positive");
    if (cloud.size() <= n) return cloud;

    cloud.validate();

    // Fisher-Yates prefix: after k swaps, indices[0..k) is a uniform k-subset
    // in draw order.
    std::vector<std::size_t> indices(cloud.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;

    std::uint64_t state = seed ? seed : 0x9E3779B97F4A7C15ULL;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(bounded_rand(state, indices.size() - i));
        std::swap(indices[i], indices[j]);
    }

    PointCloud out;
    out.source = cloud.source;
    out.positions.reserve(n);
    if (cloud.has_colors()) out.colors.reserve(n);
    if (cloud.has_normals()) out.normals.reserve(n);
    if (!cloud.point_sources.empty()) out.point_sources.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = indices[i];
        out.positions.push_back(cloud.positions[idx]);
        if (cloud.has_colors()) out.colors.push_back(cloud.colors[idx]);
        if (cloud.has_normals()) out.normals.push_back(cloud.normals[idx]);
        if (!cloud.point_sources.empty()) out.point_sources.push_back(cloud.point_sources[idx]);
    }
    return out;
}

}  // namespace mvsfuse
