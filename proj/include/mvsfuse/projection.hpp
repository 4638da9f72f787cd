#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mvsfuse/geometry.hpp"

namespace mvsfuse {

/// One 3D point seen through one camera. `in_image` requires positive depth
/// and a pixel inside [0,width) x [0,height); the pixel is computed either way
/// so out-of-range observations can still be exported.
struct ProjectedPoint {
    std::int64_t point_id = -1;
    Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
    double depth = 0.0;
    bool in_image = false;
};

/// Observations of tracked points in a single view.
struct ViewTrack {
    std::string camera_id;
    std::vector<std::pair<std::int64_t, Eigen::Vector2d>> observations;
};

enum class OutOfRangePolicy {
    kRetainOutOfRange,  // keep negative-depth and out-of-bounds observations
    kStrict,            // keep only in-image observations
};

struct DistributedPoints {
    std::vector<ViewTrack> views;          // one entry per input camera, same order
    std::vector<std::int64_t> point_ids;   // id assigned to each cloud index
};

/// Pinhole projection: x = K(Rp + t), depth = x[2], pixel = x[0:2]/depth.
/// Pixel origin is the top-left corner with integer pixel centers.
/// Throws DegenerateProjection when |depth| < 1e-12.
ProjectedPoint project_point(const CameraPose& cam, const Eigen::Vector3d& point);

/// Inverse of project_point for depth > 0.
Eigen::Vector3d backproject_point(const CameraPose& cam, const Eigen::Vector2d& pixel,
                                  double depth);

/// Assigns a globally unique id to every point and lists per-view observations.
/// Under the strict policy only in-image observations survive; the retain policy
/// keeps behind-camera and out-of-bounds observations as well. Points on a
/// camera plane (|depth| < 1e-12) are unobservable in that view and skipped.
DistributedPoints distribute_points(const PointCloud& cloud,
                                    const std::vector<CameraPose>& cams,
                                    OutOfRangePolicy policy);

/// Uniform sample of n points without replacement (seeded Fisher-Yates prefix).
/// Returns the input unchanged when it has at most n points.
PointCloud sample_uniform(const PointCloud& cloud, std::size_t n, std::uint64_t seed);

}  // namespace mvsfuse
