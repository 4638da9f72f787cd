#pragma once

#include <Eigen/Core>

#include <string>
#include <utility>
#include <vector>

#include "mvsfuse/geometry.hpp"

namespace mvsfuse {

struct AlignmentResult {
    Sim3Transform transform;  // maps source coordinates into the target frame
    double residual = 0.0;    // sum of squared distances over the correspondences
    double rms = 0.0;
};

struct IcpParams {
    int max_iterations = 50;
    double convergence_eps = 1e-6;  // relative RMS change per iteration
    double max_corr_dist = 0.0;     // <= 0 selects 1% of the target bbox diagonal
    int passes = 2;                 // rejection threshold is halved between passes
};

/// Per-iteration RMS values, appended across passes. Useful for monotonicity
/// checks; pass nullptr to skip recording.
struct IcpTrace {
    std::vector<double> rms_history;
};

/// Pairs camera centers (-R^T t) of poses sharing an id. The first occurrence
/// of an id on each side wins. Throws TooFewMatches below 3 pairs.
std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> match_poses(
    const std::vector<CameraPose>& source, const std::vector<CameraPose>& target);

/// Closed-form similarity minimizing sum_i |target_i - T(source_i)|^2 over
/// scale > 0, rotation and translation. Centroids are subtracted, the rotation
/// comes from the SVD of the cross-covariance with a determinant-sign fix, and
/// the scale from the trace ratio. Throws DegenerateConfiguration when fewer
/// than 3 pairs are given or the sources have (numerically) zero spread.
AlignmentResult estimate_sim3(const std::vector<Eigen::Vector3d>& source,
                              const std::vector<Eigen::Vector3d>& target);

/// Point-to-point ICP starting from `init`. Each iteration matches every
/// transformed source point to its nearest target point, rejects pairs beyond
/// the distance threshold and re-estimates the similarity from scratch. A step
/// that would raise the RMS is rejected and ends the pass; the threshold is
/// halved between passes. The returned RMS is never above the initial one.
AlignmentResult icp_refine(const PointCloud& source, const PointCloud& target,
                           const Sim3Transform& init, const IcpParams& params = {},
                           IcpTrace* trace = nullptr);

/// Pose-seeded alignment: estimate_sim3 on matched camera centers, then ICP.
/// Returns the alignment and the transformed source cloud.
std::pair<AlignmentResult, PointCloud> align_clouds(const PointCloud& source,
                                                    const std::vector<CameraPose>& source_poses,
                                                    const PointCloud& target,
                                                    const std::vector<CameraPose>& target_poses,
                                                    const IcpParams& params = {});

}  // namespace mvsfuse
