#pragma once

#include <Eigen/Core>

#include <vector>

#include "mvsfuse/geometry.hpp"

namespace mvsfuse {

struct SkyFilterParams {
    double min_brightness = 120.0;       // mean(R,G,B) floor for the RGB rule
    double blue_dominance_margin = 30.0; // B must exceed both R and G by this
    double min_l = 60.0;                 // CIELAB L* floor for the LAB rule
    double max_b = -15.0;                // CIELAB b* ceiling (negative = blue)
};

struct OutlierParams {
    double quantile_margin = 0.01;  // per-axis quantile box [q, 1-q]
    int knn = 8;
    double std_multiplier = 3.0;
    bool use_quantile_box = true;
    bool use_knn = true;
};

struct MeshFilterThresholds {
    double max_area = 0.05;
    double max_edge = 0.25;
    double max_aspect = 7.0;  // longest/shortest side
};

struct SkySplit {
    PointCloud kept;
    PointCloud removed;
};

/// sRGB (components in [0,255], D65) to CIELAB. Returns (L*, a*, b*).
Eigen::Vector3d rgb_to_lab(const Eigen::Vector3d& rgb);

/// Splits the cloud into non-sky and sky points. A point is sky iff
///   RGB rule: B >= R+margin and B >= G+margin and mean(R,G,B) >= min_brightness
/// or
///   LAB rule: L >= min_l and b <= max_b.
/// Order and per-point attributes are preserved on both sides.
SkySplit filter_sky(const PointCloud& cloud, const SkyFilterParams& params = {});

/// Two-stage far-outlier removal, each stage individually disableable:
/// (1) drop points outside the per-axis [q, 1-q] quantile box expanded by
///     3x its extent on each side;
/// (2) on the survivors, drop points whose mean k-NN distance exceeds the
///     global mean by std_multiplier standard deviations.
/// Statistics are computed once per call, so a second application can remove
/// further points.
PointCloud filter_outliers(const PointCloud& cloud, const OutlierParams& params = {});

/// Keeps faces with area < max_area, longest side <= max_edge and side ratio
/// <= max_aspect; everything else is the reconstruction junk this prunes.
/// Unreferenced vertices are dropped and indices compacted.
TriangleMesh filter_mesh_faces(const TriangleMesh& mesh, const MeshFilterThresholds& th = {});

/// Concatenates clouds, tagging each point with its cloud's source when the tags
/// differ. Colors/normals survive only when every input carries them. With
/// dedup_voxel > 0 at most one point is kept per voxel, first in input order.
PointCloud merge_clouds(const std::vector<PointCloud>& clouds, double dedup_voxel = 0.0);

}  // namespace mvsfuse
