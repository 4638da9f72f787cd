#pragma once

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

#include "mvsfuse/error.hpp"

namespace mvsfuse {

/// True if R is orthonormal with det(R) = +1 within tol.
bool is_rotation(const Eigen::Matrix3d& R, double tol = 1e-9);

/// Pinhole camera with world-to-camera extrinsics. Validated at construction;
/// rotations are rejected rather than re-orthonormalized.
struct CameraPose {
    std::string id;
    Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Eigen::Vector3d t = Eigen::Vector3d::Zero();
    int width = 1;
    int height = 1;

    CameraPose() = default;
    CameraPose(std::string id, const Eigen::Matrix3d& K, const Eigen::Matrix3d& R,
               const Eigen::Vector3d& t, int width, int height);

    /// Camera center in world coordinates, -R^T t.
    Eigen::Vector3d center() const { return -R.transpose() * t; }

    void validate() const;
};

/// Point set with optional per-point color ([0,255] RGB), unit normals, and a
/// provenance tag. `point_sources`, when non-empty, overrides `source` per point
/// (used after merging clouds from different reconstruction tools).
struct PointCloud {
    std::vector<Eigen::Vector3d> positions;
    std::vector<Eigen::Vector3d> colors;
    std::vector<Eigen::Vector3d> normals;
    std::string source;
    std::vector<std::string> point_sources;

    std::size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }
    bool has_colors() const { return !colors.empty(); }
    bool has_normals() const { return !normals.empty(); }

    const std::string& source_of(std::size_t i) const {
        return point_sources.empty() ? source : point_sources[i];
    }

    void validate() const;
};

/// Similarity transform p -> scale * R * p + t with scale > 0.
struct Sim3Transform {
    double scale = 1.0;
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Eigen::Vector3d t = Eigen::Vector3d::Zero();

    Sim3Transform() = default;
    Sim3Transform(double scale, const Eigen::Matrix3d& R, const Eigen::Vector3d& t);

    static Sim3Transform identity() { return {}; }

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return scale * (R * p) + t; }

    /// this ∘ other: apply `other` first, then this.
    Sim3Transform compose(const Sim3Transform& other) const;
    Sim3Transform inverse() const;

    /// Homogeneous 4x4 form [scale*R, t; 0, 1].
    Eigen::Matrix4d matrix() const;

    void validate() const;
};

/// Triangle mesh; faces index into `vertices`.
struct TriangleMesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<Eigen::Vector3d> vertex_colors;

    void validate() const;
};

/// Applies T to every position (normals are rotated, colors carried along).
PointCloud transform_cloud(const PointCloud& cloud, const Sim3Transform& T);

/// Diagonal length of the axis-aligned bounding box; 0 for clouds of < 2 points.
double bbox_diagonal(const PointCloud& cloud);

}  // namespace mvsfuse
