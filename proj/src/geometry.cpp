#include "mvsfuse/geometry.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>

namespace mvsfuse {

bool is_rotation(const Eigen::Matrix3d& R, double tol) {
    const Eigen::Matrix3d gram = R.transpose() * R;
    if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(R.determinant() - 1.0) <= tol;
}

CameraPose::CameraPose(std::string id_, const Eigen::Matrix3d& K_, const Eigen::Matrix3d& R_,
                       const Eigen::Vector3d& t_, int width_, int height_)
    : id(std::move(id_)), K(K_), R(R_), t(t_), width(width_), height(height_) {
    validate();
}

void CameraPose::validate() const {
    if (!is_rotation(R)) throw InvalidArgument("camera '" + id + "': R is not a rotation");
    if (K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0)
        throw InvalidArgument("camera '" + id + "': K is not upper triangular");
    if (K(2, 2) != 1.0) throw InvalidArgument("camera '" + id + "': K[2][2] must be 1");
    if (K(0, 0) <= 0.0 || K(1, 1) <= 0.0)
        throw InvalidArgument("camera '" + id + "': focal lengths must be positive");
    if (width < 1 || height < 1)
        throw InvalidArgument("camera '" + id + "': image size must be at least 1x1");
}

void PointCloud::validate() const {
    if (!colors.empty() && colors.size() != positions.size())
        throw InvalidArgument("point cloud: color count does not match position count");
    if (!normals.empty() && normals.size() != positions.size())
        throw InvalidArgument("point cloud: normal count does not match position count");
    if (!point_sources.empty() && point_sources.size() != positions.size())
        throw InvalidArgument("point cloud: per-point source count does not match position count");
    for (const auto& n : normals) {
        if (std::abs(n.norm() - 1.0) > 1e-6)
            throw InvalidArgument("point cloud: normals must be unit length");
    }
}

Sim3Transform::Sim3Transform(double scale_, const Eigen::Matrix3d& R_, const Eigen::Vector3d& t_)
    : scale(scale_), R(R_), t(t_) {
    validate();
}

void Sim3Transform::validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw InvalidArgument("sim3: scale must be positive and finite");
    if (!is_rotation(R)) throw InvalidArgument("sim3: R is not a rotation");
}

Sim3Transform Sim3Transform::compose(const Sim3Transform& other) const {
    Sim3Transform out;
    out.scale = scale * other.scale;
    out.R = R * other.R;
    out.t = scale * (R * other.t) + t;
    return out;
}

Sim3Transform Sim3Transform::inverse() const {
    Sim3Transform out;
    out.scale = 1.0 / scale;
    out.R = R.transpose();
    out.t = -(out.scale * (out.R * t));
    return out;
}

Eigen::Matrix4d Sim3Transform::matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = scale * R;
    m.topRightCorner<3, 1>() = t;
    return m;
}

void TriangleMesh::validate() const {
    const auto n = static_cast<int>(vertices.size());
    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
        const auto& f = faces[fi];
        for (int k = 0; k < 3; ++k) {
            if (f[k] < 0 || f[k] >= n)
                throw InvalidArgument("mesh: face " + std::to_string(fi) +
                                      " references vertex " + std::to_string(f[k]));
        }
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
            throw InvalidArgument("mesh: face " + std::to_string(fi) + " repeats a vertex");
    }
    if (!vertex_colors.empty() && vertex_colors.size() != vertices.size())
        throw InvalidArgument("mesh: vertex color count does not match vertex count");
}

PointCloud transform_cloud(const PointCloud& cloud, const Sim3Transform& T) {
    PointCloud out = cloud;
    for (auto& p : out.positions) p = T.apply(p);
    for (auto& n : out.normals) n = T.R * n;
    return out;
}

double bbox_diagonal(const PointCloud& cloud) {
    if (cloud.size() < 2) return 0.0;
    Eigen::Vector3d lo = cloud.positions.front();
    Eigen::Vector3d hi = lo;
    for (const auto& p : cloud.positions) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

}  // namespace mvsfuse
