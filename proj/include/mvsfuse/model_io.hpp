#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mvsfuse/blending.hpp"
#include "mvsfuse/geometry.hpp"
#include "mvsfuse/projection.hpp"

namespace mvsfuse {

enum class PlyFormat {
    kAscii,
    kBinaryLittleEndian,
};

/// Reads an ascii or binary little-endian PLY point cloud; the header decides
/// which. x/y/z are required, nx/ny/nz and red/green/blue are picked up when
/// present, other properties are skipped.
PointCloud load_point_cloud(const std::string& path);

/// Writes x y z [nx ny nz] [red green blue]; doubles for geometry, uchar for
/// colors (rounded and clamped to [0,255]). Output bytes are deterministic.
void save_point_cloud(const PointCloud& cloud, const std::string& path,
                      PlyFormat format = PlyFormat::kBinaryLittleEndian);

/// PLY triangle mesh; faces must be 3-element vertex_indices lists.
TriangleMesh load_mesh(const std::string& path);
void save_mesh(const TriangleMesh& mesh, const std::string& path,
               PlyFormat format = PlyFormat::kBinaryLittleEndian);

struct ColmapCamera {
    int camera_id = 0;
    std::string model;  // PINHOLE or SIMPLE_PINHOLE
    int width = 0;
    int height = 0;
    std::vector<double> params;
};

struct ColmapObservation {
    Eigen::Vector2d xy = Eigen::Vector2d::Zero();
    std::int64_t point3d_id = -1;  // -1 = not triangulated
};

struct ColmapImage {
    int image_id = 0;
    Eigen::Vector4d quat = Eigen::Vector4d::Zero();  // (w,x,y,z), world-to-camera
    Eigen::Vector3d t = Eigen::Vector3d::Zero();
    int camera_id = 0;
    std::string name;
    std::vector<ColmapObservation> points2d;
};

struct ColmapTrackEntry {
    int image_id = 0;
    int point2d_idx = 0;
};

struct ColmapPoint {
    std::int64_t point3d_id = 0;
    Eigen::Vector3d xyz = Eigen::Vector3d::Zero();
    Eigen::Vector3i rgb = Eigen::Vector3i::Zero();
    double error = 0.0;
    std::vector<ColmapTrackEntry> track;
};

/// In-memory COLMAP text model (cameras.txt / images.txt / points3D.txt).
struct ColmapModel {
    std::map<int, ColmapCamera> cameras;
    std::map<int, ColmapImage> images;
    std::map<std::int64_t, ColmapPoint> points3d;

    /// Cross-reference check: tracks point at existing images and valid 2D
    /// indices, observations at existing 3D points, images at existing cameras.
    void validate() const;
};

/// Loads the three text files from `dir`. Quaternions farther than 1e-6 from
/// unit length are rejected, then normalized.
ColmapModel load_colmap_model(const std::string& dir);

/// Writes the three text files with ids ascending and 12-significant-digit
/// floats; byte output is deterministic. Validates first.
void save_colmap_model(const ColmapModel& model, const std::string& dir);

/// One CameraPose per image, ordered by image id. The pose id is the image
/// name with its final extension stripped.
std::vector<CameraPose> camera_poses(const ColmapModel& model);

/// Builds a model from per-view tracks: one PINHOLE camera per image
/// (ids 1..n in input order), 3D points keyed by the track ids with full
/// observation cross-references. Colors default to black when absent.
ColmapModel colmap_from_tracks(const std::vector<CameraPose>& cams, const PointCloud& cloud,
                               const DistributedPoints& tracks);

/// Single-channel float image, rows top-down.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<float> data;
};

/// PFM "Pf" reader; negative scale means little-endian, rows arrive bottom-up
/// and are flipped. Color "PF" files are rejected.
DepthMap load_depth_pfm(const std::string& path);

/// Writes scale -1.0 (little-endian); round-trips bit-identically.
void save_depth_pfm(const DepthMap& depth, const std::string& path);

/// 8-bit PNG. Palette, 16-bit and alpha inputs are normalized to 8-bit and
/// alpha is dropped; grayscale stays single-channel.
Image load_image_png(const std::string& path);
void save_image_png(const Image& img, const std::string& path);

/// Binary PPM (P6), maxval 255. Single-channel images are replicated to RGB
/// on save.
Image load_image_ppm(const std::string& path);
void save_image_ppm(const Image& img, const std::string& path);

/// Dispatches on the file extension: .png or .ppm.
Image load_image(const std::string& path);
void save_image(const Image& img, const std::string& path);

}  // namespace mvsfuse
