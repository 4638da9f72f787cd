#include "mvsfuse/registration.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "mvsfuse/error.hpp"
#include "mvsfuse/kd_tree.hpp"

namespace mvsfuse {
namespace {

double rms_of(const std::vector<Eigen::Vector3d>& source,
              const std::vector<Eigen::Vector3d>& target, const Sim3Transform& T) {
    double sum = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
        sum += (target[i] - T.apply(source[i])).squaredNorm();
    }
    return std::sqrt(sum / static_cast<double>(source.size()));
}

}  // namespace

std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> match_poses(
    const std::vector<CameraPose>& source, const std::vector<CameraPose>& target) {
    std::unordered_map<std::string, const CameraPose*> by_id;
    by_id.reserve(target.size());
    for (const CameraPose& cam : target) {
        by_id.emplace(cam.id, &cam);  // first occurrence wins
    }

    std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> pairs;
    std::unordered_map<std::string, bool> used;
    for (const CameraPose& cam : source) {
        if (used.count(cam.id)) continue;
        used.emplace(cam.id, true);
        auto it = by_id.find(cam.id);
        if (it == by_id.end()) continue;
        pairs.emplace_back(cam.center(), it->second->center());
    }
    if (pairs.size() < 3) {
        throw TooFewMatches("match_poses: need at least 3 shared camera ids, got " +
                            std::to_string(pairs.size()));
    }
    return pairs;
}

AlignmentResult estimate_sim3(const std::vector<Eigen::Vector3d>& source,
                              const std::vector<Eigen::Vector3d>& target) {
    const std::size_t n = source.size();
    if (n != target.size()) {
        throw InvalidArgument("estimate_sim3: source and target sizes differ");
    }
    if (n < 3) {
        throw DegenerateConfiguration("estimate_sim3: need at least 3 correspondences, got " +
                                      std::to_string(n));
    }

    Eigen::Vector3d mu_s = Eigen::Vector3d::Zero();
    Eigen::Vector3d mu_t = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        mu_s += source[i];
        mu_t += target[i];
    }
    mu_s /= static_cast<double>(n);
    mu_t /= static_cast<double>(n);

    double var_s = 0.0;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();  // E[(t - mu_t)(s - mu_s)^T]
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d ds = source[i] - mu_s;
        const Eigen::Vector3d dt = target[i] - mu_t;
        var_s += ds.squaredNorm();
        cov += dt * ds.transpose();
    }
    var_s /= static_cast<double>(n);
    cov /= static_cast<double>(n);

    if (!(var_s > 0.0)) {
        throw DegenerateConfiguration("estimate_sim3: source points are coincident");
    }

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d sigma = svd.singularValues();
    if (sigma[1] <= sigma[0] * 1e-12) {
        // rank < 2 leaves the rotation about the dominant axis unconstrained
        throw DegenerateConfiguration("estimate_sim3: correspondences are collinear");
    }

    Eigen::Matrix3d S = Eigen::Matrix3d::Identity();
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) {
        S(2, 2) = -1.0;
    }

    Sim3Transform T;
    T.R = svd.matrixU() * S * svd.matrixV().transpose();
    T.scale = (sigma.asDiagonal() * S).trace() / var_s;
    if (!(T.scale > 0.0)) {
        throw DegenerateConfiguration("estimate_sim3: non-positive scale estimate");
    }
    T.t = mu_t - T.scale * (T.R * mu_s);

    AlignmentResult out;
    out.transform = T;
    out.rms = rms_of(source, target, T);
    out.residual = out.rms * out.rms * static_cast<double>(n);
    return out;
}

AlignmentResult icp_refine(const PointCloud& source, const PointCloud& target,
                           const Sim3Transform& init, const IcpParams& params,
                           IcpTrace* trace) {
    if (source.empty()) throw EmptyCloud("icp_refine: empty source cloud");
    if (target.empty()) throw EmptyCloud("icp_refine: empty target cloud");
    if (params.max_iterations < 1) throw InvalidArgument("icp_refine: max_iterations < 1");
    if (params.passes < 1) throw InvalidArgument("icp_refine: passes < 1");
    init.validate();

    const KdTree tree(target.positions);
    double threshold = params.max_corr_dist > 0.0 ? params.max_corr_dist
                                                  : 0.01 * bbox_diagonal(target);
    if (!(threshold > 0.0)) {
        throw InvalidArgument("icp_refine: correspondence threshold is not positive");
    }

    Sim3Transform T = init;
    double prev_rms = std::numeric_limits<double>::infinity();

    std::vector<Eigen::Vector3d> src_pairs, tgt_pairs;
    for (int pass = 0; pass < params.passes; ++pass) {
        for (int iter = 0; iter < params.max_iterations; ++iter) {
            src_pairs.clear();
            tgt_pairs.clear();
            double sum_sq = 0.0;
            for (const Eigen::Vector3d& p : source.positions) {
                const Eigen::Vector3d q = T.apply(p);
                const KdTree::Hit hit = tree.nearest(q);
                if (hit.distance > threshold) continue;
                src_pairs.push_back(p);  // original coordinates, not q
                tgt_pairs.push_back(target.positions[static_cast<std::size_t>(hit.index)]);
                sum_sq += hit.distance * hit.distance;
            }
            if (src_pairs.empty()) {
                throw NoCorrespondences("icp_refine: no pairs within threshold " +
                                        std::to_string(threshold));
            }
            const double rms = std::sqrt(sum_sq / static_cast<double>(src_pairs.size()));
            if (rms > prev_rms) break;  // re-matching made things worse; keep T
            prev_rms = rms;
            if (trace) trace->rms_history.push_back(rms);
            if (rms == 0.0) break;

            AlignmentResult step;
            try {
                step = estimate_sim3(src_pairs, tgt_pairs);
            } catch (const DegenerateConfiguration&) {
                break;  // surviving pairs no longer constrain a similarity
            }
            if (step.rms > prev_rms) break;  // reject the update, keep T
            const double change = std::abs(prev_rms - step.rms) / std::max(prev_rms, 1e-30);
            T = step.transform;
            prev_rms = step.rms;
            if (change < params.convergence_eps) break;
        }
        threshold *= 0.5;
    }

    // Report over the same pairing rule the loop used, with the final transform.
    AlignmentResult out;
    out.transform = T;
    double sum_sq = 0.0;
    std::size_t count = 0;
    const double report_threshold = threshold * 2.0;  // undo the final halving
    for (const Eigen::Vector3d& p : source.positions) {
        const KdTree::Hit hit = tree.nearest(T.apply(p));
        if (hit.distance > report_threshold) continue;
        sum_sq += hit.distance * hit.distance;
        ++count;
    }
    if (count == 0) {
        throw NoCorrespondences("icp_refine: no pairs within threshold after refinement");
    }
    out.residual = sum_sq;
    out.rms = std::sqrt(sum_sq / static_cast<double>(count));
    return out;
}

std::pair<AlignmentResult, PointCloud> align_clouds(const PointCloud& source,
                                                    const std::vector<CameraPose>& source_poses,
                                                    const PointCloud& target,
                                                    const std::vector<CameraPose>& target_poses,
                                                    const IcpParams& params) {
    const auto pairs = match_poses(source_poses, target_poses);
    std::vector<Eigen::Vector3d> src_centers, tgt_centers;
    src_centers.reserve(pairs.size());
    tgt_centers.reserve(pairs.size());
    for (const auto& [s, t] : pairs) {
        src_centers.push_back(s);
        tgt_centers.push_back(t);
    }
    const AlignmentResult seed = estimate_sim3(src_centers, tgt_centers);
    const AlignmentResult refined = icp_refine(source, target, seed.transform, params);
    return {refined, transform_cloud(source, refined.transform)};
}

}  // namespace mvsfuse
