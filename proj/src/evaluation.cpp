#include "mvsfuse/evaluation.hpp"

#include "mvsfuse/error.hpp"
#include "mvsfuse/kd_tree.hpp"
#include "mvsfuse/parallel.hpp"

namespace mvsfuse {
namespace {

std::size_t count_below(const std::vector<double>& distances, double tau) {
    std::size_t n = 0;
    for (double d : distances) {
        if (d < tau) ++n;
    }
    return n;
}

}  // namespace

std::vector<double> nn_distances(const PointCloud& from, const PointCloud& to) {
    if (from.empty()) throw EmptyCloud("nn_distances: empty query cloud");
    if (to.empty()) throw EmptyCloud("nn_distances: empty reference cloud");

    const KdTree tree(to.positions);
    std::vector<double> out(from.size());
    parallel_blocks(from.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            out[i] = tree.nearest(from.positions[i]).distance;
        }
    });
    return out;
}

EvalReport eval_scene(const PointCloud& pred, const PointCloud& gt, double tau,
                      const std::string& scene) {
    if (!(tau > 0.0)) throw InvalidTau("eval_scene: tau must be positive");
    if (pred.empty()) throw EmptyCloud("eval_scene: empty predicted cloud");
    if (gt.empty()) throw EmptyCloud("eval_scene: empty ground-truth cloud");

    EvalReport r;
    r.scene = scene;
    r.tau = tau;
    r.n_pred = pred.size();
    r.n_gt = gt.size();
    r.precision = 100.0 * static_cast<double>(count_below(nn_distances(pred, gt), tau)) /
                  static_cast<double>(pred.size());
    r.recall = 100.0 * static_cast<double>(count_below(nn_distances(gt, pred), tau)) /
               static_cast<double>(gt.size());
    r.fscore = r.precision + r.recall > 0.0
                   ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                   : 0.0;
    return r;
}

EvalSummary aggregate(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw EmptyList("aggregate: no reports");
    EvalSummary s;
    for (const EvalReport& r : reports) {
        s.precision += r.precision;
        s.recall += r.recall;
        s.fscore += r.fscore;
    }
    const auto n = static_cast<double>(reports.size());
    s.precision /= n;
    s.recall /= n;
    s.fscore /= n;
    return s;
}

}  // namespace mvsfuse
