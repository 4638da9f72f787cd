#pragma once

#include <string>
#include <vector>

#include "mvsfuse/geometry.hpp"

namespace mvsfuse {

/// Precision/recall/F-score as percentages in [0,100] at distance threshold tau.
struct EvalReport {
    std::string scene;
    double tau = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double fscore = 0.0;
    std::size_t n_pred = 0;
    std::size_t n_gt = 0;
};

struct EvalSummary {
    double precision = 0.0;
    double recall = 0.0;
    double fscore = 0.0;
};

/// Exact nearest-neighbor distance in `to` for every point of `from`.
std::vector<double> nn_distances(const PointCloud& from, const PointCloud& to);

/// precision = % of pred within tau of gt, recall = % of gt within tau of pred,
/// fscore = harmonic mean (0 when both vanish). Distances compare strictly
/// (d < tau); points exactly at tau do not count.
EvalReport eval_scene(const PointCloud& pred, const PointCloud& gt, double tau,
                      const std::string& scene = {});

/// Arithmetic means of the per-scene percentages. The mean F-score is the mean
/// of per-scene F-scores, not the harmonic mean of the aggregated P and R;
/// the two disagree in general.
EvalSummary aggregate(const std::vector<EvalReport>& reports);

}  // namespace mvsfuse
