#include "mvsfuse/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mvsfuse/blending.hpp"
#include "mvsfuse/error.hpp"
#include "mvsfuse/evaluation.hpp"
#include "mvsfuse/filtering.hpp"
#include "mvsfuse/model_io.hpp"
#include "mvsfuse/parallel.hpp"
#include "mvsfuse/projection.hpp"
#include "mvsfuse/registration.hpp"

namespace mvsfuse {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("MVSFUSE_LOG");
        if (!env) return LogLevel::kInfo;
        const std::string s = env;
        if (s == "error") return LogLevel::kError;
        if (s == "debug") return LogLevel::kDebug;
        return LogLevel::kInfo;
    }();
    return level;
}

void log_line(LogLevel lvl, const std::string& msg) {
    if (static_cast<int>(lvl) > static_cast<int>(log_level())) return;
    std::cerr << "[mvsfuse] " << msg << std::endl;
}

class StageTimer {
  public:
    explicit StageTimer(std::string name, const SceneConfig& cfg)
        : name_(std::move(name)), scene_(cfg.scene),
          start_(std::chrono::steady_clock::now()) {}

    void finish(const std::string& counts) const {
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start_)
                            .count();
        log_line(LogLevel::kInfo, "stage=" + name_ + " scene=" + scene_ +
                                      " ms=" + std::to_string(ms) +
                                      (counts.empty() ? "" : " " + counts));
    }

  private:
    std::string name_;
    std::string scene_;
    std::chrono::steady_clock::time_point start_;
};

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

void run_prepare(const SceneConfig& cfg) {
    const StageTimer timer("prepare", cfg);
    const fs::path out_dir = fs::path(cfg.output_dir) / "prepare";
    fs::create_directories(out_dir);

    PointCloud cloud = load_point_cloud(cfg.prepare->cloud);
    const std::size_t n_in = cloud.size();

    std::size_t n_sky = 0;
    if (cfg.filters.sky) {
        SkySplit split = filter_sky(cloud, *cfg.filters.sky);
        n_sky = split.removed.size();
        cloud = std::move(split.kept);
    }
    std::size_t n_outliers = 0;
    if (cfg.filters.outliers) {
        const std::size_t before = cloud.size();
        cloud = filter_outliers(cloud, *cfg.filters.outliers);
        n_outliers = before - cloud.size();
    }

    cloud = sample_uniform(cloud, cfg.sample_count, cfg.seed);

    const std::vector<CameraPose> cams = camera_poses(load_colmap_model(cfg.prepare->poses));
    const DistributedPoints dist = distribute_points(cloud, cams, cfg.out_of_range_policy);
    std::size_t n_obs = 0;
    for (const ViewTrack& v : dist.views) n_obs += v.observations.size();

    save_colmap_model(colmap_from_tracks(cams, cloud, dist), out_dir.string());
    save_point_cloud(cloud, (out_dir / "prepared.ply").string());

    timer.finish("points_in=" + std::to_string(n_in) + " sky_removed=" + std::to_string(n_sky) +
                 " outliers_removed=" + std::to_string(n_outliers) +
                 " points_out=" + std::to_string(cloud.size()) +
                 " cameras=" + std::to_string(cams.size()) +
                 " observations=" + std::to_string(n_obs));
}

void run_align(const SceneConfig& cfg) {
    const StageTimer timer("align", cfg);
    const AlignConfig& a = *cfg.align;
    const fs::path out_dir = fs::path(cfg.output_dir) / "align";
    fs::create_directories(out_dir);

    const PointCloud source = load_point_cloud(a.source_cloud);
    const PointCloud target = load_point_cloud(a.target_cloud);
    const std::vector<CameraPose> source_poses = camera_poses(load_colmap_model(a.source_poses));
    const std::vector<CameraPose> target_poses = camera_poses(load_colmap_model(a.target_poses));

    auto [result, transformed] = align_clouds(source, source_poses, target, target_poses, a.icp);
    save_point_cloud(transformed, (out_dir / "aligned.ply").string());

    const Eigen::Matrix4d M = result.transform.matrix();
    std::string txt;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            txt += fmt_g17(M(r, c));
            txt += c == 3 ? '\n' : ' ';
        }
    }
    std::ofstream tf(out_dir / "transform.txt", std::ios::binary | std::ios::trunc);
    if (!tf) throw IoError("cannot write " + (out_dir / "transform.txt").string());
    tf << txt;
    if (!tf.flush()) throw IoError("write failure on transform.txt");

    timer.finish("source_points=" + std::to_string(source.size()) +
                 " target_points=" + std::to_string(target.size()) +
                 " scale=" + fmt_g17(result.transform.scale) + " rms=" + fmt_g17(result.rms));
}

BlendMask mask_from_image(const Image& img) {
    const Image gray = img.channels == 3 ? to_grayscale(img) : img;
    std::vector<char> inside(gray.data.size());
    for (std::size_t i = 0; i < gray.data.size(); ++i) {
        inside[i] = gray.data[i] >= 0.5;
    }
    return BlendMask(gray.width, gray.height, std::move(inside));
}

void run_blend(const SceneConfig& cfg) {
    const StageTimer timer("blend", cfg);
    const BlendConfig& b = *cfg.blend;

    std::ifstream in(b.manifest);
    if (!in) throw ConfigError("blend.manifest: cannot open '" + b.manifest + "'");
    json mj;
    try {
        in >> mj;
    } catch (const json::parse_error& e) {
        throw ConfigError("blend.manifest: not valid JSON: " + std::string(e.what()));
    }
    if (!mj.is_array()) throw ConfigError("blend.manifest: expected a JSON array");

    const fs::path base = fs::path(b.manifest).parent_path();
    auto resolve = [&](const std::string& p) {
        const fs::path q(p);
        return q.is_absolute() ? q.string() : (base / q).string();
    };

    std::size_t done = 0;
    for (std::size_t i = 0; i < mj.size(); ++i) {
        const std::string path = "blend.manifest[" + std::to_string(i) + "]";
        const json& entry = mj[i];
        if (!entry.is_object()) throw ConfigError(path + ": expected an object");
        for (const auto& [key, value] : entry.items()) {
            if (key != "target" && key != "source" && key != "mask" && key != "output") {
                throw ConfigError(path + "." + key + ": unknown key");
            }
        }
        auto req = [&](const char* key) {
            auto it = entry.find(key);
            if (it == entry.end() || !it->is_string() || it->get<std::string>().empty()) {
                throw ConfigError(path + "." + key + ": required path is missing");
            }
            return it->get<std::string>();
        };

        const Image target = load_image(resolve(req("target")));
        const Image source = load_image(resolve(req("source")));

        BlendModeChoice mode = b.mode;
        if (mode == BlendModeChoice::kRandom) {
            switch (splitmix64(cfg.seed ^ splitmix64(i + 1)) % 3) {
                case 0: mode = BlendModeChoice::kNormalClone; break;
                case 1: mode = BlendModeChoice::kMonochromeTransfer; break;
                default: {
                    // keep the original image untouched
                    save_image(target, resolve(req("output")));
                    ++done;
                    log_line(LogLevel::kDebug, path + " mode=original");
                    continue;
                }
            }
        }

        Image out;
        if (mode == BlendModeChoice::kFrequency) {
            out = frequency_fuse(target, source, b.cutoff);
        } else {
            auto mask_it = entry.find("mask");
            if (mask_it == entry.end()) {
                throw ConfigError(path + ".mask: required for gradient-domain modes");
            }
            const BlendMask mask = mask_from_image(load_image(resolve(req("mask"))));
            out = poisson_blend(target, source, mask,
                                mode == BlendModeChoice::kMonochromeTransfer
                                    ? BlendMode::kMonochromeTransfer
                                    : BlendMode::kNormalClone);
        }
        save_image(out, resolve(req("output")));
        ++done;
        log_line(LogLevel::kDebug, path + " mode=" + to_string(mode));
    }

    timer.finish("images=" + std::to_string(done));
}

void run_merge(const SceneConfig& cfg) {
    const StageTimer timer("merge", cfg);
    const MergeConfig& m = *cfg.merge;
    const fs::path out_dir = fs::path(cfg.output_dir) / "merge";
    fs::create_directories(out_dir);

    std::vector<PointCloud> clouds;
    clouds.reserve(m.inputs.size());
    std::size_t n_in = 0;
    for (const MergeInput& input : m.inputs) {
        PointCloud c = load_point_cloud(input.path);
        c.source = input.source;
        n_in += c.size();
        clouds.push_back(std::move(c));
    }
    const PointCloud merged = merge_clouds(clouds, m.dedup_voxel);
    save_point_cloud(merged, (out_dir / "merged.ply").string());

    timer.finish("inputs=" + std::to_string(m.inputs.size()) +
                 " points_in=" + std::to_string(n_in) +
                 " points_out=" + std::to_string(merged.size()));
}

void run_eval(const SceneConfig& cfg) {
    const StageTimer timer("eval", cfg);
    const EvalConfig& e = *cfg.eval;
    const fs::path out_dir = fs::path(cfg.output_dir) / "eval";
    fs::create_directories(out_dir);

    std::vector<EvalReport> reports;
    json scenes = json::array();
    for (const EvalPair& pair : e.pairs) {
        const PointCloud pred = load_point_cloud(pair.pred);
        const PointCloud gt = load_point_cloud(pair.gt);
        const EvalReport r = eval_scene(pred, gt, e.tau, pair.name);
        reports.push_back(r);
        const json jr = {{"scene", r.scene},   {"tau", r.tau},       {"precision", r.precision},
                         {"recall", r.recall}, {"fscore", r.fscore}, {"n_pred", r.n_pred},
                         {"n_gt", r.n_gt}};
        std::cout << jr.dump() << "\n";
        scenes.push_back(jr);
    }
    const EvalSummary s = aggregate(reports);
    const json summary = {
        {"precision", s.precision}, {"recall", s.recall}, {"fscore", s.fscore}};
    std::cout << json{{"aggregate", summary}}.dump() << std::endl;

    std::ofstream rf(out_dir / "report.json", std::ios::binary | std::ios::trunc);
    if (!rf) throw IoError("cannot write " + (out_dir / "report.json").string());
    rf << json{{"scenes", scenes}, {"aggregate", summary}}.dump(2) << "\n";
    if (!rf.flush()) throw IoError("write failure on report.json");

    timer.finish("pairs=" + std::to_string(e.pairs.size()) +
                 " mean_fscore=" + fmt_g17(s.fscore));
}

}  // namespace

int run_pipeline(const std::string& config_path, Stage stage, const RunOptions& opts) {
    try {
        SceneConfig cfg = load_config(config_path);
        if (opts.seed) cfg.seed = *opts.seed;
        if (opts.threads) cfg.threads = *opts.threads;
        if (opts.blend_mode && cfg.blend) cfg.blend->mode = *opts.blend_mode;

        if (opts.dump_config) {
            std::cout << dump_config(cfg).dump(2) << std::endl;
            return 0;
        }

        set_max_threads(cfg.threads);
        const bool all = stage == Stage::kAll;

        if (all || stage == Stage::kPrepare) {
            if (cfg.prepare) {
                run_prepare(cfg);
            } else if (!all) {
                throw ConfigError("prepare: section missing from config");
            }
        }
        if (all || stage == Stage::kAlign) {
            if (cfg.align) {
                run_align(cfg);
            } else if (!all) {
                throw ConfigError("align: section missing from config");
            }
        }
        if (all || stage == Stage::kBlend) {
            if (cfg.blend) {
                run_blend(cfg);
            } else if (!all) {
                throw ConfigError("blend: section missing from config");
            }
        }
        if (all || stage == Stage::kMerge) {
            if (cfg.merge) {
                run_merge(cfg);
            } else if (!all) {
                throw ConfigError("merge: section missing from config");
            }
        }
        if (all || stage == Stage::kEval) {
            if (cfg.eval) {
                run_eval(cfg);
            } else if (!all) {
                throw ConfigError("eval: section missing from config");
            }
        }
        return 0;
    } catch (const ConfigError& e) {
        log_line(LogLevel::kError, std::string("config error: ") + e.what());
        return 1;
    } catch (const Error& e) {
        log_line(LogLevel::kError, std::string("error: ") + e.what());
        return 2;
    } catch (const std::exception& e) {
        log_line(LogLevel::kError, std::string("unexpected error: ") + e.what());
        return 2;
    }
}

}  // namespace mvsfuse
