#include "mvsfuse/config.hpp"

#include <fstream>
#include <initializer_list>

#include "mvsfuse/error.hpp"

namespace mvsfuse {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path.empty() ? what : path + ": " + what);
}

void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            if (key == a) {
                ok = true;
                break;
            }
        }
        if (!ok) fail(path.empty() ? key : path + "." + key, "unknown key");
    }
}

std::string join(const std::string& path, const char* key) {
    return path.empty() ? key : path + "." + key;
}

template <typename T>
const char* type_name();
template <>
const char* type_name<std::string>() {
    return "a string";
}
template <>
const char* type_name<double>() {
    return "a number";
}
template <>
const char* type_name<int>() {
    return "an integer";
}
template <>
const char* type_name<std::uint64_t>() {
    return "a non-negative integer";
}
template <>
const char* type_name<bool>() {
    return "a boolean";
}

template <typename T>
bool type_matches(const json& v) {
    if constexpr (std::is_same_v<T, std::string>) return v.is_string();
    if constexpr (std::is_same_v<T, double>) return v.is_number();
    if constexpr (std::is_same_v<T, int>) return v.is_number_integer();
    if constexpr (std::is_same_v<T, std::uint64_t>) {
        return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    }
    if constexpr (std::is_same_v<T, bool>) return v.is_boolean();
    return false;
}

template <typename T>
T get_as(const json& v, const std::string& path) {
    if (!type_matches<T>(v)) fail(path, std::string("expected ") + type_name<T>());
    return v.get<T>();
}

template <typename T>
T get_or(const json& obj, const std::string& path, const char* key, T def) {
    auto it = obj.find(key);
    if (it == obj.end()) return def;
    return get_as<T>(*it, join(path, key));
}

template <typename T>
T get_req(const json& obj, const std::string& path, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) fail(join(path, key), "required key is missing");
    return get_as<T>(*it, join(path, key));
}

std::string get_path(const json& obj, const std::string& path, const char* key) {
    const std::string v = get_req<std::string>(obj, path, key);
    if (v.empty()) fail(join(path, key), "path must be non-empty");
    return v;
}

SkyFilterParams parse_sky(const json& j, const std::string& path) {
    require_object(j, path);
    check_keys(j, path, {"min_brightness", "blue_dominance_margin", "min_l", "max_b"});
    SkyFilterParams p;
    p.min_brightness = get_or<double>(j, path, "min_brightness", p.min_brightness);
    p.blue_dominance_margin = get_or<double>(j, path, "blue_dominance_margin", p.blue_dominance_margin);
    p.min_l = get_or<double>(j, path, "min_l", p.min_l);
    p.max_b = get_or<double>(j, path, "max_b", p.max_b);
    if (p.min_brightness < 0.0 || p.min_brightness > 255.0) {
        fail(join(path, "min_brightness"), "must lie in [0,255]");
    }
    if (p.min_l < 0.0 || p.min_l > 100.0) fail(join(path, "min_l"), "must lie in [0,100]");
    return p;
}

OutlierParams parse_outliers(const json& j, const std::string& path) {
    require_object(j, path);
    check_keys(j, path,
               {"quantile_margin", "knn", "std_multiplier", "use_quantile_box", "use_knn"});
    OutlierParams p;
    p.quantile_margin = get_or<double>(j, path, "quantile_margin", p.quantile_margin);
    p.knn = get_or<int>(j, path, "knn", p.knn);
    p.std_multiplier = get_or<double>(j, path, "std_multiplier", p.std_multiplier);
    p.use_quantile_box = get_or<bool>(j, path, "use_quantile_box", p.use_quantile_box);
    p.use_knn = get_or<bool>(j, path, "use_knn", p.use_knn);
    if (!(p.quantile_margin > 0.0 && p.quantile_margin < 0.5)) {
        fail(join(path, "quantile_margin"), "must lie in (0, 0.5)");
    }
    if (p.knn < 1) fail(join(path, "knn"), "must be >= 1");
    if (!(p.std_multiplier > 0.0)) fail(join(path, "std_multiplier"), "must be positive");
    return p;
}

IcpParams parse_icp(const json& j, const std::string& path) {
    require_object(j, path);
    check_keys(j, path, {"max_iterations", "convergence_eps", "max_corr_dist", "passes"});
    IcpParams p;
    p.max_iterations = get_or<int>(j, path, "max_iterations", p.max_iterations);
    p.convergence_eps = get_or<double>(j, path, "convergence_eps", p.convergence_eps);
    p.max_corr_dist = get_or<double>(j, path, "max_corr_dist", p.max_corr_dist);
    p.passes = get_or<int>(j, path, "passes", p.passes);
    if (p.max_iterations < 1) fail(join(path, "max_iterations"), "must be >= 1");
    if (!(p.convergence_eps > 0.0)) fail(join(path, "convergence_eps"), "must be positive");
    if (p.passes < 1) fail(join(path, "passes"), "must be >= 1");
    return p;
}

}  // namespace

const char* to_string(BlendModeChoice mode) {
    switch (mode) {
        case BlendModeChoice::kNormalClone: return "normal_clone";
        case BlendModeChoice::kMonochromeTransfer: return "monochrome_transfer";
        case BlendModeChoice::kFrequency: return "frequency";
        case BlendModeChoice::kRandom: return "random";
    }
    return "normal_clone";
}

BlendModeChoice blend_mode_from_string(const std::string& name) {
    if (name == "normal_clone") return BlendModeChoice::kNormalClone;
    if (name == "monochrome_transfer") return BlendModeChoice::kMonochromeTransfer;
    if (name == "frequency") return BlendModeChoice::kFrequency;
    if (name == "random") return BlendModeChoice::kRandom;
    throw ConfigError("unknown blend mode '" + name +
                      "' (expected normal_clone, monochrome_transfer, frequency or random)");
}

SceneConfig parse_config(const nlohmann::json& j) {
    require_object(j, "");
    check_keys(j, "",
               {"scene", "resolution", "confidence", "view_number", "fusion_views",
                "out_of_range_policy", "sample_count", "seed", "threads", "output_dir",
                "prepare", "filters", "align", "blend", "merge", "eval"});

    SceneConfig cfg;
    cfg.scene = get_req<std::string>(j, "", "scene");
    if (cfg.scene.empty()) fail("scene", "must be non-empty");
    cfg.resolution = get_or<int>(j, "", "resolution", cfg.resolution);
    if (cfg.resolution < 1) fail("resolution", "must be positive");
    cfg.confidence = get_or<double>(j, "", "confidence", cfg.confidence);
    if (cfg.confidence < 0.0 || cfg.confidence > 1.0) fail("confidence", "must lie in [0,1]");
    cfg.view_number = get_or<int>(j, "", "view_number", cfg.view_number);
    if (cfg.view_number < 1) fail("view_number", "must be >= 1");
    cfg.fusion_views = get_or<int>(j, "", "fusion_views", cfg.fusion_views);
    if (cfg.fusion_views < 1) fail("fusion_views", "must be >= 1");

    const std::string policy =
        get_or<std::string>(j, "", "out_of_range_policy", "retain");
    if (policy == "retain") {
        cfg.out_of_range_policy = OutOfRangePolicy::kRetainOutOfRange;
    } else if (policy == "strict") {
        cfg.out_of_range_policy = OutOfRangePolicy::kStrict;
    } else {
        fail("out_of_range_policy", "expected 'retain' or 'strict'");
    }

    cfg.sample_count = get_or<std::uint64_t>(j, "", "sample_count", cfg.sample_count);
    if (cfg.sample_count == 0) fail("sample_count", "must be >= 1");
    cfg.seed = get_or<std::uint64_t>(j, "", "seed", cfg.seed);
    cfg.threads = get_or<int>(j, "", "threads", cfg.threads);
    if (cfg.threads < 0) fail("threads", "must be >= 0");
    cfg.output_dir = get_req<std::string>(j, "", "output_dir");
    if (cfg.output_dir.empty()) fail("output_dir", "must be non-empty");

    if (auto it = j.find("prepare"); it != j.end()) {
        require_object(*it, "prepare");
        check_keys(*it, "prepare", {"cloud", "poses"});
        PrepareConfig p;
        p.cloud = get_path(*it, "prepare", "cloud");
        p.poses = get_path(*it, "prepare", "poses");
        cfg.prepare = std::move(p);
    }

    if (auto it = j.find("filters"); it != j.end()) {
        require_object(*it, "filters");
        check_keys(*it, "filters", {"sky", "outliers"});
        if (auto s = it->find("sky"); s != it->end()) {
            cfg.filters.sky = parse_sky(*s, "filters.sky");
        }
        if (auto o = it->find("outliers"); o != it->end()) {
            cfg.filters.outliers = parse_outliers(*o, "filters.outliers");
        }
    }

    if (auto it = j.find("align"); it != j.end()) {
        require_object(*it, "align");
        check_keys(*it, "align",
                   {"source_cloud", "source_poses", "target_cloud", "target_poses", "icp"});
        AlignConfig a;
        a.source_cloud = get_path(*it, "align", "source_cloud");
        a.source_poses = get_path(*it, "align", "source_poses");
        a.target_cloud = get_path(*it, "align", "target_cloud");
        a.target_poses = get_path(*it, "align", "target_poses");
        if (auto icp = it->find("icp"); icp != it->end()) {
            a.icp = parse_icp(*icp, "align.icp");
        }
        cfg.align = std::move(a);
    }

    if (auto it = j.find("blend"); it != j.end()) {
        require_object(*it, "blend");
        check_keys(*it, "blend", {"manifest", "mode", "cutoff"});
        BlendConfig b;
        b.manifest = get_path(*it, "blend", "manifest");
        if (auto m = it->find("mode"); m != it->end()) {
            b.mode = blend_mode_from_string(get_as<std::string>(*m, "blend.mode"));
        }
        b.cutoff = get_or<double>(*it, "blend", "cutoff", b.cutoff);
        if (!(b.cutoff > 0.0 && b.cutoff <= 1.0)) fail("blend.cutoff", "must lie in (0, 1]");
        cfg.blend = std::move(b);
    }

    if (auto it = j.find("merge"); it != j.end()) {
        require_object(*it, "merge");
        check_keys(*it, "merge", {"inputs", "dedup_voxel"});
        MergeConfig m;
        auto inputs = it->find("inputs");
        if (inputs == it->end() || !inputs->is_array() || inputs->empty()) {
            fail("merge.inputs", "expected a non-empty array");
        }
        for (std::size_t i = 0; i < inputs->size(); ++i) {
            const std::string path = "merge.inputs[" + std::to_string(i) + "]";
            const json& entry = (*inputs)[i];
            require_object(entry, path);
            check_keys(entry, path, {"path", "source"});
            MergeInput mi;
            mi.path = get_path(entry, path, "path");
            mi.source = get_or<std::string>(entry, path, "source", "");
            m.inputs.push_back(std::move(mi));
        }
        m.dedup_voxel = get_or<double>(*it, "merge", "dedup_voxel", m.dedup_voxel);
        if (m.dedup_voxel < 0.0) fail("merge.dedup_voxel", "must be >= 0");
        cfg.merge = std::move(m);
    }

    if (auto it = j.find("eval"); it != j.end()) {
        require_object(*it, "eval");
        check_keys(*it, "eval", {"tau", "pairs"});
        EvalConfig e;
        e.tau = get_req<double>(*it, "eval", "tau");
        if (!(e.tau > 0.0)) fail("eval.tau", "must be positive");
        auto pairs = it->find("pairs");
        if (pairs == it->end() || !pairs->is_array() || pairs->empty()) {
            fail("eval.pairs", "expected a non-empty array");
        }
        for (std::size_t i = 0; i < pairs->size(); ++i) {
            const std::string path = "eval.pairs[" + std::to_string(i) + "]";
            const json& entry = (*pairs)[i];
            require_object(entry, path);
            check_keys(entry, path, {"name", "pred", "gt"});
            EvalPair p;
            p.name = get_req<std::string>(entry, path, "name");
            p.pred = get_path(entry, path, "pred");
            p.gt = get_path(entry, path, "gt");
            e.pairs.push_back(std::move(p));
        }
        cfg.eval = std::move(e);
    }

    return cfg;
}

SceneConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

nlohmann::json dump_config(const SceneConfig& cfg) {
    json j;
    j["scene"] = cfg.scene;
    j["resolution"] = cfg.resolution;
    j["confidence"] = cfg.confidence;
    j["view_number"] = cfg.view_number;
    j["fusion_views"] = cfg.fusion_views;
    j["out_of_range_policy"] =
        cfg.out_of_range_policy == OutOfRangePolicy::kStrict ? "strict" : "retain";
    j["sample_count"] = cfg.sample_count;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    j["output_dir"] = cfg.output_dir;

    if (cfg.prepare) {
        j["prepare"] = {{"cloud", cfg.prepare->cloud}, {"poses", cfg.prepare->poses}};
    }
    if (cfg.filters.sky || cfg.filters.outliers) {
        json f = json::object();
        if (cfg.filters.sky) {
            f["sky"] = {{"min_brightness", cfg.filters.sky->min_brightness},
                        {"blue_dominance_margin", cfg.filters.sky->blue_dominance_margin},
                        {"min_l", cfg.filters.sky->min_l},
                        {"max_b", cfg.filters.sky->max_b}};
        }
        if (cfg.filters.outliers) {
            f["outliers"] = {{"quantile_margin", cfg.filters.outliers->quantile_margin},
                             {"knn", cfg.filters.outliers->knn},
                             {"std_multiplier", cfg.filters.outliers->std_multiplier},
                             {"use_quantile_box", cfg.filters.outliers->use_quantile_box},
                             {"use_knn", cfg.filters.outliers->use_knn}};
        }
        j["filters"] = std::move(f);
    }
    if (cfg.align) {
        j["align"] = {{"source_cloud", cfg.align->source_cloud},
                      {"source_poses", cfg.align->source_poses},
                      {"target_cloud", cfg.align->target_cloud},
                      {"target_poses", cfg.align->target_poses},
                      {"icp",
                       {{"max_iterations", cfg.align->icp.max_iterations},
                        {"convergence_eps", cfg.align->icp.convergence_eps},
                        {"max_corr_dist", cfg.align->icp.max_corr_dist},
                        {"passes", cfg.align->icp.passes}}}};
    }
    if (cfg.blend) {
        j["blend"] = {{"manifest", cfg.blend->manifest},
                      {"mode", to_string(cfg.blend->mode)},
                      {"cutoff", cfg.blend->cutoff}};
    }
    if (cfg.merge) {
        json inputs = json::array();
        for (const MergeInput& mi : cfg.merge->inputs) {
            inputs.push_back({{"path", mi.path}, {"source", mi.source}});
        }
        j["merge"] = {{"inputs", std::move(inputs)}, {"dedup_voxel", cfg.merge->dedup_voxel}};
    }
    if (cfg.eval) {
        json pairs = json::array();
        for (const EvalPair& p : cfg.eval->pairs) {
            pairs.push_back({{"name", p.name}, {"pred", p.pred}, {"gt", p.gt}});
        }
        j["eval"] = {{"tau", cfg.eval->tau}, {"pairs", std::move(pairs)}};
    }
    return j;
}

}  // namespace mvsfuse
