#pragma once

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvsfuse/filtering.hpp"
#include "mvsfuse/projection.hpp"
#include "mvsfuse/registration.hpp"

namespace mvsfuse {

struct PrepareConfig {
    std::string cloud;  // PLY to clean, sample and distribute
    std::string poses;  // COLMAP text model directory providing the cameras
};

/// Each filter runs in `prepare` only when its section is present.
struct FiltersConfig {
    std::optional<SkyFilterParams> sky;
    std::optional<OutlierParams> outliers;
};

struct AlignConfig {
    std::string source_cloud;
    std::string source_poses;
    std::string target_cloud;
    std::string target_poses;
    IcpParams icp;
};

enum class BlendModeChoice {
    kNormalClone,
    kMonochromeTransfer,
    kFrequency,
    kRandom,  // per-image seeded pick: original, normal clone or monochrome
};

struct BlendConfig {
    std::string manifest;  // JSON list of {target, source, mask?, output}
    BlendModeChoice mode = BlendModeChoice::kNormalClone;
    double cutoff = 0.5;  // frequency mode split point, (0,1]
};

struct MergeInput {
    std::string path;
    std::string source;  // provenance tag carried onto the points
};

struct MergeConfig {
    std::vector<MergeInput> inputs;
    double dedup_voxel = 0.0;  // 0 disables deduplication
};

struct EvalPair {
    std::string name;
    std::string pred;
    std::string gt;
};

struct EvalConfig {
    double tau = 0.01;
    std::vector<EvalPair> pairs;
};

/// Per-scene settings. A stage runs only when its section is present.
/// `resolution`, `confidence`, `view_number` and `fusion_views` describe the
/// upstream reconstruction setup; they are round-tripped for bookkeeping but
/// no stage here consumes them.
struct SceneConfig {
    std::string scene;
    int resolution = 2048;
    double confidence = 0.5;
    int view_number = 1;
    int fusion_views = 2;
    OutOfRangePolicy out_of_range_policy = OutOfRangePolicy::kRetainOutOfRange;
    std::uint64_t sample_count = 500000;
    std::uint64_t seed = 0;
    int threads = 0;  // 0 = hardware default
    std::string output_dir;

    std::optional<PrepareConfig> prepare;
    FiltersConfig filters;
    std::optional<AlignConfig> align;
    std::optional<BlendConfig> blend;
    std::optional<MergeConfig> merge;
    std::optional<EvalConfig> eval;
};

/// Parses and validates; unknown keys and type mismatches are hard errors
/// reported with their field path.
SceneConfig parse_config(const nlohmann::json& j);
SceneConfig load_config(const std::string& path);

/// Canonical form: every scalar field explicit (defaults filled in), keys
/// sorted, sections present only when enabled. parse(dump(c)) == c and
/// dump(parse(x)) == dump(parse(dump(parse(x)))).
nlohmann::json dump_config(const SceneConfig& cfg);

const char* to_string(BlendModeChoice mode);
BlendModeChoice blend_mode_from_string(const std::string& name);

}  // namespace mvsfuse
