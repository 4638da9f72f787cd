#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "mvsfuse/config.hpp"

namespace mvsfuse {

enum class Stage {
    kPrepare,
    kAlign,
    kBlend,
    kMerge,
    kEval,
    kAll,  // every stage whose config section is present, in pipeline order
};

struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<BlendModeChoice> blend_mode;
    bool dump_config = false;  // print the canonical config and stop
};

/// Executes one stage (or all configured ones) of the scene described by the
/// config file. Artifacts land under the config's output_dir with fixed names;
/// runs are deterministic for a fixed seed. Returns 0 on success, 1 on a
/// config/validation error, 2 on a runtime error; failures are logged to
/// stderr (verbosity via MVSFUSE_LOG=error|info|debug).
int run_pipeline(const std::string& config_path, Stage stage, const RunOptions& opts = {});

}  // namespace mvsfuse
