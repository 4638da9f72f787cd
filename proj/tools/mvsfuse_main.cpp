#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "mvsfuse/error.hpp"
#include "mvsfuse/pipeline.hpp"

namespace {

struct StageSpec {
    const char* name;
    const char* help;
    mvsfuse::Stage stage;
    bool takes_mode;
};

constexpr StageSpec kStages[] = {
    {"prepare", "Filter, sample and distribute a point cloud over its cameras", mvsfuse::Stage::kPrepare, false},
    {"align", "Estimate a similarity from shared poses and refine it with ICP", mvsfuse::Stage::kAlign, false},
    {"blend", "Fuse rendered/original image pairs from a manifest", mvsfuse::Stage::kBlend, true},
    {"merge", "Concatenate clouds with optional voxel deduplication", mvsfuse::Stage::kMerge, false},
    {"eval", "Precision/recall/F-score against reference clouds", mvsfuse::Stage::kEval, false},
    {"all", "Run every stage present in the config, in pipeline order", mvsfuse::Stage::kAll, true},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Large-scale multi-view-stereo fusion toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> mode;
    bool dump_config = false;

    for (const StageSpec& spec : kStages) {
        CLI::App* sub = app.add_subcommand(spec.name, spec.help);
        sub->add_option("--config", config_path, "Scene config (JSON)")->required();
        sub->add_option("--seed", seed, "Override the config's seed");
        sub->add_option("--threads", threads, "Worker thread cap (0 = hardware default)");
        sub->add_flag("--dump-config", dump_config,
                      "Print the validated config in canonical form and exit");
        if (spec.takes_mode) {
            sub->add_option(
                "--mode", mode,
                "Blend mode: normal_clone, monochrome_transfer, frequency or random");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    mvsfuse::RunOptions opts;
    opts.seed = seed;
    opts.threads = threads;
    opts.dump_config = dump_config;
    if (mode) {
        try {
            opts.blend_mode = mvsfuse::blend_mode_from_string(*mode);
        } catch (const mvsfuse::Error& e) {
            std::cerr << "[mvsfuse] " << e.what() << "\n";
            return 1;
        }
    }

    const std::string chosen = app.get_subcommands().front()->get_name();
    for (const StageSpec& spec : kStages) {
        if (chosen == spec.name) {
            return mvsfuse::run_pipeline(config_path, spec.stage, opts);
        }
    }
    return 1;  // unreachable
}
