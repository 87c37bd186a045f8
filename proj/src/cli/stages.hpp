#pragma once

#include "settings.hpp"
#include "workspace.hpp"

#include <set>
#include <string>
#include <vector>

namespace quest::cli {

inline const std::vector<std::string>& stage_names()
{
    static const std::vector<std::string> names = {"ingest", "predict",   "keywords",          "index",  "synth",
                                                   "diagnose", "fit-scaling", "sweep-split-ratio", "corrupt"};
    return names;
}

struct StageContext {
    const Settings& settings;
    const std::set<std::string>& explicit_keys; // settings given on the command line
    Workspace& workspace;
    Progress& progress;
};

// Runs one stage (skipping it when its recorded run is still current) and
// records it in the workspace manifest.
void run_stage(const std::string& stage, StageContext& ctx);

} // namespace quest::cli
