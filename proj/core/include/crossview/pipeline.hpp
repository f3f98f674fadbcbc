#pragma once

#include <map>
#include <string>
#include <vector>

#include "crossview/config.hpp"

namespace crossview::pipeline {

class PipelineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline const std::vector<std::string> kStageOrder = {"ingest", "pair",  "features",
                                                     "train",  "eval", "associate"};

struct StageRecord {
    std::string name;
    std::string status = "pending";  // ok | cached | failed | skipped
    double seconds = 0.0;
    std::string message;
    std::map<std::string, long> counts;
    std::vector<std::string> artifacts;
};

struct RunManifest {
    std::vector<StageRecord> stages;
    bool ok = true;

    std::string to_json() const;
};

/// Runs the requested stages in fixed order. A failed stage is recorded with
/// its error and every dependent stage downstream is skipped; independent
/// work already completed is kept. Re-running over the same output_dir reuses
/// the pairing artifacts when the inputs' content hash is unchanged.
RunManifest run_pipeline(const RunConfig& cfg,
                         const std::vector<std::string>& stages = kStageOrder);

/// FNV-1a content hash of a file, as hex. Throws if unreadable.
std::string hash_file(const std::string& path);

}  // namespace crossview::pipeline
