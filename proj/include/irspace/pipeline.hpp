#pragma once

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "irspace/config.hpp"

namespace irspace {

enum class ExitCode : int { ok = 0, validation = 1, missing_input = 2, numeric = 3 };

/// Maps a library error to the process exit code.
ExitCode exit_code_for(const std::exception& e);

/// Holds <outdir>/.irspace.lock for its lifetime; a second holder is refused.
class OutputLock {
public:
    explicit OutputLock(const std::filesystem::path& outdir);
    ~OutputLock();
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    std::filesystem::path path_;
};

struct RunOptions {
    bool force = false;         // recompute even when the manifest matches
    std::ostream* log = nullptr;
};

struct StageOutcome {
    Stage stage = Stage::synth;
    bool up_to_date = false;
    std::vector<std::string> outputs;  // relative to outdir
};

/// Runs one stage against <config.outdir>. Outputs land in <outdir>/<stage>/,
/// each written atomically, followed by manifest.json. The caller holds the lock.
StageOutcome run_stage(Stage stage, const PipelineConfig& config, const RunOptions& opts = {});

/// Hash of a file's bytes as written in manifests.
std::string file_hash(const std::filesystem::path& path);

}  // namespace irspace
