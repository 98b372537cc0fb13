#pragma once

#include <optional>
#include <string>
#include <vector>

#include "threshold/config.hpp"
#include "threshold/inference.hpp"
#include "threshold/robustness.hpp"

namespace threshold {

enum ExitCode : int { kExitOk = 0, kExitDataError = 1, kExitQualityFailure = 2 };

struct RunOutcome {
  FitResult fit;
  PPCReport ppc;
  bool divergence_flag = false;  // more than 1% divergent post-warmup transitions
  int exit_code = kExitOk;
  std::vector<std::string> written;  // artifact paths
};

/// Load data per `config`, fit, and write thresholds.csv, race_thresholds.csv,
/// diagnostics.json, ppc.csv, ppc.json, manifest.json and optionally
/// draws.csv into config.output_dir. Throws DataError on configuration or
/// data problems.
RunOutcome run(const RunConfig& config);

/// Loads the frisk data the config points at (aggregated or raw + filters).
FriskData load_frisk_data(const RunConfig& config);
StopData load_stop_data(const RunConfig& config);

}  // namespace threshold
