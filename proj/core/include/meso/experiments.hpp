#pragma once

#include <cstddef>
#include <string>

#include "meso/config.hpp"
#include "meso/records.hpp"

namespace meso {

struct RunOptions {
    /// Worker count; 0 defers to the config (whose 0 means all cores).
    unsigned threads = 0;
    /// Replace spectral counts by Poisson draws with the nominal DOS.
    bool synthetic_null = false;
    /// Completed stages are loaded from and saved to this store when set.
    StageStore* store = nullptr;
    /// Stop after computing this many new stages (0 = no limit). The record
    /// comes back incomplete, as after an interruption.
    std::size_t max_new_stages = 0;
};

// Every runner returns a record whose sample tables are a deterministic
// function of (config, seed); reports are computed from the tables alone.

ExperimentRecord run_microscopic(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentRecord run_lln(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentRecord run_clt(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentRecord run_partition_approximation(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentRecord run_localization_probe(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentRecord run_minami_tail(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentRecord run_green_comparison_decay(const ExperimentConfig& config, const RunOptions& options = {});

/// Dispatch on config.name.
ExperimentRecord run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// DOS estimate for the `dos` command: histogram or Stieltjes on [lo, hi].
DosEstimate run_dos(const ExperimentConfig& config, unsigned threads = 0);

}  // namespace meso
