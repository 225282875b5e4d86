#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "meso/hamiltonian.hpp"
#include "meso/lattice.hpp"
#include "meso/rng.hpp"

namespace meso {

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"microscopic", "lln",     "clt",        "partition",
                                                "localization", "minami", "green-decay"};
    return names;
}

struct ModelConfig {
    int dimension = 1;
    PotentialSpec potential = PotentialSpec::uniform_width(4.0);
    double hopping = 1.0;
};

struct ScheduleConfig {
    std::vector<std::int64_t> L;
    std::size_t realizations = 0;
    SeedRecord seed;
    unsigned threads = 0;
    /// Draw a_L ∈ [0,1)^d and c_L ∈ [0, trim_scale/L) per replicate.
    bool randomize_offset = false;
    double trim_scale = 1.0;
};

struct DosConfig {
    /// Half-width of the DOS boxes; 0 means the largest schedule value.
    std::int64_t L = 0;
    std::size_t realizations = 400;
    double bin_width = 0.05;
    double lo = -8.0;
    double hi = 8.0;
    std::string method = "histogram";
    double im_z = 0.0;
};

struct TestConfig {
    double tv_threshold = 0.05;
    double ks_coefficient = 1.358;
    double z_sigma = 3.0;
    double lln_delta = 0.2;
    double lln_final_max = 0.1;
    double partition_final_ratio = 0.5;
    double localization_min_r2 = 0.95;
    double minami_ratio_lo = 2.5;
    double minami_ratio_hi = 6.0;
    double lindeberg_eps = 0.5;
};

struct PartitionConfig {
    double alpha = 0.25;
    double beta = 0.5;
    bool trace = true;
};

struct LocalizationConfig {
    double s = 0.5;
    std::vector<double> s_values;
    double im_z = 1e-3;
    std::int64_t r_min = 2;
    std::int64_t r_max = 12;
    std::int64_t margin = 8;
};

struct MinamiConfig {
    int halvings = 2;
};

struct GreenConfig {
    std::int64_t half_width = 20;
    std::int64_t margin = 10;
    std::int64_t d_max = 8;
    double im_z = 0.05;
};

struct SyntheticConfig {
    double dos = 0.15;
};

struct ExperimentConfig {
    std::string name;
    ModelConfig model;
    MesoWindow window;
    ScheduleConfig schedule;
    DosConfig dos;
    TestConfig tests;
    PartitionConfig partition;
    LocalizationConfig localization;
    MinamiConfig minami;
    GreenConfig green;
    SyntheticConfig synthetic;
    std::vector<std::string> enabled;
    /// Fully resolved configuration (defaults merged with the user file).
    nlohmann::json resolved;

    /// Hash of every numerics-affecting field (threads excluded).
    std::uint64_t hash(bool synthetic_null) const;
};

/// Defaults for experiment `name` (or the DOS command when name is "dos").
nlohmann::json default_config(std::string_view name);

/// Merge `user` over the defaults for `name` and validate. Unknown keys and
/// invalid values raise ConfigError naming the field.
ExperimentConfig resolve_config(std::string_view name, const nlohmann::json& user);

/// Parse a TOML (or, by extension .json, JSON) file into a JSON tree.
nlohmann::json read_config_file(const std::filesystem::path& path);

}  // namespace meso
