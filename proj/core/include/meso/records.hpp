#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "meso/dos.hpp"
#include "meso/rng.hpp"
#include "meso/stats.hpp"

namespace meso {

/// Column-oriented per-replicate samples of one stage. Integer columns hold
/// seeds and indices; real columns are written with 17 significant digits so
/// a CSV round trip is exact.
class SampleTable {
public:
    using Column = std::variant<std::vector<std::uint64_t>, std::vector<double>>;

    SampleTable() = default;
    explicit SampleTable(std::string label) : label_(std::move(label)) {}

    const std::string& label() const noexcept { return label_; }
    std::size_t rows() const noexcept;
    const std::vector<std::string>& names() const noexcept { return names_; }

    void add_column(std::string name, std::vector<std::uint64_t> values);
    void add_column(std::string name, std::vector<double> values);
    bool has(const std::string& name) const noexcept;
    const std::vector<double>& real(const std::string& name) const;
    const std::vector<std::uint64_t>& integer(const std::string& name) const;

    void write_csv(std::ostream& os) const;
    /// Inverse of write_csv; columns named in `integer_columns` parse as uint64.
    static SampleTable read_csv(std::istream& is, std::string label,
                                const std::vector<std::string>& integer_columns = {"replicate", "seed"});

private:
    std::size_t find(const std::string& name) const;

    std::string label_;
    std::vector<std::string> names_;
    std::vector<Column> columns_;
};

/// Output of one experiment run.
struct ExperimentRecord {
    std::string name;
    nlohmann::json config;
    std::uint64_t config_hash = 0;
    SeedRecord seed;
    bool synthetic_null = false;
    std::vector<SampleTable> stages;
    std::vector<TestReport> reports;
    nlohmann::json diagnostics = nlohmann::json::object();
    std::optional<Intensity> lambda;
    double wall_seconds = 0.0;
    bool complete = false;

    bool passed() const noexcept;
    const SampleTable& stage(const std::string& label) const;
    nlohmann::json reports_json() const;
};

/// Persistence hook for completed stages (resume support).
class StageStore {
public:
    virtual ~StageStore() = default;
    virtual std::optional<SampleTable> load(const std::string& label) = 0;
    virtual void save(const SampleTable& table) = 0;
};

/// A run directory holding manifest.json, samples_<label>.csv and
/// reports.json. Every file is declared in the manifest before it is written.
class RunDirectory final : public StageStore {
public:
    RunDirectory(std::filesystem::path dir, nlohmann::json manifest_header, bool resume);

    const std::filesystem::path& path() const noexcept { return dir_; }
    std::optional<SampleTable> load(const std::string& label) override;
    void save(const SampleTable& table) override;
    /// Write reports.json and mark the manifest complete.
    void finish(const ExperimentRecord& record);
    void write_manifest() const;
    const nlohmann::json& manifest() const noexcept { return manifest_; }

    static std::string sample_file(const std::string& label) { return "samples_" + label + ".csv"; }

private:
    void declare(const std::string& file, const std::string& role);
    void mark_written(const std::string& file);

    std::filesystem::path dir_;
    nlohmann::json manifest_;
};

/// Directory name `<name>-<16 hex digits of hash>`.
std::string run_directory_name(const std::string& name, std::uint64_t hash);

/// Tool version recorded in manifests.
inline constexpr const char* kToolVersion = "0.1.0";
/// Version of the sample CSV column contract.
inline constexpr int kCsvSchemaVersion = 1;

}  // namespace meso
