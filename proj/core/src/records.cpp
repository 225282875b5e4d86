#include "meso/records.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "meso/errors.hpp"

namespace meso {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t SampleTable::rows() const noexcept {
    if (columns_.empty()) return 0;
    return std::visit([](const auto& v) { return v.size(); }, columns_.front());
}

std::size_t SampleTable::find(const std::string& name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw DomainError("sample table '" + label_ + "' has no column '" + name + "'");
    return static_cast<std::size_t>(it - names_.begin());
}

bool SampleTable::has(const std::string& name) const noexcept {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

void SampleTable::add_column(std::string name, std::vector<std::uint64_t> values) {
    if (!columns_.empty() && values.size() != rows()) throw DomainError("column length mismatch");
    names_.push_back(std::move(name));
    columns_.emplace_back(std::move(values));
}

void SampleTable::add_column(std::string name, std::vector<double> values) {
    if (!columns_.empty() && values.size() != rows()) throw DomainError("column length mismatch");
    names_.push_back(std::move(name));
    columns_.emplace_back(std::move(values));
}

const std::vector<double>& SampleTable::real(const std::string& name) const {
    const auto* v = std::get_if<std::vector<double>>(&columns_[find(name)]);
    if (!v) throw DomainError("column '" + name + "' is not real-valued");
    return *v;
}

const std::vector<std::uint64_t>& SampleTable::integer(const std::string& name) const {
    const auto* v = std::get_if<std::vector<std::uint64_t>>(&columns_[find(name)]);
    if (!v) throw DomainError("column '" + name + "' is not integer-valued");
    return *v;
}

void SampleTable::write_csv(std::ostream& os) const {
    for (std::size_t c = 0; c < names_.size(); ++c) os << (c ? "," : "") << names_[c];
    os << '\n';
    char buf[64];
    const std::size_t n = rows();
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < columns_.size(); ++c) {
            if (c) os << ',';
            if (const auto* u = std::get_if<std::vector<std::uint64_t>>(&columns_[c])) {
                os << (*u)[r];
            } else {
                std::snprintf(buf, sizeof buf, "%.17g", std::get<std::vector<double>>(columns_[c])[r]);
                os << buf;
            }
        }
        os << '\n';
    }
}

SampleTable SampleTable::read_csv(std::istream& is, std::string label, const std::vector<std::string>& integer_columns) {
    SampleTable t(std::move(label));
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("empty sample file for stage '" + t.label_ + "'");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    std::vector<bool> is_int;
    for (const auto& h : header) {
        is_int.push_back(std::find(integer_columns.begin(), integer_columns.end(), h) != integer_columns.end());
    }
    std::vector<std::vector<std::uint64_t>> ints(header.size());
    std::vector<std::vector<double>> reals(header.size());
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (!std::getline(ss, cell, ',')) throw ConfigError("truncated row in samples of '" + t.label_ + "'");
            if (is_int[c]) {
                std::uint64_t v = 0;
                const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                if (res.ec != std::errc{}) throw ConfigError("bad integer in samples of '" + t.label_ + "'");
                ints[c].push_back(v);
            } else {
                reals[c].push_back(std::stod(cell));
            }
        }
    }
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (is_int[c]) {
            t.add_column(header[c], std::move(ints[c]));
        } else {
            t.add_column(header[c], std::move(reals[c]));
        }
    }
    return t;
}

bool ExperimentRecord::passed() const noexcept {
    return complete && std::all_of(reports.begin(), reports.end(), [](const TestReport& r) { return r.pass; });
}

const SampleTable& ExperimentRecord::stage(const std::string& label) const {
    for (const auto& s : stages) {
        if (s.label() == label) return s;
    }
    throw DomainError("record has no stage '" + label + "'");
}

json ExperimentRecord::reports_json() const {
    json j;
    j["experiment"] = name;
    j["config_hash"] = config_hash;
    j["seed"] = seed.value;
    j["synthetic_null"] = synthetic_null;
    j["complete"] = complete;
    j["passed"] = passed();
    j["reports"] = reports;
    j["diagnostics"] = diagnostics;
    if (lambda) j["lambda_hat"] = {{"value", lambda->lambda}, {"std_err", lambda->std_err}};
    j["wall_seconds"] = wall_seconds;
    j["config"] = config;
    return j;
}

std::string run_directory_name(const std::string& name, std::uint64_t hash) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return name + "-" + buf;
}

RunDirectory::RunDirectory(fs::path dir, json header, bool resume) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    const auto manifest_path = dir_ / "manifest.json";
    if (resume && fs::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        try {
            manifest_ = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError("cannot resume: corrupt manifest " + manifest_path.string() + ": " + e.what());
        }
        if (manifest_.value("config_hash", std::uint64_t{0}) != header.value("config_hash", std::uint64_t{0})) {
            throw ConfigError("cannot resume: manifest in " + dir_.string() + " belongs to a different config");
        }
        manifest_["status"] = "partial";
    } else {
        manifest_ = std::move(header);
        manifest_["status"] = "partial";
        manifest_["csv_schema_version"] = kCsvSchemaVersion;
        manifest_["files"] = json::array();
    }
    write_manifest();
}

void RunDirectory::write_manifest() const {
    const auto tmp = dir_ / "manifest.json.tmp";
    {
        std::ofstream out(tmp);
        out << manifest_.dump(2) << '\n';
    }
    fs::rename(tmp, dir_ / "manifest.json");
}

void RunDirectory::declare(const std::string& file, const std::string& role) {
    for (const auto& f : manifest_["files"]) {
        if (f.at("path") == file) return;
    }
    manifest_["files"].push_back({{"path", file}, {"role", role}, {"written", false}});
    write_manifest();
}

void RunDirectory::mark_written(const std::string& file) {
    for (auto& f : manifest_["files"]) {
        if (f.at("path") == file) f["written"] = true;
    }
    write_manifest();
}

std::optional<SampleTable> RunDirectory::load(const std::string& label) {
    const std::string file = sample_file(label);
    for (const auto& f : manifest_["files"]) {
        if (f.at("path") == file && f.value("written", false)) {
            std::ifstream in(dir_ / file);
            if (!in) return std::nullopt;
            return SampleTable::read_csv(in, label);
        }
    }
    return std::nullopt;
}

void RunDirectory::save(const SampleTable& table) {
    const std::string file = sample_file(table.label());
    declare(file, "samples");
    const auto tmp = dir_ / (file + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        table.write_csv(out);
    }
    fs::rename(tmp, dir_ / file);
    mark_written(file);
}

void RunDirectory::finish(const ExperimentRecord& record) {
    declare("reports.json", "reports");
    {
        std::ofstream out(dir_ / "reports.json");
        out << record.reports_json().dump(2) << '\n';
    }
    mark_written("reports.json");
    manifest_["status"] = record.complete ? "complete" : "partial";
    manifest_["passed"] = record.passed();
    write_manifest();
}

}  // namespace meso
