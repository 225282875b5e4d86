#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "meso/errors.hpp"
#include "meso/experiments.hpp"
#include "selftest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitStatistical = 4;
constexpr int kExitInterrupted = 130;

struct CommonArgs {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
};

json user_config(const CommonArgs& args) {
    json user = args.config.empty() ? json::object() : meso::read_config_file(args.config);
    if (args.seed) user["schedule"]["seed"] = *args.seed;
    if (args.threads) user["schedule"]["threads"] = args.threads;
    return user;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    out << j.dump(2) << '\n';
}

int cmd_dos(const CommonArgs& args) {
    const auto cfg = meso::resolve_config("dos", user_config(args));
    const fs::path out = args.out;
    fs::create_directories(out);
    json manifest = {{"command", "dos"},
                     {"config_path", args.config},
                     {"config_hash", cfg.hash(false)},
                     {"tool_version", meso::kToolVersion},
                     {"master_seed", cfg.schedule.seed.value},
                     {"csv_schema_version", meso::kCsvSchemaVersion},
                     {"status", "partial"},
                     {"files", {{{"path", "dos.csv"}, {"role", "dos"}, {"columns", {"E", "f_hat", "std_err"}}},
                                {{"path", "dos.json"}, {"role", "dos"}}}}};
    write_json(out / "manifest.json", manifest);
    const auto est = meso::run_dos(cfg, args.threads);
    {
        std::ofstream csv(out / "dos.csv", std::ios::binary);
        est.write_csv(csv);
    }
    write_json(out / "dos.json", est.to_json());
    manifest["status"] = "complete";
    write_json(out / "manifest.json", manifest);
    std::cout << "dos: " << est.grid.size() << " grid points (" << meso::to_string(est.method) << ") -> "
              << (out / "dos.csv").string() << '\n';
    return kExitPass;
}

void clear_run_directory(const fs::path& dir) {
    if (!fs::exists(dir)) return;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("samples_", 0) == 0 || name == "reports.json" || name == "manifest.json") fs::remove(entry);
    }
}

int cmd_experiment(const std::string& name, const CommonArgs& args, bool resume, bool synthetic,
                   std::size_t max_stages) {
    const auto& names = meso::experiment_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        std::string list;
        for (const auto& n : names) list += "  " + n + "\n";
        std::cerr << "error: unknown experiment '" << name << "'; valid names:\n" << list;
        return kExitConfig;
    }
    const auto cfg = meso::resolve_config(name, user_config(args));
    if (std::find(cfg.enabled.begin(), cfg.enabled.end(), name) == cfg.enabled.end()) {
        std::cerr << "error: experiment '" << name << "' is not listed in field 'experiment.enabled'\n";
        return kExitConfig;
    }
    const std::uint64_t hash = cfg.hash(synthetic);
    const fs::path dir = fs::path(args.out) / meso::run_directory_name(name, hash);
    if (!resume) clear_run_directory(dir);
    json header = {{"experiment", name},
                   {"config_path", args.config},
                   {"config_hash", hash},
                   {"tool_version", meso::kToolVersion},
                   {"master_seed", cfg.schedule.seed.value},
                   {"synthetic_null", synthetic}};
    meso::RunDirectory run_dir(dir, header, resume);

    meso::RunOptions opts;
    opts.threads = args.threads;
    opts.synthetic_null = synthetic;
    opts.store = &run_dir;
    opts.max_new_stages = max_stages;
    const auto record = meso::run_experiment(cfg, opts);
    if (!record.complete) {
        std::cout << name << ": stopped after " << record.stages.size() << " stage(s); manifest status partial in "
                  << dir.string() << '\n';
        return kExitInterrupted;
    }
    run_dir.finish(record);
    for (const auto& r : record.reports) {
        std::printf("%s %-48s value=%.6g threshold=%.6g n=%zu\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.value,
                    r.threshold, r.n);
    }
    if (record.lambda) std::printf("lambda_hat = %.6g +/- %.2g\n", record.lambda->lambda, record.lambda->std_err);
    std::printf("%s: %s in %.1f s -> %s\n", name.c_str(), record.passed() ? "passed" : "FAILED", record.wall_seconds,
                dir.string().c_str());
    return record.passed() ? kExitPass : kExitStatistical;
}

int cmd_selftest(const std::string& config) {
    if (!config.empty()) meso::resolve_config("microscopic", meso::read_config_file(config));
    const auto result = meso::tools::run_selftest(std::cout);
    std::cout << "selftest: " << result.checks << " checks run, " << result.failures << " failed\n";
    return result.failures == 0 ? kExitPass : kExitStatistical;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mesoscopic eigenvalue statistics for random Schrodinger operators"};
    app.require_subcommand(1);

    CommonArgs common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "TOML or JSON config file");
        sub->add_option("--out", common.out, "output directory")->capture_default_str();
        sub->add_option("--seed", common.seed, "master seed (overrides schedule.seed)");
        sub->add_option("--threads", common.threads, "worker threads (0 = all cores); never changes results");
    };

    auto* dos = app.add_subcommand("dos", "estimate the density of states");
    add_common(dos);

    auto* exp = app.add_subcommand("experiment", "run one experiment");
    std::string exp_name;
    bool resume = false;
    bool synthetic = false;
    std::size_t max_stages = 0;
    exp->add_option("name", exp_name, "microscopic | lln | clt | partition | localization | minami | green-decay")
        ->required();
    add_common(exp);
    exp->add_flag("--resume", resume, "reuse completed stages from an earlier run of the same config");
    exp->add_flag("--synthetic-null", synthetic, "replace spectral counts by Poisson draws");
    exp->add_option("--max-stages", max_stages, "stop after N new stages (testing hook)")->group("");

    auto* self = app.add_subcommand("selftest", "closed-form and identity checks");
    std::string self_config;
    self->add_option("--config", self_config, "validate this config's tolerances first");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitPass : kExitConfig;
    }

    try {
        if (*dos) return cmd_dos(common);
        if (*exp) return cmd_experiment(exp_name, common, resume, synthetic, max_stages);
        return cmd_selftest(self_config);
    } catch (const meso::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const meso::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumeric;
    }
}
