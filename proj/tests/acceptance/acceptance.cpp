// Acceptance harness: one PASS/FAIL line per criterion.
//
//   meso_acceptance            run every criterion
//   meso_acceptance 3 9        run the listed criteria
//
// Exit status: 0 when every selected criterion passes, 1 when one fails, and
// kKnownRed when the only failures are criteria listed in kKnownRed (see the
// README for why those are expected to stay red at these sizes).

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "meso/experiments.hpp"
#include "meso/spectral.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kKnownRedExit = 77;
const std::set<int> kKnownRed{6};

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::vector<double> eigen_spectrum(const meso::DisorderedOperator& op) {
    const auto n = static_cast<Eigen::Index>(op.size());
    const auto dense = op.dense();
    const Eigen::Map<const Eigen::MatrixXd> h(dense.data(), n, n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
    return {es.eigenvalues().data(), es.eigenvalues().data() + n};
}

Outcome oracle_equivalence() {
    std::mt19937_64 gen(20240611);
    std::size_t pairs = 0, mismatches = 0;
    meso::JitterLog log;
    const auto spec = meso::PotentialSpec::uniform_width(4.0);
    for (int k = 0; k < 24; ++k) {
        meso::LatticeBox box;
        if (k % 2 == 0) {
            box = meso::LatticeBox::cube(1, 0, std::uniform_int_distribution<std::int64_t>(2, 2000)(gen));
        } else {
            box = meso::LatticeBox::cube(2, 0, std::uniform_int_distribution<std::int64_t>(2, 40)(gen));
        }
        const auto op = meso::sample_operator(box, spec, meso::SeedRecord{gen()});
        const auto ev = eigen_spectrum(op);
        const auto b = op.spectral_bounds();
        std::uniform_real_distribution<double> e(b.lo - 0.5, b.hi + 0.5);
        for (int i = 0; i < 42; ++i) {
            double lo = e(gen), hi = e(gen);
            if (lo > hi) std::swap(lo, hi);
            if (i % 7 == 0) hi = lo + 1e-3;  // narrow windows
            if (!(hi > lo)) hi = lo + 1e-6;
            const auto expected = static_cast<std::size_t>(
                std::count_if(ev.begin(), ev.end(), [&](double x) { return x >= lo && x < hi; }));
            mismatches += meso::count_in_interval(op, {lo, hi}, &log) != expected;
            ++pairs;
        }
    }
    return {pairs >= 1000 && mismatches == 0, std::to_string(pairs) + " pairs, " + std::to_string(mismatches) +
                                                  " mismatches, " + std::to_string(log.events) + " jitter events"};
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(MESO_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch() {
    static const fs::path dir = [] {
        const auto d = fs::temp_directory_path() / "meso_acceptance";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

Outcome closed_forms() {
    const auto log = scratch() / "selftest.log";
    const int code = run_cli("selftest", log);
    const auto text = slurp(log);
    const auto pos = text.rfind("selftest:");
    std::string summary = pos == std::string::npos ? "no summary" : text.substr(pos);
    summary.erase(std::remove(summary.begin(), summary.end(), '\n'), summary.end());
    return {code == 0, summary};
}

// Runs an experiment with its default configuration and checks the named reports.
Outcome experiment(const std::string& name, const std::vector<std::string>& reports, bool synthetic = false) {
    const auto cfg = meso::resolve_config(name, json::object());
    meso::RunOptions opts;
    opts.synthetic_null = synthetic;
    const auto rec = meso::run_experiment(cfg, opts);
    bool pass = rec.complete;
    std::size_t matched = 0;
    std::ostringstream detail;
    for (const auto& r : rec.reports) {
        const bool wanted = std::any_of(reports.begin(), reports.end(),
                                        [&](const std::string& p) { return r.name.rfind(p, 0) == 0; });
        if (!wanted) continue;
        ++matched;
        pass = pass && r.pass;
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s%s=%.4g(<=%.4g)", matched > 1 ? " " : "", r.name.c_str(), r.value,
                      r.threshold);
        detail << buf;
    }
    return {pass && matched >= reports.size(), detail.str()};
}

Outcome determinism() {
    bool pass = true;
    std::ostringstream detail;
    for (const std::string name : {"microscopic", "partition"}) {
        const auto cfg = scratch() / (name + ".toml");
        if (name == "partition") {
            std::ofstream(cfg) << "[schedule]\nL = [200, 400]\nrealizations = 200\n";
        } else {
            std::ofstream(cfg) << "[schedule]\nrealizations = 1000\n";
        }
        std::vector<std::string> csv[2];
        const unsigned threads[2] = {1, 4};
        for (int k = 0; k < 2; ++k) {
            const auto out = scratch() / (name + "_t" + std::to_string(threads[k]));
            run_cli("experiment " + name + " --config " + cfg.string() + " --out " + out.string() + " --threads " +
                        std::to_string(threads[k]),
                    scratch() / "determinism.log");
            for (const auto& dir : fs::directory_iterator(out)) {
                std::vector<fs::path> files;
                for (const auto& f : fs::directory_iterator(dir)) {
                    if (f.path().filename().string().rfind("samples_", 0) == 0) files.push_back(f.path());
                }
                std::sort(files.begin(), files.end());
                for (const auto& f : files) csv[k].push_back(f.filename().string() + "\n" + slurp(f));
            }
        }
        const bool same = !csv[0].empty() && csv[0] == csv[1];
        pass = pass && same;
        detail << name << ": " << csv[0].size() << " sample files " << (same ? "identical" : "DIFFER") << "; ";
    }
    return {pass, detail.str() + "threads 1 vs 4"};
}

Outcome synthetic_null() {
    bool pass = true;
    std::ostringstream detail;
    const std::pair<std::string, std::vector<std::string>> runs[] = {
        {"microscopic", {"tv_poisson", "mean_vs_lambda"}},
        {"lln", {"lln_deviation_strictly_decreasing", "lln_deviation_final"}},
        {"clt", {"clt_ks_fitted_normal", "clt_abs_skewness"}}};
    for (const auto& [name, reports] : runs) {
        const auto o = experiment(name, reports, true);
        pass = pass && o.pass;
        detail << name << (o.pass ? " pass; " : " FAIL; ");
    }
    return {pass, detail.str()};
}

struct Criterion {
    int id;
    std::string title;
    double budget_seconds;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "inertia counts equal dense counts", 300, oracle_equivalence},
        {2, "closed-form suite", 60, closed_forms},
        {3, "microscopic Poisson statistics", 900, [] { return experiment("microscopic", {"tv_poisson", "mean_vs_lambda"}); }},
        {4, "mesoscopic law of large numbers", 1200,
         [] { return experiment("lln", {"lln_deviation_strictly_decreasing", "lln_deviation_final"}); }},
        {5, "mesoscopic CLT shape", 1800,
         [] { return experiment("clt", {"clt_ks_fitted_normal", "clt_abs_skewness"}); }},
        {6, "partition approximation", 1200,
         [] { return experiment("partition", {"partition_discrepancy_decreasing", "partition_final_over_initial"}); }},
        {7, "localization probe", 600, [] { return experiment("localization", {"localization_rate", "localization_fit_r2"}); }},
        {8, "Minami tail ratios", 600, [] { return experiment("minami", {"minami_ratio_upper", "minami_ratio_lower"}); }},
        {9, "determinism across worker counts", 300, determinism},
        {10, "synthetic-null pipeline", 180, synthetic_null},
    };

    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0, known_red = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool pass = o.pass && secs <= c.budget_seconds;
        std::printf("%s criterion %d (%s): %s [%.1f s of %.0f s]\n", pass ? "PASS" : "FAIL", c.id, c.title.c_str(),
                    o.detail.c_str(), secs, c.budget_seconds);
        std::fflush(stdout);
        if (!pass) (kKnownRed.count(c.id) ? known_red : failures)++;
    }
    if (failures > 0) return 1;
    return known_red > 0 ? kKnownRedExit : 0;
}
