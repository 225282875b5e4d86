#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path workdir() {
    static const fs::path dir = [] {
        const auto d = fs::temp_directory_path() / "meso_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

Result run(const std::string& args) {
    const auto out = workdir() / "stdout.txt";
    const auto err = workdir() / "stderr.txt";
    const std::string cmd = std::string(MESO_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path write_file(const std::string& name, const std::string& text) {
    const auto p = workdir() / name;
    std::ofstream(p) << text;
    return p;
}

fs::path only_run_dir(const fs::path& parent) {
    fs::path found;
    for (const auto& e : fs::directory_iterator(parent)) found = e.path();
    return found;
}

}  // namespace

TEST_CASE("dos writes the csv contract and is reproducible") {
    const auto cfg = write_file("dos.toml", "[dos]\nL = 60\nrealizations = 8\nbin_width = 0.5\n");
    const auto a = workdir() / "dos_a", b = workdir() / "dos_b";
    REQUIRE(run("dos --config " + cfg.string() + " --out " + a.string() + " --seed 7").code == 0);
    REQUIRE(run("dos --config " + cfg.string() + " --out " + b.string() + " --seed 7 --threads 3").code == 0);
    const auto csv = slurp(a / "dos.csv");
    CHECK(csv.rfind("E,f_hat,std_err\n", 0) == 0);
    CHECK(csv == slurp(b / "dos.csv"));
    const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
    CHECK(manifest["status"] == "complete");
    CHECK(manifest["master_seed"] == 7);
}

TEST_CASE("config problems exit with status 2") {
    CHECK(run("dos --config " + (workdir() / "nope.toml").string()).code == 2);
    const auto unknown = run("experiment teleport");
    CHECK(unknown.code == 2);
    for (const char* name : {"microscopic", "lln", "clt", "partition", "localization", "minami", "green-decay"}) {
        CHECK(unknown.err.find(name) != std::string::npos);
    }
    const auto bad = write_file("bad.toml", "[schedule]\nrealizations = 5\n");
    CHECK(run("experiment lln --config " + bad.string() + " --out " + (workdir() / "bad").string()).code == 2);
    CHECK(run("experiment lln --bogus-flag").code == 2);
}

TEST_CASE("selftest") {
    CHECK(run("selftest").code == 0);
    const auto neg = write_file("neg.toml", "[tests]\ntv_threshold = -0.05\n");
    CHECK(run("selftest --config " + neg.string()).code == 2);
}

TEST_CASE("synthetic-null experiment passes") {
    const auto cfg = write_file("clt.toml", "[schedule]\nrealizations = 500\n");
    const auto r = run("experiment clt --synthetic-null --config " + cfg.string() + " --out " +
                       (workdir() / "clt").string());
    CHECK(r.code == 0);
    CHECK(r.out.find("PASS clt_ks_fitted_normal") != std::string::npos);
}

TEST_CASE("interrupted runs resume to identical samples") {
    const auto cfg = write_file("lln.toml",
                                "[schedule]\nL = [40, 80, 160]\nrealizations = 120\n[dos]\nL = 100\nrealizations = 10\n");
    const auto fresh = workdir() / "lln_fresh", cut = workdir() / "lln_cut";
    // Tiny sizes may fail the statistical checks (exit 4); only the samples matter here.
    const int expected = run("experiment lln --config " + cfg.string() + " --out " + fresh.string() + " --threads 1").code;
    REQUIRE((expected == 0 || expected == 4));

    CHECK(run("experiment lln --config " + cfg.string() + " --out " + cut.string() + " --max-stages 2").code == 130);
    const auto dir = only_run_dir(cut);
    CHECK(nlohmann::json::parse(slurp(dir / "manifest.json"))["status"] == "partial");
    CHECK(!fs::exists(dir / "reports.json"));

    CHECK(run("experiment lln --resume --config " + cfg.string() + " --out " + cut.string() + " --threads 2").code == expected);
    CHECK(nlohmann::json::parse(slurp(dir / "manifest.json"))["status"] == "complete");
    const auto fresh_dir = only_run_dir(fresh);
    CHECK(dir.filename() == fresh_dir.filename());
    for (const auto& e : fs::directory_iterator(fresh_dir)) {
        const auto name = e.path().filename().string();
        if (name.rfind("samples_", 0) == 0) CHECK_MESSAGE(slurp(e.path()) == slurp(dir / name), name);
    }
}
