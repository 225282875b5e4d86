#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "meso/config.hpp"
#include "meso/errors.hpp"
#include "meso/records.hpp"

using namespace meso;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("meso_unit_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("defaults resolve for every experiment") {
    for (const auto& name : experiment_names()) {
        const auto cfg = resolve_config(name, json::object());
        CHECK(cfg.name == name);
        CHECK(!cfg.schedule.L.empty());
        CHECK(cfg.schedule.realizations >= 100);
    }
    const auto micro = resolve_config("microscopic", json::object());
    CHECK(micro.window.eta == 1.0);
    CHECK(micro.schedule.L == std::vector<std::int64_t>{2000});
    CHECK(micro.schedule.realizations == 5000);
    CHECK(micro.schedule.randomize_offset);
    const auto clt = resolve_config("clt", json::object());
    CHECK(clt.window.eta == doctest::Approx(0.6));
    CHECK(clt.schedule.L == std::vector<std::int64_t>{500, 2000, 8000});
    CHECK_THROWS_AS(resolve_config("bogus", json::object()), ConfigError);
}

TEST_CASE("user values override defaults and are validated") {
    const auto cfg = resolve_config("lln", json{{"schedule", {{"L", {10, 20}}, {"realizations", 150}}}});
    CHECK(cfg.schedule.L == std::vector<std::int64_t>{10, 20});
    CHECK(cfg.schedule.realizations == 150);

    CHECK_THROWS_AS(resolve_config("lln", json{{"schedule", {{"bogus", 1}}}}), ConfigError);
    CHECK_THROWS_AS(resolve_config("lln", json{{"tests", {{"tv_threshold", -0.1}}}}), ConfigError);
    CHECK_THROWS_AS(resolve_config("lln", json{{"schedule", {{"realizations", 10}}}}), ConfigError);
    CHECK_THROWS_AS(resolve_config("clt", json{{"window", {{"eta", 1.0}}}}), ConfigError);
    CHECK_THROWS_AS(resolve_config("microscopic", json{{"window", {{"eta", 0.5}}}}), ConfigError);
    CHECK_THROWS_AS(resolve_config("lln", json{{"model", {{"width", "wide"}}}}), ConfigError);
    CHECK_THROWS_AS(resolve_config("partition", json{{"partition", {{"alpha", 0.0}}}}), ConfigError);
    try {
        resolve_config("lln", json{{"model", {{"width", -1.0}}}});
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("model.width") != std::string::npos);
    }
}

TEST_CASE("config hash ignores threads only") {
    const auto a = resolve_config("clt", json::object());
    const auto b = resolve_config("clt", json{{"schedule", {{"threads", 7}}}});
    const auto c = resolve_config("clt", json{{"schedule", {{"seed", 1}}}});
    CHECK(a.hash(false) == b.hash(false));
    CHECK(a.hash(false) != c.hash(false));
    CHECK(a.hash(false) != a.hash(true));
}

TEST_CASE("config files in TOML and JSON") {
    const auto dir = scratch("cfg");
    {
        std::ofstream(dir / "c.toml") << "[model]\nwidth = 6.0\n[schedule]\nL = [50, 100]\nseed = 9\n";
        std::ofstream(dir / "c.json") << R"({"model": {"width": 6.0}, "schedule": {"L": [50, 100], "seed": 9}})";
        std::ofstream(dir / "bad.toml") << "[model\nwidth = ";
    }
    const auto t = read_config_file(dir / "c.toml");
    const auto j = read_config_file(dir / "c.json");
    CHECK(resolve_config("lln", t).hash(false) == resolve_config("lln", j).hash(false));
    CHECK(resolve_config("lln", t).model.potential.rho_sup() == doctest::Approx(1.0 / 6.0));
    CHECK_THROWS_AS(read_config_file(dir / "bad.toml"), ConfigError);
    CHECK_THROWS_AS(read_config_file(dir / "missing.toml"), ConfigError);
}

TEST_CASE("sample tables round-trip through CSV") {
    SampleTable t("L100");
    t.add_column("replicate", std::vector<std::uint64_t>{0, 1, 2});
    t.add_column("seed", std::vector<std::uint64_t>{18446744073709551615ull, 5, 6});
    t.add_column("value", std::vector<double>{0.1, 1.0 / 3.0, -2.5e-300});
    CHECK(t.rows() == 3);
    CHECK_THROWS(t.add_column("short", std::vector<double>{1.0}));
    std::ostringstream os;
    t.write_csv(os);
    CHECK(os.str().rfind("replicate,seed,value\n", 0) == 0);
    std::istringstream is(os.str());
    const auto back = SampleTable::read_csv(is, "L100");
    CHECK(back.names() == t.names());
    CHECK(back.integer("seed") == t.integer("seed"));
    CHECK(back.real("value") == t.real("value"));
    std::ostringstream again;
    back.write_csv(again);
    CHECK(again.str() == os.str());
}

TEST_CASE("run directory manifest and resume") {
    const auto dir = scratch("run") / run_directory_name("lln", 0xabcULL);
    CHECK(dir.filename().string() == "lln-0000000000000abc");
    const json header{{"experiment", "lln"}, {"config_hash", 42}};
    {
        RunDirectory run(dir, header, false);
        CHECK(run.manifest()["status"] == "partial");
        SampleTable t("L10");
        t.add_column("replicate", std::vector<std::uint64_t>{0, 1});
        t.add_column("count", std::vector<double>{3, 4});
        run.save(t);
        CHECK(fs::exists(dir / "samples_L10.csv"));
        bool declared = false;
        for (const auto& f : run.manifest()["files"]) declared = declared || f["path"] == "samples_L10.csv";
        CHECK(declared);
    }
    {
        RunDirectory run(dir, header, true);
        const auto loaded = run.load("L10");
        REQUIRE(loaded.has_value());
        CHECK(loaded->real("count") == std::vector<double>{3, 4});
        CHECK(!run.load("L20").has_value());
        ExperimentRecord rec;
        rec.name = "lln";
        rec.complete = true;
        rec.reports.push_back(make_report("x", 0.1, 0.2, 2));
        run.finish(rec);
        CHECK(run.manifest()["status"] == "complete");
        CHECK(fs::exists(dir / "reports.json"));
    }
    json other = header;
    other["config_hash"] = 43;
    CHECK_THROWS_AS(RunDirectory(dir, other, true), ConfigError);
}
