#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>
#include <string>

#include "meso/errors.hpp"
#include "meso/experiments.hpp"

using namespace meso;
using nlohmann::json;

namespace {

class MemoryStore final : public StageStore {
public:
    std::optional<SampleTable> load(const std::string& label) override {
        const auto it = tables.find(label);
        if (it == tables.end()) return std::nullopt;
        std::istringstream is(it->second);
        return SampleTable::read_csv(is, label);
    }
    void save(const SampleTable& table) override {
        std::ostringstream os;
        table.write_csv(os);
        tables[table.label()] = os.str();
    }
    std::map<std::string, std::string> tables;
};

std::string csv_of(const ExperimentRecord& rec) {
    std::ostringstream os;
    for (const auto& t : rec.stages) {
        os << t.label() << '\n';
        t.write_csv(os);
    }
    return os.str();
}

const json kSmallDos = {{"realizations", 20}, {"L", 200}};

}  // namespace

TEST_CASE("microscopic samples do not depend on the worker count") {
    const auto cfg = resolve_config("microscopic", json{{"schedule", {{"L", {150}}, {"realizations", 120}}},
                                                        {"dos", kSmallDos}});
    RunOptions one, four;
    one.threads = 1;
    four.threads = 4;
    const auto a = run_microscopic(cfg, one);
    const auto b = run_microscopic(cfg, four);
    CHECK(a.complete);
    CHECK(csv_of(a) == csv_of(b));
    const auto& t = a.stage("L150");
    CHECK(t.rows() == 120);
    CHECK(t.has("count"));
    CHECK(t.has("count_adjacent"));
}

TEST_CASE("vanishing microscopic window gives empty counts") {
    const auto cfg = resolve_config("microscopic", json{{"schedule", {{"L", {100}}, {"realizations", 200}}},
                                                        {"window", {{"a", -1e-9}, {"b", 1e-9}}},
                                                        {"dos", kSmallDos}});
    const auto rec = run_microscopic(cfg);
    for (double c : rec.stage("L100").real("count")) CHECK(c == 0.0);
}

TEST_CASE("synthetic null passes the microscopic, LLN and CLT checks") {
    const json small{{"realizations", 1000}};
    for (const std::string name : {"microscopic", "lln", "clt"}) {
        const auto cfg = resolve_config(name, json{{"schedule", small}});
        RunOptions opts;
        opts.synthetic_null = true;
        const auto rec = run_experiment(cfg, opts);
        CHECK_MESSAGE(rec.passed(), name);
        REQUIRE(rec.lambda.has_value());
        CHECK(rec.lambda->lambda == doctest::Approx(0.15 * (cfg.window.b - cfg.window.a)));
    }
}

TEST_CASE("synthetic CLT variance constant is close to lambda") {
    const auto cfg = resolve_config("clt", json{{"schedule", {{"realizations", 1000}}}});
    RunOptions opts;
    opts.synthetic_null = true;
    const auto rec = run_clt(cfg, opts);
    const auto& last = rec.diagnostics["per_L"].back();
    const double v = last["variance_constant"].get<double>();
    const double se = last["variance_constant_std_err"].get<double>();
    CHECK(std::abs(v - rec.lambda->lambda) <= 3.0 * se + 3.0 * rec.lambda->std_err);
}

TEST_CASE("identity partition has zero discrepancy") {
    const auto cfg = resolve_config("partition", json{{"schedule", {{"L", {50, 100}}, {"realizations", 100}}},
                                                      {"partition", {{"beta", 1.0}}},
                                                      {"dos", kSmallDos}});
    const auto rec = run_partition_approximation(cfg);
    for (const auto& t : rec.stages) {
        for (double d : t.real("discrepancy")) CHECK(d == 0.0);
        CHECK(t.real("count") == t.real("cell_count_sum"));
    }
}

TEST_CASE("weak disorder leaves a larger partition discrepancy than strong disorder") {
    auto run = [](double width) {
        const auto cfg = resolve_config("partition", json{{"model", {{"width", width}}},
                                                          {"schedule", {{"L", {400}}, {"realizations", 200}}},
                                                          {"partition", {{"trace", false}}},
                                                          {"dos", kSmallDos}});
        return run_partition_approximation(cfg).diagnostics["per_L"][0]["normalized_discrepancy"].get<double>();
    };
    CHECK(run(0.5) > run(15.0));
}

TEST_CASE("localization probe separates strong disorder from a near-free chain") {
    auto rate = [](double width) {
        const auto cfg = resolve_config("localization", json{{"model", {{"width", width}}},
                                                             {"schedule", {{"realizations", 400}}}});
        return run_localization_probe(cfg).diagnostics["C2"].get<double>();
    };
    CHECK(rate(15.0) > 0.3);
    CHECK(std::abs(rate(0.01)) < 0.1);
}

TEST_CASE("green comparison control is exactly zero") {
    const auto cfg = resolve_config("green-decay", json{{"schedule", {{"realizations", 100}}},
                                                        {"green", {{"half_width", 10}, {"d_max", 6}}}});
    const auto rec = run_green_comparison_decay(cfg);
    for (double c : rec.stage("green").real("control")) CHECK(c == 0.0);
}

TEST_CASE("stage budget stops a run and a resumed run completes identically") {
    const auto cfg = resolve_config("lln", json{{"schedule", {{"L", {50, 100, 200}}, {"realizations", 150}}},
                                                {"dos", kSmallDos}});
    MemoryStore store;
    RunOptions opts;
    opts.store = &store;
    opts.max_new_stages = 2;
    const auto partial = run_lln(cfg, opts);
    CHECK(!partial.complete);
    CHECK(partial.reports.empty());
    CHECK(store.tables.size() == 2);

    opts.max_new_stages = 0;
    const auto resumed = run_lln(cfg, opts);
    CHECK(resumed.complete);
    const auto fresh = run_lln(cfg);
    CHECK(csv_of(resumed) == csv_of(fresh));
    CHECK(resumed.reports_json()["reports"] == fresh.reports_json()["reports"]);
    CHECK(resumed.diagnostics == fresh.diagnostics);
}

TEST_CASE("dos command estimate") {
    const auto cfg = resolve_config("dos", json{{"dos", {{"L", 100}, {"realizations", 10}, {"bin_width", 0.5}}}});
    const auto est = run_dos(cfg, 1);
    CHECK(est.method == DosMethod::Histogram);
    CHECK(est.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
    const auto st = run_dos(resolve_config("dos", json{{"dos", {{"L", 50}, {"realizations", 4}, {"method", "stieltjes"}}}}), 1);
    CHECK(st.meta.im_z == doctest::Approx(0.5));
}
