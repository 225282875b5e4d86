#include "meso/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "meso/errors.hpp"

namespace meso {

using nlohmann::json;

namespace {

json common_defaults() {
    return {
        {"model",
         {{"dimension", 1},
          {"potential", "uniform"},
          {"width", 4.0},
          {"lo", nullptr},
          {"hi", nullptr},
          {"edges", nullptr},
          {"density", nullptr},
          {"hopping", 1.0}}},
        {"window", {{"energy", 0.0}, {"eta", 1.0}, {"a", -1.0}, {"b", 1.0}}},
        {"schedule",
         {{"L", {2000}},
          {"realizations", 5000},
          {"seed", 20240611},
          {"threads", 0},
          {"randomize_offset", false},
          {"trim_scale", 1.0}}},
        {"dos",
         {{"L", 0},
          {"realizations", 400},
          {"bin_width", 0.05},
          {"lo", -4.5},
          {"hi", 4.5},
          {"method", "histogram"},
          {"im_z", 0.0}}},
        {"tests",
         {{"tv_threshold", 0.05},
          {"ks_coefficient", 1.358},
          {"z_sigma", 3.0},
          {"lln_delta", 0.2},
          {"lln_final_max", 0.1},
          {"partition_final_ratio", 0.5},
          {"localization_min_r2", 0.95},
          {"minami_ratio_lo", 2.5},
          {"minami_ratio_hi", 6.0},
          {"lindeberg_eps", 0.5}}},
        {"partition", {{"alpha", 0.25}, {"beta", 0.5}, {"trace", true}}},
        {"localization",
         {{"s", 0.5}, {"s_values", {0.3, 0.5, 0.7}}, {"im_z", 1e-3}, {"r_min", 2}, {"r_max", 12}, {"margin", 8}}},
        {"minami", {{"halvings", 2}}},
        {"green", {{"half_width", 20}, {"margin", 10}, {"d_max", 8}, {"im_z", 0.05}}},
        {"synthetic", {{"dos", 0.15}}},
        {"experiment", {{"enabled", experiment_names()}}},
    };
}

void reject_unknown_keys(const json& user, const json& defaults, const std::string& prefix) {
    if (!user.is_object()) throw ConfigError("configuration root must be a table");
    for (const auto& [key, value] : user.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (!defaults.contains(key)) throw ConfigError("unknown configuration field '" + path + "'");
        if (value.is_object()) {
            if (!defaults.at(key).is_object()) throw ConfigError("field '" + path + "' must not be a table");
            reject_unknown_keys(value, defaults.at(key), path);
        }
    }
}

template <class T>
T get(const json& root, const char* section, const char* key) {
    const auto& v = root.at(section).at(key);
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("field '") + section + "." + key + "' has the wrong type");
    }
}

double get_number(const json& root, const char* section, const char* key) {
    const double v = get<double>(root, section, key);
    if (!std::isfinite(v)) throw ConfigError(std::string("field '") + section + "." + key + "' must be finite");
    return v;
}

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ConfigError("field '" + field + "' " + what);
}

PotentialSpec parse_potential(const json& m) {
    const auto family = m.at("potential").is_string() ? m.at("potential").get<std::string>() : std::string{};
    if (family == "uniform") {
        if (!m.at("lo").is_null() || !m.at("hi").is_null()) {
            require(m.at("lo").is_number() && m.at("hi").is_number(), "model.lo", "and model.hi must both be set");
            return PotentialSpec::uniform(m.at("lo").get<double>(), m.at("hi").get<double>());
        }
        require(m.at("width").is_number(), "model.width", "must be a number");
        require(m.at("width").get<double>() > 0.0, "model.width", "must be positive");
        return PotentialSpec::uniform_width(m.at("width").get<double>());
    }
    if (family == "table") {
        require(m.at("edges").is_array() && m.at("density").is_array(), "model.edges",
                "and model.density are required for a table potential");
        return PotentialSpec::table(m.at("edges").get<std::vector<double>>(),
                                    m.at("density").get<std::vector<double>>());
    }
    throw ConfigError("field 'model.potential' must be \"uniform\" or \"table\"");
}

json toml_to_json(const toml::node& node) {
    if (const auto* t = node.as_table()) {
        json out = json::object();
        for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
        return out;
    }
    if (const auto* a = node.as_array()) {
        json out = json::array();
        for (const auto& v : *a) out.push_back(toml_to_json(v));
        return out;
    }
    if (const auto* v = node.as_integer()) return v->get();
    if (const auto* v = node.as_floating_point()) return v->get();
    if (const auto* v = node.as_boolean()) return v->get();
    if (const auto* v = node.as_string()) return v->get();
    throw ConfigError("unsupported TOML value (dates and times are not accepted)");
}

bool is_statistical(std::string_view name) {
    return name == "microscopic" || name == "lln" || name == "clt" || name == "minami";
}

}  // namespace

json default_config(std::string_view name) {
    json d = common_defaults();
    if (name == "dos") {
        d["schedule"]["L"] = {1000};
        d["dos"]["L"] = 1000;
        d["dos"]["realizations"] = 200;
    } else if (name == "microscopic") {
        d["schedule"]["randomize_offset"] = true;
    } else if (name == "lln") {
        d["window"] = {{"energy", 0.0}, {"eta", 0.5}, {"a", -4.0}, {"b", 4.0}};
        d["schedule"]["L"] = {250, 1000, 4000};
        d["schedule"]["realizations"] = 2000;
    } else if (name == "clt") {
        d["window"] = {{"energy", 0.0}, {"eta", 0.6}, {"a", -25.0}, {"b", 25.0}};
        d["schedule"]["L"] = {500, 2000, 8000};
        d["schedule"]["realizations"] = 2000;
    } else if (name == "partition") {
        d["window"] = {{"energy", 0.0}, {"eta", 0.5}, {"a", -4.0}, {"b", 4.0}};
        d["schedule"]["L"] = {500, 2000, 8000};
        d["schedule"]["realizations"] = 2000;
    } else if (name == "localization") {
        d["model"]["width"] = 15.0;
        d["schedule"]["L"] = {12};
        d["schedule"]["realizations"] = 10000;
    } else if (name == "minami") {
        d["window"] = {{"energy", 0.0}, {"eta", 1.0}, {"a", -2.0}, {"b", 2.0}};
        d["schedule"]["L"] = {1000};
        d["schedule"]["realizations"] = 10000;
    } else if (name == "green-decay") {
        d["model"]["width"] = 15.0;
        d["schedule"]["L"] = {20};
        d["schedule"]["realizations"] = 10000;
    } else {
        std::string list;
        for (const auto& n : experiment_names()) list += (list.empty() ? "" : ", ") + n;
        throw ConfigError("unknown experiment '" + std::string(name) + "'; valid names: " + list);
    }
    return d;
}

ExperimentConfig resolve_config(std::string_view name, const json& user) {
    json r = default_config(name);
    if (!user.is_null()) {
        reject_unknown_keys(user, r, "");
        r.merge_patch(user);
    }

    ExperimentConfig c;
    c.name = std::string(name);
    c.resolved = r;

    const auto& m = r.at("model");
    c.model.dimension = get<int>(r, "model", "dimension");
    require(c.model.dimension >= 1 && c.model.dimension <= kMaxDim, "model.dimension", "must be 1, 2 or 3");
    c.model.potential = parse_potential(m);
    c.model.hopping = get_number(r, "model", "hopping");

    c.window.energy = get_number(r, "window", "energy");
    c.window.eta = get_number(r, "window", "eta");
    c.window.a = get_number(r, "window", "a");
    c.window.b = get_number(r, "window", "b");
    try {
        c.window.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("field 'window': ") + e.what());
    }
    if (name == "microscopic" || name == "minami") {
        require(c.window.eta == 1.0, "window.eta", "must be 1 for microscopic windows");
    } else if (name == "clt" || name == "partition") {
        require(c.window.eta < 1.0, "window.eta", "must lie in (0, 1)");
    }

    c.schedule.L = get<std::vector<std::int64_t>>(r, "schedule", "L");
    require(!c.schedule.L.empty(), "schedule.L", "must not be empty");
    for (std::size_t i = 0; i < c.schedule.L.size(); ++i) {
        require(c.schedule.L[i] >= 1, "schedule.L", "entries must be positive");
        if (i > 0) require(c.schedule.L[i] > c.schedule.L[i - 1], "schedule.L", "must be strictly increasing");
    }
    const auto n = get<std::int64_t>(r, "schedule", "realizations");
    require(n >= 2, "schedule.realizations", "must be at least 2");
    if (is_statistical(name)) require(n >= 100, "schedule.realizations", "must be at least 100 for statistical tests");
    c.schedule.realizations = static_cast<std::size_t>(n);
    c.schedule.seed = SeedRecord{get<std::uint64_t>(r, "schedule", "seed")};
    const auto threads = get<std::int64_t>(r, "schedule", "threads");
    require(threads >= 0, "schedule.threads", "must be non-negative");
    c.schedule.threads = static_cast<unsigned>(threads);
    c.schedule.randomize_offset = get<bool>(r, "schedule", "randomize_offset");
    c.schedule.trim_scale = get_number(r, "schedule", "trim_scale");
    require(c.schedule.trim_scale >= 0.0, "schedule.trim_scale", "must be non-negative");

    c.dos.L = get<std::int64_t>(r, "dos", "L");
    require(c.dos.L >= 0, "dos.L", "must be non-negative");
    const auto dn = get<std::int64_t>(r, "dos", "realizations");
    require(dn >= 2, "dos.realizations", "must be at least 2");
    c.dos.realizations = static_cast<std::size_t>(dn);
    c.dos.bin_width = get_number(r, "dos", "bin_width");
    require(c.dos.bin_width >= 0.0, "dos.bin_width", "must be non-negative (0 selects Freedman-Diaconis)");
    c.dos.lo = get_number(r, "dos", "lo");
    c.dos.hi = get_number(r, "dos", "hi");
    require(c.dos.hi > c.dos.lo, "dos.hi", "must exceed dos.lo");
    c.dos.method = get<std::string>(r, "dos", "method");
    require(c.dos.method == "histogram" || c.dos.method == "stieltjes", "dos.method",
            "must be \"histogram\" or \"stieltjes\"");
    c.dos.im_z = get_number(r, "dos", "im_z");
    require(c.dos.im_z >= 0.0, "dos.im_z", "must be non-negative (0 selects 10x the bin width)");

    const auto& t = r.at("tests");
    for (const auto& [key, value] : t.items()) {
        require(value.is_number(), "tests." + key, "must be a number");
        require(value.get<double>() >= 0.0, "tests." + key, "must be non-negative");
    }
    c.tests.tv_threshold = t.at("tv_threshold");
    c.tests.ks_coefficient = t.at("ks_coefficient");
    c.tests.z_sigma = t.at("z_sigma");
    c.tests.lln_delta = t.at("lln_delta");
    c.tests.lln_final_max = t.at("lln_final_max");
    c.tests.partition_final_ratio = t.at("partition_final_ratio");
    c.tests.localization_min_r2 = t.at("localization_min_r2");
    c.tests.minami_ratio_lo = t.at("minami_ratio_lo");
    c.tests.minami_ratio_hi = t.at("minami_ratio_hi");
    c.tests.lindeberg_eps = t.at("lindeberg_eps");
    require(c.tests.minami_ratio_hi >= c.tests.minami_ratio_lo, "tests.minami_ratio_hi",
            "must be at least tests.minami_ratio_lo");

    c.partition.alpha = get_number(r, "partition", "alpha");
    c.partition.beta = get_number(r, "partition", "beta");
    c.partition.trace = get<bool>(r, "partition", "trace");
    if (name == "partition") {
        require(c.partition.beta > 0.0 && c.partition.beta <= 1.0, "partition.beta", "must lie in (0, 1]");
        require(c.partition.alpha >= 0.0, "partition.alpha", "must be non-negative");
        require(c.partition.alpha + c.window.eta > 1.0 - c.partition.beta, "partition.alpha",
                "must satisfy alpha + eta > 1 - beta");
    }

    c.localization.s = get_number(r, "localization", "s");
    c.localization.s_values = get<std::vector<double>>(r, "localization", "s_values");
    c.localization.im_z = get_number(r, "localization", "im_z");
    c.localization.r_min = get<std::int64_t>(r, "localization", "r_min");
    c.localization.r_max = get<std::int64_t>(r, "localization", "r_max");
    c.localization.margin = get<std::int64_t>(r, "localization", "margin");
    if (name == "localization") {
        require(c.localization.s > 0.0 && c.localization.s < 1.0, "localization.s", "must lie in (0, 1)");
        for (double s : c.localization.s_values) {
            require(s > 0.0 && s < 1.0, "localization.s_values", "entries must lie in (0, 1)");
        }
        require(c.localization.im_z > 0.0, "localization.im_z", "must be positive");
        require(c.localization.r_min >= 1 && c.localization.r_max >= c.localization.r_min + 2,
                "localization.r_max", "must exceed r_min by at least 2 (r_min >= 1)");
        require(c.localization.margin >= 0, "localization.margin", "must be non-negative");
    }

    c.minami.halvings = get<int>(r, "minami", "halvings");
    require(c.minami.halvings >= 1, "minami.halvings", "must be at least 1");

    c.green.half_width = get<std::int64_t>(r, "green", "half_width");
    c.green.margin = get<std::int64_t>(r, "green", "margin");
    c.green.d_max = get<std::int64_t>(r, "green", "d_max");
    c.green.im_z = get_number(r, "green", "im_z");
    if (name == "green-decay") {
        require(c.green.margin >= 0, "green.margin", "must be non-negative");
        require(c.green.d_max >= 3 && c.green.d_max <= c.green.half_width, "green.d_max",
                "must lie in [3, green.half_width]");
        require(c.green.im_z > 0.0, "green.im_z", "must be positive");
    }

    c.synthetic.dos = get_number(r, "synthetic", "dos");
    require(c.synthetic.dos > 0.0, "synthetic.dos", "must be positive");

    c.enabled = get<std::vector<std::string>>(r, "experiment", "enabled");
    for (const auto& e : c.enabled) {
        require(std::find(experiment_names().begin(), experiment_names().end(), e) != experiment_names().end(),
                "experiment.enabled", "contains unknown experiment '" + e + "'");
    }
    return c;
}

std::uint64_t ExperimentConfig::hash(bool synthetic_null) const {
    json h = resolved;
    h["schedule"].erase("threads");
    h["experiment"].erase("enabled");
    h["name"] = name;
    h["synthetic_null"] = synthetic_null;
    return fnv1a64(h.dump());
}

json read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    if (path.extension() == ".json") {
        try {
            return json::parse(text);
        } catch (const json::exception& e) {
            throw ConfigError("config '" + path.string() + "': " + e.what());
        }
    }
    try {
        return toml_to_json(toml::parse(text, path.string()));
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config '" << path.string() << "' line " << e.source().begin.line << ": " << e.description();
        throw ConfigError(msg.str());
    }
}

}  // namespace meso
