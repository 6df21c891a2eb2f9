#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcnstab/bounds.hpp"
#include "gcnstab/gcn.hpp"

namespace gcnstab {

// Carries every violation found in one pass so a bad config is reported
// whole, not one field at a time.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> violations)
        : std::runtime_error(join(violations)),
          violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string msg = "invalid config:";
        for (const std::string& s : v) {
            msg += "\n  - ";
            msg += s;
        }
        return msg;
    }

    std::vector<std::string> violations_;
};

enum class ExperimentId { fig1, fig2, fig3, edge_criticality };

inline const char* experiment_name(ExperimentId id) {
    switch (id) {
        case ExperimentId::fig1: return "fig1";
        case ExperimentId::fig2: return "fig2";
        case ExperimentId::fig3: return "fig3";
        case ExperimentId::edge_criticality: return "edge-criticality";
    }
    return "fig1";
}

inline ExperimentId experiment_from_name(const std::string& s) {
    if (s == "fig1") return ExperimentId::fig1;
    if (s == "fig2") return ExperimentId::fig2;
    if (s == "fig3") return ExperimentId::fig3;
    if (s == "edge-criticality" || s == "edges")
        return ExperimentId::edge_criticality;
    throw std::invalid_argument("unknown experiment id '" + s +
                                "'; valid: fig1, fig2, fig3, edge-criticality");
}

struct GraphConfig {
    std::vector<int> communities{15, 15};
    double p_intra = 0.7;
    double p_inter = 0.08;

    bool operator==(const GraphConfig&) const = default;
};

struct ModelConfig {
    int degree = 3;
    std::string nonlinearity = "relu";
    // Used only by experiments that do not train (edge-criticality, one-off
    // bound runs).
    std::vector<double> coeffs{0.0, 1.0};

    bool operator==(const ModelConfig&) const = default;
};

struct TrainSettings {
    double learning_rate = 0.05;
    int epochs = 500;

    bool operator==(const TrainSettings&) const = default;
};

struct Fig1Config {
    int graphs = 10;
    int trials = 100;
    int max_edges = 10;

    bool operator==(const Fig1Config&) const = default;
};

struct Fig2Config {
    int graphs = 10;
    int trials = 100;
    std::vector<double> probabilities{0.01, 0.05, 0.1, 0.2, 0.3};
    bool include_insertions = false;

    bool operator==(const Fig2Config&) const = default;
};

struct Fig3Config {
    int train_graphs = 60;
    int test_graphs = 30;
    int trials = 20;
    int max_edges = 12;
    std::string feature_scheme = "fiedler";
    std::string readout = "mean-pool";

    bool operator==(const Fig3Config&) const = default;
};

struct EdgesConfig {
    int graphs = 5;
    std::string graph_file;

    bool operator==(const EdgesConfig&) const = default;
};

struct ExperimentConfig {
    ExperimentId id = ExperimentId::fig1;
    std::uint64_t seed = 12345;
    std::string out_dir = "out";
    BoundVariant bound_variant = BoundVariant::as_printed;
    double gap_tol = 1e-6;

    GraphConfig graph;
    ModelConfig model;
    TrainSettings train;
    Fig1Config fig1;
    Fig2Config fig2;
    Fig3Config fig3;
    EdgesConfig edges;

    bool operator==(const ExperimentConfig&) const = default;
};

// Per-experiment defaults; every load starts from these and overrides with
// the keys present in the file.
inline ExperimentConfig default_config(ExperimentId id) {
    ExperimentConfig cfg;
    cfg.id = id;
    if (id == ExperimentId::fig3) cfg.graph.communities = {10, 10, 10};
    if (id == ExperimentId::edge_criticality)
        cfg.graph.communities = {10, 10};
    return cfg;
}

// Paper-scale counts; desk scale is the default_config values.
inline void apply_scale(ExperimentConfig& cfg, const std::string& scale) {
    if (scale == "desk") return;
    if (scale != "paper")
        throw std::invalid_argument("unknown scale '" + scale +
                                    "'; valid: desk, paper");
    cfg.fig1.graphs = 50;
    cfg.fig1.trials = 1000;
    cfg.fig2.graphs = 50;
    cfg.fig2.trials = 1000;
    cfg.fig3.train_graphs = 200;
    cfg.fig3.test_graphs = 100;
    cfg.fig3.max_edges = 20;
}

namespace detail {

struct TomlValue {
    enum class Type { boolean, integer, floating, string, array };
    Type type = Type::string;
    std::string raw;
    std::string str;
    bool bvalue = false;
    std::vector<TomlValue> items;
};

inline std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (c == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline bool parse_scalar(const std::string& text, TomlValue& out,
                         std::string& err) {
    if (text.empty()) {
        err = "empty value";
        return false;
    }
    if (text.front() == '"') {
        if (text.size() < 2 || text.back() != '"') {
            err = "unterminated string";
            return false;
        }
        std::string decoded;
        for (std::size_t i = 1; i + 1 < text.size(); ++i) {
            char c = text[i];
            if (c == '\\' && i + 2 < text.size()) {
                const char n = text[i + 1];
                if (n == '"' || n == '\\') {
                    decoded.push_back(n);
                    ++i;
                    continue;
                }
            }
            decoded.push_back(c);
        }
        out.type = TomlValue::Type::string;
        out.raw = text;
        out.str = decoded;
        return true;
    }
    if (text == "true" || text == "false") {
        out.type = TomlValue::Type::boolean;
        out.raw = text;
        out.bvalue = text == "true";
        return true;
    }
    {
        std::int64_t iv = 0;
        const auto [p, ec] =
            std::from_chars(text.data(), text.data() + text.size(), iv);
        if (ec == std::errc() && p == text.data() + text.size()) {
            out.type = TomlValue::Type::integer;
            out.raw = text;
            return true;
        }
    }
    {
        double dv = 0.0;
        const auto [p, ec] =
            std::from_chars(text.data(), text.data() + text.size(), dv);
        if (ec == std::errc() && p == text.data() + text.size()) {
            out.type = TomlValue::Type::floating;
            out.raw = text;
            return true;
        }
    }
    err = "cannot parse value '" + text + "'";
    return false;
}

inline bool parse_value(const std::string& text, TomlValue& out,
                        std::string& err) {
    if (!text.empty() && text.front() == '[') {
        if (text.back() != ']') {
            err = "unterminated array";
            return false;
        }
        out.type = TomlValue::Type::array;
        out.raw = text;
        const std::string inner = trim(text.substr(1, text.size() - 2));
        if (inner.empty()) return true;
        std::string item;
        bool in_string = false;
        for (std::size_t i = 0; i <= inner.size(); ++i) {
            const bool end = i == inner.size();
            const char c = end ? ',' : inner[i];
            if (c == '"' && (i == 0 || inner[i - 1] != '\\'))
                in_string = !in_string;
            if (c == ',' && !in_string) {
                TomlValue element;
                const std::string token = trim(item);
                if (token.empty() || token.front() == '[') {
                    err = token.empty() ? "empty array element"
                                        : "nested arrays unsupported";
                    return false;
                }
                if (!parse_scalar(token, element, err)) return false;
                out.items.push_back(std::move(element));
                item.clear();
            } else {
                item.push_back(c);
            }
        }
        return true;
    }
    return parse_scalar(text, out, err);
}

inline bool valid_bare_key(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' &&
            c != '-')
            return false;
    return true;
}

// Flat TOML subset: [section] headers, key = value lines, scalars
// (string/bool/integer/float) and one-level arrays, # comments.
inline std::map<std::string, TomlValue> parse_toml(
    const std::string& text, std::vector<std::string>& errors) {
    std::map<std::string, TomlValue> out;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string body = trim(strip_comment(line));
        if (body.empty()) continue;
        const std::string where = "line " + std::to_string(lineno) + ": ";
        if (body.front() == '[') {
            if (body.back() != ']') {
                errors.push_back(where + "malformed section header");
                continue;
            }
            const std::string name = trim(body.substr(1, body.size() - 2));
            if (!valid_bare_key(name)) {
                errors.push_back(where + "invalid section name '" + name + "'");
                continue;
            }
            section = name;
            continue;
        }
        const std::size_t eq = body.find('=');
        if (eq == std::string::npos) {
            errors.push_back(where + "expected key = value");
            continue;
        }
        const std::string key = trim(body.substr(0, eq));
        if (!valid_bare_key(key)) {
            errors.push_back(where + "invalid key '" + key + "'");
            continue;
        }
        const std::string full = section.empty() ? key : section + "." + key;
        if (out.count(full)) {
            errors.push_back(where + "duplicate key '" + full + "'");
            continue;
        }
        TomlValue value;
        std::string err;
        if (!parse_value(trim(body.substr(eq + 1)), value, err)) {
            errors.push_back(where + "key '" + full + "': " + err);
            continue;
        }
        out.emplace(full, std::move(value));
    }
    return out;
}

// Typed access over the parsed table; absent keys keep the caller's default,
// type mismatches are collected, and consumed keys are tracked so leftovers
// can be flagged as unknown.
class ConfigReader {
public:
    ConfigReader(std::map<std::string, TomlValue> kv,
                 std::vector<std::string>& errors)
        : kv_(std::move(kv)), errors_(errors) {}

    void get(const std::string& key, bool& out) {
        const TomlValue* v = fetch(key);
        if (!v) return;
        if (v->type != TomlValue::Type::boolean)
            return fail(key, "expected true or false");
        out = v->bvalue;
    }

    void get(const std::string& key, int& out) {
        const TomlValue* v = fetch(key);
        if (!v) return;
        long long parsed = 0;
        if (!read_int(*v, parsed)) return fail(key, "expected an integer");
        out = static_cast<int>(parsed);
    }

    void get(const std::string& key, std::uint64_t& out) {
        const TomlValue* v = fetch(key);
        if (!v) return;
        if (v->type != TomlValue::Type::integer)
            return fail(key, "expected an integer");
        std::uint64_t parsed = 0;
        const auto [p, ec] = std::from_chars(
            v->raw.data(), v->raw.data() + v->raw.size(), parsed);
        if (ec != std::errc() || p != v->raw.data() + v->raw.size())
            return fail(key, "expected a non-negative 64-bit integer");
        out = parsed;
    }

    void get(const std::string& key, double& out) {
        const TomlValue* v = fetch(key);
        if (!v) return;
        double parsed = 0.0;
        if (!read_double(*v, parsed)) return fail(key, "expected a number");
        out = parsed;
    }

    void get(const std::string& key, std::string& out) {
        const TomlValue* v = fetch(key);
        if (!v) return;
        if (v->type != TomlValue::Type::string)
            return fail(key, "expected a string");
        out = v->str;
    }

    void get(const std::string& key, std::vector<int>& out) {
        const TomlValue* v = fetch(key);
        if (!v) return;
        if (v->type != TomlValue::Type::array)
            return fail(key, "expected an array of integers");
        std::vector<int> parsed;
        for (const TomlValue& item : v->items) {
            long long value = 0;
            if (!read_int(item, value))
                return fail(key, "expected an array of integers");
            parsed.push_back(static_cast<int>(value));
        }
        out = std::move(parsed);
    }

    void get(const std::string& key, std::vector<double>& out) {
        const TomlValue* v = fetch(key);
        if (!v) return;
        if (v->type != TomlValue::Type::array)
            return fail(key, "expected an array of numbers");
        std::vector<double> parsed;
        for (const TomlValue& item : v->items) {
            double value = 0.0;
            if (!read_double(item, value))
                return fail(key, "expected an array of numbers");
            parsed.push_back(value);
        }
        out = std::move(parsed);
    }

    std::vector<std::string> unconsumed() const {
        std::vector<std::string> out;
        for (const auto& [key, value] : kv_)
            if (!consumed_.count(key)) out.push_back(key);
        return out;
    }

private:
    const TomlValue* fetch(const std::string& key) {
        consumed_.insert(key);
        const auto it = kv_.find(key);
        return it == kv_.end() ? nullptr : &it->second;
    }

    void fail(const std::string& key, const std::string& what) {
        errors_.push_back("key '" + key + "': " + what);
    }

    static bool read_int(const TomlValue& v, long long& out) {
        if (v.type != TomlValue::Type::integer) return false;
        const auto [p, ec] =
            std::from_chars(v.raw.data(), v.raw.data() + v.raw.size(), out);
        return ec == std::errc() && p == v.raw.data() + v.raw.size();
    }

    static bool read_double(const TomlValue& v, double& out) {
        if (v.type != TomlValue::Type::integer &&
            v.type != TomlValue::Type::floating)
            return false;
        const auto [p, ec] =
            std::from_chars(v.raw.data(), v.raw.data() + v.raw.size(), out);
        return ec == std::errc() && p == v.raw.data() + v.raw.size();
    }

    std::map<std::string, TomlValue> kv_;
    std::set<std::string> consumed_;
    std::vector<std::string>& errors_;
};

inline std::string format_double(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

inline std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace detail

inline std::vector<std::string> validate_config(const ExperimentConfig& cfg) {
    std::vector<std::string> v;
    const auto check = [&](bool ok, const std::string& msg) {
        if (!ok) v.push_back(msg);
    };

    check(!cfg.out_dir.empty(), "out_dir: must not be empty");
    check(cfg.gap_tol > 0.0, "gap_tol: must be > 0");

    check(!cfg.graph.communities.empty(),
          "graph.communities: need at least one community");
    for (int size : cfg.graph.communities) {
        if (size < 1) {
            v.push_back("graph.communities: sizes must be >= 1");
            break;
        }
    }
    check(cfg.graph.p_intra >= 0.0 && cfg.graph.p_intra <= 1.0,
          "graph.p_intra: must be in [0, 1]");
    check(cfg.graph.p_inter >= 0.0 && cfg.graph.p_inter <= 1.0,
          "graph.p_inter: must be in [0, 1]");

    check(cfg.model.degree >= 0 && cfg.model.degree <= kMaxFilterDegree,
          "model.degree: must be in [0, 16]");
    bool nonlin_ok = true;
    try {
        Nonlinearity::from_name(cfg.model.nonlinearity);
    } catch (const std::invalid_argument&) {
        nonlin_ok = false;
    }
    check(nonlin_ok, "model.nonlinearity: unknown name '" +
                         cfg.model.nonlinearity +
                         "'; valid: relu, tanh, sigmoid, identity");
    check(!cfg.model.coeffs.empty() &&
              static_cast<int>(cfg.model.coeffs.size()) - 1 <= kMaxFilterDegree,
          "model.coeffs: need 1 to 17 coefficients");
    for (double c : cfg.model.coeffs) {
        if (!std::isfinite(c)) {
            v.push_back("model.coeffs: coefficients must be finite");
            break;
        }
    }

    check(cfg.train.learning_rate > 0.0, "train.learning_rate: must be > 0");
    check(cfg.train.epochs >= 1, "train.epochs: must be >= 1");

    check(cfg.fig1.graphs >= 1, "fig1.graphs: must be >= 1");
    check(cfg.fig1.trials >= 1, "fig1.trials: must be >= 1");
    check(cfg.fig1.max_edges >= 0, "fig1.max_edges: must be >= 0");

    check(cfg.fig2.graphs >= 1, "fig2.graphs: must be >= 1");
    check(cfg.fig2.trials >= 1, "fig2.trials: must be >= 1");
    check(!cfg.fig2.probabilities.empty(),
          "fig2.probabilities: must not be empty");
    for (double p : cfg.fig2.probabilities) {
        if (!(p > 0.0 && p < 1.0)) {
            v.push_back("fig2.probabilities: values must be in (0, 1)");
            break;
        }
    }

    check(cfg.fig3.train_graphs >= 1, "fig3.train_graphs: must be >= 1");
    check(cfg.fig3.test_graphs >= 1, "fig3.test_graphs: must be >= 1");
    check(cfg.fig3.trials >= 1, "fig3.trials: must be >= 1");
    check(cfg.fig3.max_edges >= 0, "fig3.max_edges: must be >= 0");
    check(cfg.fig3.feature_scheme == "constant" ||
              cfg.fig3.feature_scheme == "fixed-gaussian" ||
              cfg.fig3.feature_scheme == "degree" ||
              cfg.fig3.feature_scheme == "fiedler",
          "fig3.feature_scheme: unknown scheme '" + cfg.fig3.feature_scheme +
              "'; valid: constant, fixed-gaussian, degree, fiedler");
    check(cfg.fig3.readout == "mean-pool" || cfg.fig3.readout == "sum-pool",
          "fig3.readout: unknown readout '" + cfg.fig3.readout +
              "'; valid: mean-pool, sum-pool");

    check(cfg.edges.graphs >= 1 || !cfg.edges.graph_file.empty(),
          "edges.graphs: must be >= 1 when no graph_file is given");

    return v;
}

// Parses config text, fills defaults for the declared experiment, and throws
// ConfigError carrying every syntax, type, unknown-key, and range violation
// at once.
inline ExperimentConfig parse_config_text(const std::string& text) {
    std::vector<std::string> errors;
    auto kv = detail::parse_toml(text, errors);
    if (!errors.empty()) throw ConfigError(std::move(errors));

    const auto id_it = kv.find("experiment");
    if (id_it == kv.end())
        throw ConfigError({"missing required key: experiment"});
    if (id_it->second.type != detail::TomlValue::Type::string)
        throw ConfigError({"key 'experiment': expected a string"});
    ExperimentId id;
    try {
        id = experiment_from_name(id_it->second.str);
    } catch (const std::invalid_argument& e) {
        throw ConfigError({e.what()});
    }

    ExperimentConfig cfg = default_config(id);
    detail::ConfigReader reader(std::move(kv), errors);
    std::string id_name;
    reader.get("experiment", id_name);
    reader.get("seed", cfg.seed);
    reader.get("out_dir", cfg.out_dir);
    std::string variant = bound_variant_name(cfg.bound_variant);
    reader.get("bound_variant", variant);
    try {
        cfg.bound_variant = bound_variant_from_name(variant);
    } catch (const std::invalid_argument& e) {
        errors.push_back(e.what());
    }
    reader.get("gap_tol", cfg.gap_tol);

    reader.get("graph.communities", cfg.graph.communities);
    reader.get("graph.p_intra", cfg.graph.p_intra);
    reader.get("graph.p_inter", cfg.graph.p_inter);

    reader.get("model.degree", cfg.model.degree);
    reader.get("model.nonlinearity", cfg.model.nonlinearity);
    reader.get("model.coeffs", cfg.model.coeffs);

    reader.get("train.learning_rate", cfg.train.learning_rate);
    reader.get("train.epochs", cfg.train.epochs);

    reader.get("fig1.graphs", cfg.fig1.graphs);
    reader.get("fig1.trials", cfg.fig1.trials);
    reader.get("fig1.max_edges", cfg.fig1.max_edges);

    reader.get("fig2.graphs", cfg.fig2.graphs);
    reader.get("fig2.trials", cfg.fig2.trials);
    reader.get("fig2.probabilities", cfg.fig2.probabilities);
    reader.get("fig2.include_insertions", cfg.fig2.include_insertions);

    reader.get("fig3.train_graphs", cfg.fig3.train_graphs);
    reader.get("fig3.test_graphs", cfg.fig3.test_graphs);
    reader.get("fig3.trials", cfg.fig3.trials);
    reader.get("fig3.max_edges", cfg.fig3.max_edges);
    reader.get("fig3.feature_scheme", cfg.fig3.feature_scheme);
    reader.get("fig3.readout", cfg.fig3.readout);

    reader.get("edges.graphs", cfg.edges.graphs);
    reader.get("edges.graph_file", cfg.edges.graph_file);

    for (const std::string& key : reader.unconsumed())
        errors.push_back("unknown key: " + key);
    for (std::string& violation : validate_config(cfg))
        errors.push_back(std::move(violation));
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot open config file: " + path});
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

// Emits every section so that load(write(cfg)) == cfg.
inline std::string write_config(const ExperimentConfig& cfg) {
    using detail::format_double;
    using detail::quote;
    std::ostringstream out;
    out << "experiment = " << quote(experiment_name(cfg.id)) << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "out_dir = " << quote(cfg.out_dir) << "\n";
    out << "bound_variant = " << quote(bound_variant_name(cfg.bound_variant))
        << "\n";
    out << "gap_tol = " << format_double(cfg.gap_tol) << "\n";

    out << "\n[graph]\ncommunities = [";
    for (std::size_t i = 0; i < cfg.graph.communities.size(); ++i)
        out << (i ? ", " : "") << cfg.graph.communities[i];
    out << "]\n";
    out << "p_intra = " << format_double(cfg.graph.p_intra) << "\n";
    out << "p_inter = " << format_double(cfg.graph.p_inter) << "\n";

    out << "\n[model]\ndegree = " << cfg.model.degree << "\n";
    out << "nonlinearity = " << quote(cfg.model.nonlinearity) << "\n";
    out << "coeffs = [";
    for (std::size_t i = 0; i < cfg.model.coeffs.size(); ++i)
        out << (i ? ", " : "") << format_double(cfg.model.coeffs[i]);
    out << "]\n";

    out << "\n[train]\nlearning_rate = " << format_double(cfg.train.learning_rate)
        << "\n";
    out << "epochs = " << cfg.train.epochs << "\n";

    out << "\n[fig1]\ngraphs = " << cfg.fig1.graphs << "\n";
    out << "trials = " << cfg.fig1.trials << "\n";
    out << "max_edges = " << cfg.fig1.max_edges << "\n";

    out << "\n[fig2]\ngraphs = " << cfg.fig2.graphs << "\n";
    out << "trials = " << cfg.fig2.trials << "\n";
    out << "probabilities = [";
    for (std::size_t i = 0; i < cfg.fig2.probabilities.size(); ++i)
        out << (i ? ", " : "") << format_double(cfg.fig2.probabilities[i]);
    out << "]\n";
    out << "include_insertions = "
        << (cfg.fig2.include_insertions ? "true" : "false") << "\n";

    out << "\n[fig3]\ntrain_graphs = " << cfg.fig3.train_graphs << "\n";
    out << "test_graphs = " << cfg.fig3.test_graphs << "\n";
    out << "trials = " << cfg.fig3.trials << "\n";
    out << "max_edges = " << cfg.fig3.max_edges << "\n";
    out << "feature_scheme = " << quote(cfg.fig3.feature_scheme) << "\n";
    out << "readout = " << quote(cfg.fig3.readout) << "\n";

    out << "\n[edges]\ngraphs = " << cfg.edges.graphs << "\n";
    out << "graph_file = " << quote(cfg.edges.graph_file) << "\n";
    return out.str();
}

inline void save_config_file(const std::string& path,
                             const ExperimentConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config file: " + path);
    out << write_config(cfg);
}

}  // namespace gcnstab
