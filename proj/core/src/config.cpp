#include "fewkg/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fewkg/util.hpp"

namespace fewkg {

std::filesystem::path RunConfig::resolved_out_dir() const {
    std::filesystem::path p(out_dir);
    if (p.is_relative()) {
        if (const char* root = std::getenv("FEWKG_OUT")) return std::filesystem::path(root) / p;
    }
    return p;
}

namespace {

using nlohmann::json;

// The whole flat key namespace. Parsing walks this table, so the canonical
// serialization, validation, and the unknown-key check cannot drift apart.
enum class Kind { Str, Bool, Int, Double, Seed };

struct KeySpec {
    const char* key;
    Kind kind;
};

constexpr KeySpec kKeys[] = {
    {"background", Kind::Str},
    {"train_tasks", Kind::Str},
    {"valid_tasks", Kind::Str},
    {"test_tasks", Kind::Str},
    {"pretrained", Kind::Str},
    {"freeze_pretrained", Kind::Bool},
    {"variant", Kind::Str},
    {"d", Kind::Int},
    {"d_h", Kind::Int},
    {"eta", Kind::Double},
    {"gamma", Kind::Double},
    {"neg_ratio", Kind::Int},
    {"norm", Kind::Str},
    {"second_order", Kind::Bool},
    {"rgcn_neighbors", Kind::Int},
    {"rgcn_bases", Kind::Int},
    {"rgcn_hidden", Kind::Int},
    {"lr", Kind::Double},
    {"beta1", Kind::Double},
    {"beta2", Kind::Double},
    {"epsilon", Kind::Double},
    {"batch_tasks", Kind::Int},
    {"k_shot", Kind::Int},
    {"queries_per_task", Kind::Int},
    {"max_steps", Kind::Int},
    {"eval_every", Kind::Int},
    {"early_stop_patience", Kind::Int},
    {"split_train", Kind::Int},
    {"split_valid", Kind::Int},
    {"split_test", Kind::Int},
    {"eval_support_draws", Kind::Int},
    {"candidate_cap", Kind::Int},
    {"null_per_pattern", Kind::Int},
    {"null_n", Kind::Int},
    {"out_dir", Kind::Str},
    {"seed", Kind::Seed},
};

const KeySpec* find_key(const std::string& key) {
    for (const KeySpec& ks : kKeys)
        if (key == ks.key) return &ks;
    return nullptr;
}

struct Violations {
    std::vector<std::string> errors;

    void add(const std::string& e) { errors.push_back(e); }
    void raise_if_any() const {
        if (errors.empty()) return;
        json j;
        j["errors"] = errors;
        throw std::runtime_error("config error: " + j.dump());
    }
};

// Checks type against the key table; reports instead of throwing so every
// problem surfaces in one pass.
bool type_ok(const json& v, Kind kind) {
    switch (kind) {
        case Kind::Str: return v.is_string();
        case Kind::Bool: return v.is_boolean();
        case Kind::Int: return v.is_number_integer();
        case Kind::Double: return v.is_number();
        case Kind::Seed: return v.is_number_unsigned() || (v.is_number_integer() && v.get<int64_t>() >= 0);
    }
    return false;
}

const char* kind_name(Kind kind) {
    switch (kind) {
        case Kind::Str: return "a string";
        case Kind::Bool: return "a boolean";
        case Kind::Int: return "an integer";
        case Kind::Double: return "a number";
        case Kind::Seed: return "a non-negative integer";
    }
    return "?";
}

void assign(RunConfig& c, const std::string& key, const json& v) {
    if (key == "background") c.background = v.get<std::string>();
    else if (key == "train_tasks") c.train_tasks = v.get<std::string>();
    else if (key == "valid_tasks") c.valid_tasks = v.get<std::string>();
    else if (key == "test_tasks") c.test_tasks = v.get<std::string>();
    else if (key == "pretrained") c.pretrained = v.get<std::string>();
    else if (key == "freeze_pretrained") c.freeze_pretrained = v.get<bool>();
    else if (key == "variant") c.variant = v.get<std::string>();
    else if (key == "d") c.hp.d = v.get<int>();
    else if (key == "d_h") c.hp.d_h = v.get<int>();
    else if (key == "eta") c.hp.eta = v.get<double>();
    else if (key == "gamma") c.hp.gamma = v.get<double>();
    else if (key == "neg_ratio") c.hp.neg_ratio = v.get<int>();
    else if (key == "norm") c.hp.norm = v.get<std::string>() == "L1" ? Norm::L1 : Norm::L2;
    else if (key == "second_order") c.hp.second_order = v.get<bool>();
    else if (key == "rgcn_neighbors") c.hp.rgcn_neighbors = v.get<int>();
    else if (key == "rgcn_bases") c.hp.rgcn_bases = v.get<int>();
    else if (key == "rgcn_hidden") c.hp.rgcn_hidden = v.get<int>();
    else if (key == "lr") c.train.lr = v.get<double>();
    else if (key == "beta1") c.train.beta1 = v.get<double>();
    else if (key == "beta2") c.train.beta2 = v.get<double>();
    else if (key == "epsilon") c.train.epsilon = v.get<double>();
    else if (key == "batch_tasks") c.train.batch_tasks = v.get<int>();
    else if (key == "k_shot") c.train.k_shot = v.get<int>();
    else if (key == "queries_per_task") c.train.queries_per_task = v.get<int>();
    else if (key == "max_steps") c.train.max_steps = v.get<int64_t>();
    else if (key == "eval_every") c.train.eval_every = v.get<int64_t>();
    else if (key == "early_stop_patience") c.train.early_stop_patience = v.get<int>();
    else if (key == "split_train") c.split_train = v.get<int>();
    else if (key == "split_valid") c.split_valid = v.get<int>();
    else if (key == "split_test") c.split_test = v.get<int>();
    else if (key == "eval_support_draws") c.eval_support_draws = v.get<int>();
    else if (key == "candidate_cap") c.candidate_cap = v.get<int>();
    else if (key == "null_per_pattern") c.null_per_pattern = v.get<int>();
    else if (key == "null_n") c.null_n = v.get<int>();
    else if (key == "out_dir") c.out_dir = v.get<std::string>();
    else if (key == "seed") c.seed = v.get<uint64_t>();
    else throw std::logic_error("assign: key table out of sync: " + key);
}

void check_ranges(const RunConfig& c, Violations& bad) {
    auto at_least = [&](const char* key, int64_t value, int64_t lo) {
        if (value < lo)
            bad.add(std::string(key) + " must be >= " + std::to_string(lo) + ", got " +
                    std::to_string(value));
    };
    auto positive = [&](const char* key, double value) {
        if (!(value > 0.0))
            bad.add(std::string(key) + " must be > 0, got " + fmt_double(value));
    };
    auto non_negative = [&](const char* key, double value) {
        if (!(value >= 0.0))
            bad.add(std::string(key) + " must be >= 0, got " + fmt_double(value));
    };
    auto unit_interval = [&](const char* key, double value) {
        if (value < 0.0 || value >= 1.0)
            bad.add(std::string(key) + " must be in [0, 1), got " + fmt_double(value));
    };

    bool variant_known = true;
    try {
        variant_from_name(c.variant);
    } catch (const std::exception&) {
        variant_known = false;
        bad.add("variant must be one of metar, shared-embed, zero-shot, rgcn; got \"" +
                c.variant + "\"");
    }

    at_least("d", c.hp.d, 1);
    at_least("d_h", c.hp.d_h, 0);
    non_negative("eta", c.hp.eta);
    non_negative("gamma", c.hp.gamma);
    at_least("neg_ratio", c.hp.neg_ratio, 1);
    at_least("rgcn_neighbors", c.hp.rgcn_neighbors, 1);
    at_least("rgcn_bases", c.hp.rgcn_bases, 1);
    at_least("rgcn_hidden", c.hp.rgcn_hidden, 1);
    positive("lr", c.train.lr);
    unit_interval("beta1", c.train.beta1);
    unit_interval("beta2", c.train.beta2);
    positive("epsilon", c.train.epsilon);
    at_least("batch_tasks", c.train.batch_tasks, 1);
    at_least("k_shot", c.train.k_shot, 1);
    at_least("queries_per_task", c.train.queries_per_task, 1);
    at_least("max_steps", c.train.max_steps, 0);
    at_least("eval_every", c.train.eval_every, 0);
    at_least("early_stop_patience", c.train.early_stop_patience, 0);
    at_least("split_train", c.split_train, 0);
    at_least("split_valid", c.split_valid, 0);
    at_least("split_test", c.split_test, 0);
    at_least("eval_support_draws", c.eval_support_draws, 1);
    at_least("candidate_cap", c.candidate_cap, 0);
    at_least("null_per_pattern", c.null_per_pattern, 1);
    at_least("null_n", c.null_n, 0);
    (void)variant_known;

    auto path_exists = [&](const char* key, const std::string& p) {
        if (!p.empty() && !std::filesystem::exists(p))
            bad.add(std::string(key) + " path does not exist: " + p);
    };
    path_exists("background", c.background);
    path_exists("train_tasks", c.train_tasks);
    path_exists("valid_tasks", c.valid_tasks);
    path_exists("test_tasks", c.test_tasks);
    path_exists("pretrained", c.pretrained);
}

// "key=value"; the value is JSON when it parses, a bare string otherwise, so
// both seed=7 and out_dir=runs/a work unquoted.
std::pair<std::string, json> parse_override(const std::string& kv, Violations& bad) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
        bad.add("override \"" + kv + "\" is not key=value");
        return {"", json()};
    }
    const std::string key = kv.substr(0, eq);
    const std::string raw = kv.substr(eq + 1);
    json v = json::parse(raw, nullptr, false);
    if (v.is_discarded()) v = raw;
    return {key, std::move(v)};
}

}  // namespace

RunConfig config_from_json(const std::string& text,
                           const std::vector<std::string>& overrides) {
    Violations bad;
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) {
        bad.add("configuration is not valid JSON");
        bad.raise_if_any();
    }
    if (!doc.is_object()) {
        bad.add("configuration must be a JSON object");
        bad.raise_if_any();
    }

    for (const std::string& kv : overrides) {
        auto [key, value] = parse_override(kv, bad);
        if (!key.empty()) doc[key] = std::move(value);
    }

    RunConfig c;
    for (const auto& [key, value] : doc.items()) {
        const KeySpec* ks = find_key(key);
        if (!ks) {
            bad.add("unknown key \"" + key + "\"");
            continue;
        }
        // Overrides arrive as strings; coerce them through the declared type.
        json v = value;
        if (v.is_string() && ks->kind != Kind::Str) {
            json reparsed = json::parse(v.get<std::string>(), nullptr, false);
            if (!reparsed.is_discarded()) v = std::move(reparsed);
        }
        if (!type_ok(v, ks->kind)) {
            bad.add("key \"" + key + "\" must be " + kind_name(ks->kind));
            continue;
        }
        if (key == "norm") {
            const std::string n = v.get<std::string>();
            if (n != "L1" && n != "L2") {
                bad.add("norm must be \"L1\" or \"L2\", got \"" + n + "\"");
                continue;
            }
        }
        assign(c, key, v);
    }

    check_ranges(c, bad);
    bad.raise_if_any();
    c.train.seed = c.seed;
    return c;
}

RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides) {
    return config_from_json(read_file(path), overrides);
}

std::string config_canonical_json(const RunConfig& c) {
    json j;
    j["background"] = c.background;
    j["train_tasks"] = c.train_tasks;
    j["valid_tasks"] = c.valid_tasks;
    j["test_tasks"] = c.test_tasks;
    j["pretrained"] = c.pretrained;
    j["freeze_pretrained"] = c.freeze_pretrained;
    j["variant"] = c.variant;
    j["d"] = c.hp.d;
    j["d_h"] = c.hp.d_h;
    j["eta"] = c.hp.eta;
    j["gamma"] = c.hp.gamma;
    j["neg_ratio"] = c.hp.neg_ratio;
    j["norm"] = c.hp.norm == Norm::L1 ? "L1" : "L2";
    j["second_order"] = c.hp.second_order;
    j["rgcn_neighbors"] = c.hp.rgcn_neighbors;
    j["rgcn_bases"] = c.hp.rgcn_bases;
    j["rgcn_hidden"] = c.hp.rgcn_hidden;
    j["lr"] = c.train.lr;
    j["beta1"] = c.train.beta1;
    j["beta2"] = c.train.beta2;
    j["epsilon"] = c.train.epsilon;
    j["batch_tasks"] = c.train.batch_tasks;
    j["k_shot"] = c.train.k_shot;
    j["queries_per_task"] = c.train.queries_per_task;
    j["max_steps"] = c.train.max_steps;
    j["eval_every"] = c.train.eval_every;
    j["early_stop_patience"] = c.train.early_stop_patience;
    j["split_train"] = c.split_train;
    j["split_valid"] = c.split_valid;
    j["split_test"] = c.split_test;
    j["eval_support_draws"] = c.eval_support_draws;
    j["candidate_cap"] = c.candidate_cap;
    j["null_per_pattern"] = c.null_per_pattern;
    j["null_n"] = c.null_n;
    j["out_dir"] = c.out_dir;
    j["seed"] = c.seed;
    return j.dump();
}

uint64_t config_hash(const RunConfig& c) { return fnv1a64(config_canonical_json(c)); }

}  // namespace fewkg
