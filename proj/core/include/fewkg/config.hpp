#pragma once
// Flat JSON run configuration shared by every subcommand: one file, one
// namespace of keys, overridable from the command line as key=value. Unknown
// keys are rejected and every violation is reported in a single error.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fewkg/model.hpp"
#include "fewkg/optim.hpp"

namespace fewkg {

struct RunConfig {
    // data paths; empty = unset, non-empty paths must exist at load time
    std::string background;
    std::string train_tasks;
    std::string valid_tasks;
    std::string test_tasks;
    std::string pretrained;
    bool freeze_pretrained = false;

    std::string variant = "metar";
    HyperParams hp;
    TrainConfig train;  // train.seed mirrors `seed`

    // relation split sizes for the split subcommand
    int split_train = 0;
    int split_valid = 0;
    int split_test = 0;

    int eval_support_draws = 1;
    int candidate_cap = 0;    // 0 = uncapped
    int null_per_pattern = 10;
    int null_n = 0;           // 0 = median test-relation triple count

    std::string out_dir = "out";
    uint64_t seed = 0;

    Variant variant_enum() const { return variant_from_name(variant); }
    // out_dir resolved against the FEWKG_OUT environment variable when the
    // configured path is relative and the variable is set.
    std::filesystem::path resolved_out_dir() const;
};

// Parse + apply key=value overrides + validate. Throws std::runtime_error
// whose message is one line: config error: {"errors":[...]} listing every
// violation (unknown keys, type mismatches, range violations, missing paths).
RunConfig config_from_json(const std::string& text,
                           const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides = {});

// Canonical flat serialization (sorted keys, shortest-round-trip numbers);
// hashing it gives the config hash embedded in every artifact.
std::string config_canonical_json(const RunConfig& c);
uint64_t config_hash(const RunConfig& c);

}  // namespace fewkg
