// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/pipeline/dragon.hpp"

#include <map>
#include <string>
#include <vector>

namespace dragon {

/// Flat key/value configuration shared by every subcommand. Only known keys
/// are accepted; values are kept as text and parsed by the typed getters.
/// Resolution order: defaults, then a config file, then command-line flags.
class RunConfig {
public:
    RunConfig(); // every key at its default

    /// Throws InvalidInput on an unknown key or a value that does not parse
    /// as the key's type.
    void set(const std::string& key, const std::string& value);
    [[nodiscard]] const std::string& get(const std::string& key) const;
    [[nodiscard]] bool has_key(const std::string& key) const;

    [[nodiscard]] long long get_int(const std::string& key) const;
    [[nodiscard]] double get_double(const std::string& key) const;
    [[nodiscard]] bool get_bool(const std::string& key) const;
    [[nodiscard]] Vec3 get_vec3(const std::string& key) const;

    /// `key = value` lines; '#' starts a comment; blank lines are skipped.
    void merge_text(const std::string& text);
    /// Every key in sorted order, parseable by merge_text.
    [[nodiscard]] std::string format() const;

    [[nodiscard]] static std::vector<std::string> keys();

    [[nodiscard]] DatasetConfig dataset_config() const;
    [[nodiscard]] TrainConfig train_config() const;
    [[nodiscard]] LossWeights loss_weights() const;
    [[nodiscard]] RegistrationConfig registration_config() const;
    [[nodiscard]] SceneInitConfig init_config() const;
    [[nodiscard]] PipelineConfig pipeline_config() const;

private:
    std::map<std::string, std::string> values_;
};

/// The per-module seed derived from the root seed; distinct modules get
/// statistically independent streams.
std::uint64_t module_seed(std::uint64_t root, const std::string& module);

} // namespace dragon
