#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aggrisk/dataset.hpp"

namespace aggrisk {

/// Synthetic dataset shape. All counts must be >= 1; region/peril token
/// lists must be nonempty and free of CSV separator characters.
struct GeneratorConfig {
  std::uint64_t seed = 1;
  std::uint32_t num_trials = 1;
  std::uint32_t events_per_trial = 1;
  std::uint32_t num_layers = 1;
  std::uint32_t elts_per_layer = 1;
  std::uint32_t catalogue_size = 100;
  std::vector<std::string> regions = {"FL", "JP", "CA", "NY"};
  std::vector<std::string> perils = {"HU", "EQ", "FLD", "WS"};

  std::uint32_t num_elts() const { return num_layers * elts_per_layer; }

  /// Throws ConfigError on the first violated constraint.
  void validate() const;

  /// manifest.txt content: key=value lines recording this config.
  std::string manifest_text() const;
};

/// Builds the whole dataset in memory. Deterministic for a fixed seed: every
/// draw comes from fixed splitmix64 substreams (see README for the exact
/// stream layout). The result always passes validate_portfolio.
Dataset generate_dataset(const GeneratorConfig& cfg);

/// One candidate event of a STEP blend.
struct StepEvent {
  EventId event_id = 0;
  double weight = 0.0;  // > 0
};

struct StepSpec {
  std::vector<StepEvent> weighted_events;  // nonempty
  std::uint32_t num_trials = 1;
};

/// Customized YET for STEP analysis: one event per trial, time_index 1,
/// events drawn with probability proportional to weight.
std::vector<YetRecord> build_step_yet(const StepSpec& spec, std::uint64_t seed);

}  // namespace aggrisk
