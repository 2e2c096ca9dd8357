#pragma once

// Everything a training run depends on, as one JSON document. Unknown keys
// are rejected so a typo cannot silently fall back to a default.

#include <cstddef>
#include <string>

#include "triplegan/data.hpp"
#include "triplegan/training.hpp"

namespace triplegan {

// Defaults for the CLI: a held-out split of 334 rows per class.
inline data::GeneratorParams default_dataset_params() {
  data::GeneratorParams p;
  p.n_test_per_class = 334;
  return p;
}

struct RunConfig {
  train::TrainConfig train;
  data::GeneratorParams dataset = default_dataset_params();
  std::size_t n_labeled = 12;
  std::string out_dir = "run";
  int checkpoint_every = 10;

  void validate() const;
};

std::string run_config_to_json(const RunConfig& cfg);
// Keys absent from `text` keep the values already in `base`.
RunConfig run_config_from_json(const std::string& text, RunConfig base = {});

// Hash of the effective config without out_dir, so the same run written to two
// places carries the same hash.
std::string config_hash(const RunConfig& cfg);

}  // namespace triplegan
