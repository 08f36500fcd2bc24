#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ngf/train.hpp"

namespace ngf {

struct ExperimentRow {
  std::string label;
  std::uint64_t seed = 0;
  double final_loss = 0.0;
  double heldout_psnr = 0.0;
  std::optional<double> occupancy;
  std::optional<double> utilization;
  std::optional<std::int64_t> steps_to_target;  // first logged step reaching the target PSNR
};

struct ExperimentReport {
  std::string name;
  double psnr_target = 0.0;
  std::vector<ExperimentRow> rows;

  std::string table() const;  // human-readable, per-label means at the bottom
  std::string csv() const;
};

/// Names accepted by run_experiment.
std::vector<std::string> experiment_names();

/// Runs one named comparison preset: a handful of short trainings over
/// `num_seeds` consecutive seeds starting at `base_seed`, sharing `base`
/// for everything the preset does not pin.
ExperimentReport run_experiment(const std::string& name, const TrainConfig& base,
                                std::uint64_t base_seed, int num_seeds);

/// Trains `cfg` from scratch and summarizes it as one report row.
ExperimentRow run_single(const std::string& label, const TrainConfig& cfg,
                         double psnr_target);

}  // namespace ngf
