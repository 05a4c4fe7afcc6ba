#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sjrp/bsde.hpp"
#include "sjrp/core.hpp"
#include "sjrp/mdp.hpp"
#include "sjrp/policy.hpp"
#include "sjrp/sim.hpp"

namespace sjrp::cli {

struct BenchmarkPlan {
  std::vector<std::string> families;  // rs, qs, can_order, independent_ss
  int r_max = 100;
  sim::SimConfig search;
};

struct ReferenceSpec {
  double lambda = 1.0;
  double nu = 0.2;
  double alpha = 0.0;
  Vec order_up_to;             // explicit E[Z], or
  std::string order_up_to_from;  // path of a tuned policy file providing S
};

struct ExtractionSpec {
  double epsilon = -2.5;
  policy::ExtractionMethod method = policy::ExtractionMethod::minimize_value;
  double bounds_lo_scale = 0.0;   // bounds and start scale E[Z] componentwise
  double bounds_hi_scale = 1.5;
  double start_scale = 1.0;
};

struct TrainingPlan {
  bsde::TrainConfig train;
  ReferenceSpec reference;
  ExtractionSpec extraction;
};

struct MdpPlan {
  std::vector<int> state_lo, state_hi, action_hi;
};

struct ExperimentConfig {
  DemandModel demand;           // absent (dim 0) when only a diffusion is given
  CostParams costs;
  std::optional<DiffusionParams> diffusion_override;  // direct diffusion demand
  DiffusionParams effective_diffusion() const;
  int dim() const { return costs.dim(); }
  std::optional<BenchmarkPlan> benchmarks;
  std::optional<TrainingPlan> training;
  std::optional<MdpPlan> mdp_plan;
  sim::SimConfig evaluation;
  std::optional<mdp::QviGrid> qvi_grid;  // validate1d
};

/// Strict parse: unknown keys are rejected; validation errors carry context.
ExperimentConfig load_config(const std::string& path);

/// FNV-1a of the raw config bytes, for the run manifest.
std::string config_hash(const std::string& path);

/// Writes manifest.json (command, config path+hash, seeds, version, isa,
/// threads, resolved tolerances).
void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::string& config_path, uint64_t seed);

// Policy files: human-readable JSON, one of kinds rs/qs/can_order/
// independent_ss/mdp/nn.
std::unique_ptr<sim::Policy> load_policy(const std::string& path);
void save_policy(const std::string& path, const sim::Policy& pol,
                 const std::string& extra_note = "");

// Subcommand bodies; each returns a process exit code.
int cmd_bench(const ExperimentConfig& cfg, const std::string& config_path,
              const std::string& out_dir);
int cmd_mdp(const ExperimentConfig& cfg, const std::string& config_path,
            const std::string& out_dir);
int cmd_train(const ExperimentConfig& cfg, const std::string& config_path,
              const std::string& out_dir, bool resume);
int cmd_extract(const ExperimentConfig& cfg, const std::string& config_path,
                const std::string& checkpoint, const std::string& out_path);
int cmd_eval(const ExperimentConfig& cfg, const std::string& config_path,
             const std::string& policy_path, const std::string& out_dir);
int cmd_compare(const ExperimentConfig& cfg, const std::string& config_path,
                const std::string& baseline, const std::vector<std::string>& policies,
                const std::string& out_dir);
int cmd_validate1d(const ExperimentConfig& cfg, const std::string& config_path,
                   const std::string& out_dir, bool resume);

// Exit codes shared by the dispatcher.
inline constexpr int kExitUsage = 64;
inline constexpr int kExitConfig = 65;
inline constexpr int kExitMissingFile = 66;
inline constexpr int kExitNumeric = 70;

}  // namespace sjrp::cli
