#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rftlab/attacks.hpp"
#include "rftlab/config.hpp"
#include "rftlab/metrics.hpp"
#include "rftlab/models.hpp"
#include "rftlab/optimizer.hpp"
#include "rftlab/schedule.hpp"
#include "rftlab/tasks.hpp"
#include "rftlab/trainloop.hpp"

namespace rftlab::harness {

/// Fully resolved experiment description. Everything that affects numerics is
/// covered by canonical_string() and therefore by the config hash.
struct ExperimentConfig {
  std::string name;  // output directory name; defaults to the hash
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

  tasks::SyntheticTaskSpec task;
  std::string task_name;  // "source" / "easy" / "medium" / "hard" / "custom"

  std::vector<std::size_t> hidden_dims{64, 32};

  int pretrain_epochs = 30;
  std::uint64_t pretrain_seed = 1;
  train::OptimizerConfig pretrain_optimizer;

  schedule::ScheduleSpec sched;
  std::string schedule_name;  // preset name or "custom"

  attacks::AttackConfig attack;  // training attack; epsilon is set per epoch
  int eval_steps = 10;
  int eval_every = 1;

  train::OptimizerConfig optimizer;

  double eval_grid_step = 0.01;
  double delay_threshold = -1.0;  // < 0: auto = 1/K + 0.075

  double resolved_delay_threshold() const;
  models::ModelSpec model_spec() const;

  std::string canonical_string() const;
  std::uint64_t hash() const;

  config::KeyValueFile to_key_value() const;
  static ExperimentConfig from_key_value(const config::KeyValueFile& kv);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::vector<train::EpochTrace> trace;
  metrics::RobustnessCurve curve;
  double clean = 0.0;
  double adv = 0.0;
  double expected_adv = 0.0;
  int delay = -1;  // -1: validation accuracy never crossed the threshold
  bool aborted = false;
  std::string abort_reason;
};

struct ExperimentRecord {
  ExperimentConfig config;
  std::string hash_hex;
  std::string dir;
  std::vector<SeedOutcome> seeds;

  double mean_clean = 0.0;
  double mean_adv = 0.0;
  double mean_expected_adv = 0.0;
};

/// Default output root: $RFTLAB_OUT if set, else "out".
std::string default_out_root();

/// Pretrains (or loads from the cache under `out_root`/backbones) the shared
/// non-robust backbone for this configuration.
models::ModelState backbone_for(const ExperimentConfig& cfg, const std::string& out_root);

/// Runs every seed, persists traces/curves/summary/record under
/// `out_root`/<name>, and returns the record. Idempotent: an existing record
/// with the same config hash is loaded instead of recomputed.
ExperimentRecord run(const ExperimentConfig& cfg, const std::string& out_root,
                     bool reuse_existing = true);

ExperimentRecord load_record(const std::string& record_dir);

/// Grid runner: {schedule variants} x {tasks} x {eps presets} from the
/// [matrix] section, all cells sharing one backbone. Failed cells are marked
/// and the rest of the matrix continues.
struct MatrixCell {
  std::string task;
  std::string schedule_name;
  std::string eps_name;
  double eps_goal = 0.0;
  bool failed = false;
  std::string error;
  ExperimentRecord record;
};

struct MatrixResult {
  std::vector<MatrixCell> cells;
  // scheduler-vs-fix winner counts over (task, eps) cells where both ran
  int cells_compared = 0;
  int scheduler_wins_clean = 0;
  int scheduler_wins_expected = 0;
  std::string summary_path;
};

MatrixResult run_matrix(const config::KeyValueFile& file, const std::string& out_root,
                        int workers);

/// Figure-data emission for a persisted record: accuracy-vs-eps and
/// accuracy-vs-epoch, as long-format CSV or SVG line charts. Byte
/// deterministic.
void emit_curves(const ExperimentRecord& record, const std::string& format);

struct DelayReportRow {
  std::string record_name;
  std::uint64_t seed = 0;
  double eps_goal = 0.0;
  int delay_epochs = 0;  // run length when adaptation never happened
  double final_clean_acc = 0.0;
  double severity = 0.0;  // reference clean minus final clean; 0 if no reference
};

struct DelayReport {
  std::vector<DelayReportRow> rows;
  double correlation = 0.0;  // Pearson between delay and final clean accuracy
};

/// Per-record delay/severity table over >= 3 records spanning multiple eps
/// values. Records are deduplicated by config hash; severity uses the eps = 0
/// record of the same task and seed as reference where available.
DelayReport delay_severity_report(const std::vector<ExperimentRecord>& records);

void write_delay_report(const DelayReport& report, const std::string& path);

/// Record directories matching a glob pattern ('*' wildcards, no recursion).
std::vector<std::string> expand_record_glob(const std::string& pattern);

}  // namespace rftlab::harness
