// Command-line front end: run single experiments, experiment matrices,
// figure-data emission, delay/severity reports and the gradient checker.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rftlab/harness.hpp"
#include "rftlab/kernels.hpp"
#include "rftlab/metrics.hpp"
#include "rftlab/rng.hpp"
#include "rftlab/tape.hpp"

namespace {

using namespace rftlab;

void apply_seed_override(harness::ExperimentConfig& cfg, long seed) {
  if (seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(seed)};
}

int cmd_run(const std::string& config_path, const std::string& out_root, long seed) {
  harness::ExperimentConfig cfg = harness::ExperimentConfig::load(config_path);
  apply_seed_override(cfg, seed);
  harness::ExperimentRecord record = harness::run(cfg, out_root);
  std::printf("record %s (hash %s)\n", record.dir.c_str(), record.hash_hex.c_str());
  std::printf("  %-8s %8s %8s %8s\n", "seed", "clean", "adv", "e.adv");
  for (const harness::SeedOutcome& s : record.seeds) {
    std::printf("  %-8llu %8.4f %8.4f %8.4f%s\n", static_cast<unsigned long long>(s.seed),
                s.clean, s.adv, s.expected_adv, s.aborted ? "  [aborted]" : "");
  }
  std::printf("  %-8s %8.4f %8.4f %8.4f\n", "mean", record.mean_clean, record.mean_adv,
              record.mean_expected_adv);
  return 0;
}

int cmd_matrix(const std::string& config_path, const std::string& out_root, int workers) {
  config::KeyValueFile file = config::KeyValueFile::parse_file(config_path);
  harness::MatrixResult result = harness::run_matrix(file, out_root, workers);
  std::printf("%-10s %-12s %-10s %8s %8s %8s\n", "task", "schedule", "eps", "clean", "adv",
              "e.adv");
  for (const harness::MatrixCell& cell : result.cells) {
    if (cell.failed) {
      std::printf("%-10s %-12s %-10s failed: %s\n", cell.task.c_str(),
                  cell.schedule_name.c_str(), cell.eps_name.c_str(), cell.error.c_str());
    } else {
      std::printf("%-10s %-12s %-10s %8.4f %8.4f %8.4f\n", cell.task.c_str(),
                  cell.schedule_name.c_str(), cell.eps_name.c_str(), cell.record.mean_clean,
                  cell.record.mean_adv, cell.record.mean_expected_adv);
    }
  }
  if (result.cells_compared > 0) {
    std::printf("scheduler beats fix on clean accuracy in %d of %d cells, "
                "on expected robustness in %d of %d cells\n",
                result.scheduler_wins_clean, result.cells_compared,
                result.scheduler_wins_expected, result.cells_compared);
  }
  std::printf("summary: %s\n", result.summary_path.c_str());
  return 0;
}

int cmd_emit(const std::string& record_dir, const std::string& format) {
  harness::ExperimentRecord record = harness::load_record(record_dir);
  harness::emit_curves(record, format);
  std::printf("emitted %s files into %s\n", format.c_str(), record.dir.c_str());
  return 0;
}

int cmd_report_delay(const std::string& glob, const std::string& out_path) {
  std::vector<harness::ExperimentRecord> records;
  for (const std::string& dir : harness::expand_record_glob(glob)) {
    records.push_back(harness::load_record(dir));
  }
  if (records.empty()) {
    std::fprintf(stderr, "no records match '%s'\n", glob.c_str());
    return 1;
  }
  harness::DelayReport report = harness::delay_severity_report(records);
  std::printf("%-28s %6s %8s %8s %8s %9s\n", "record", "seed", "eps", "delay", "final",
              "severity");
  for (const harness::DelayReportRow& row : report.rows) {
    std::printf("%-28s %6llu %8.4f %8d %8.4f %9.4f\n", row.record_name.c_str(),
                static_cast<unsigned long long>(row.seed), row.eps_goal, row.delay_epochs,
                row.final_clean_acc, row.severity);
  }
  std::printf("pearson(delay, final clean acc) = %.4f\n", report.correlation);
  harness::write_delay_report(report, out_path);
  std::printf("report: %s\n", out_path.c_str());
  return 0;
}

int cmd_gradcheck() {
  std::printf("kernel backend: %s\n", kernels::backend_name(kernels::active_backend()));
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(derive_seed(seed, kSeedInit));
    const std::size_t batch = 4, d = 6, h1 = 8, h2 = 5, k = 3;
    Tensor x({batch, d});
    // Keep relu inputs away from the kink.
    for (std::size_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(0.05, 0.95);
    Tensor w1({d, h1}), b1({h1}), w2({h1, h2}), b2({h2}), w3({h2, k}), b3({k});
    for (auto* t : {&w1, &w2, &w3}) {
      for (std::size_t i = 0; i < t->numel(); ++i) (*t)[i] = rng.uniform(-0.7, 0.7);
    }
    for (auto* t : {&b1, &b2, &b3}) {
      for (std::size_t i = 0; i < t->numel(); ++i) (*t)[i] = rng.uniform(0.1, 0.4);
    }
    std::vector<int> labels(batch);
    for (std::size_t i = 0; i < batch; ++i) labels[i] = static_cast<int>(rng.next_index(k));

    auto loss_fn = [&](Tape& tape, NodeId input) {
      NodeId h = tape.relu(tape.add_bias(tape.matmul(input, tape.input(w1)), tape.input(b1)));
      h = tape.relu(tape.add_bias(tape.matmul(h, tape.input(w2)), tape.input(b2)));
      NodeId logits = tape.add_bias(tape.matmul(h, tape.input(w3)), tape.input(b3));
      return tape.softmax_cross_entropy(logits, labels);
    };
    const double err = grad_check(loss_fn, x, 1e-5);
    std::printf("  seed %llu: max relative error %.3e\n",
                static_cast<unsigned long long>(seed), err);
    worst = err > worst ? err : worst;
  }
  std::printf("worst over 10 seeds: %.3e (gate 1e-4)\n", worst);
  return worst < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rftlab: robust fine-tuning laboratory"};
  app.require_subcommand(1);

  std::string out_root = rftlab::harness::default_out_root();
  long seed_override = -1;
  int workers = 1;

  std::string run_config;
  CLI::App* run = app.add_subcommand("run", "run one experiment config");
  run->add_option("config", run_config, "experiment config file")->required();
  run->add_option("--out", out_root, "output root directory");
  run->add_option("--seed", seed_override, "run a single seed instead of the config list");

  std::string matrix_config;
  CLI::App* matrix = app.add_subcommand("matrix", "run a schedule x task x eps grid");
  matrix->add_option("config", matrix_config, "matrix config file")->required();
  matrix->add_option("--out", out_root, "output root directory");
  matrix->add_option("--workers", workers, "parallel cells");

  std::string emit_record, emit_format = "csv";
  CLI::App* emit = app.add_subcommand("emit", "emit figure data for a record");
  emit->add_option("record", emit_record, "record directory")->required();
  emit->add_option("--format", emit_format, "csv or svg");

  std::string report_glob, report_out = "delay_report.csv";
  CLI::App* report = app.add_subcommand("report-delay", "delay/severity report over records");
  report->add_option("glob", report_glob, "record directory glob, e.g. 'out/sweep_*'")
      ->required();
  report->add_option("--out", report_out, "report csv path");

  app.add_subcommand("gradcheck", "finite-difference check of every gradient path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_config, out_root, seed_override);
    if (matrix->parsed()) return cmd_matrix(matrix_config, out_root, workers);
    if (emit->parsed()) return cmd_emit(emit_record, emit_format);
    if (report->parsed()) return cmd_report_delay(report_glob, report_out);
    return cmd_gradcheck();
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
}
