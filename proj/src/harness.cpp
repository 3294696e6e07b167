#include "rftlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"
#include "rftlab/csvio.hpp"
#include "rftlab/rng.hpp"
#include "rftlab/svg.hpp"

namespace fs = std::filesystem;

namespace rftlab::harness {

// ===========================================================================
// Configuration
// ===========================================================================

double ExperimentConfig::resolved_delay_threshold() const {
  if (delay_threshold >= 0.0) return delay_threshold;
  // The 5% convention assumes chance level far below 5%; desk-scale tasks
  // have K = 8-ish classes, so the reporting threshold sits above chance.
  return 1.0 / static_cast<double>(task.num_classes) + 0.075;
}

models::ModelSpec ExperimentConfig::model_spec() const {
  models::ModelSpec spec;
  spec.input_dim = task.input_dim;
  spec.hidden_dims = hidden_dims;
  spec.repr_dim = hidden_dims.back();
  spec.num_classes = task.num_classes;
  return spec;
}

namespace {

void optimizer_to_kv(config::KeyValueFile& kv, const std::string& section,
                     const train::OptimizerConfig& opt) {
  kv.set(section, "kind", train::optimizer_kind_name(opt.kind));
  kv.set_real(section, "learning_rate", opt.learning_rate);
  kv.set_real(section, "weight_decay", opt.weight_decay);
  kv.set_real(section, "momentum", opt.momentum);
  kv.set_real(section, "beta1", opt.beta1);
  kv.set_real(section, "beta2", opt.beta2);
  kv.set_bool(section, "cosine_schedule", opt.cosine_schedule);
  kv.set_int(section, "warmup_epochs", opt.warmup_epochs);
  kv.set_int(section, "batch_size", static_cast<long>(opt.batch_size));
}

train::OptimizerConfig optimizer_from_kv(const config::KeyValueFile& kv,
                                         const std::string& section,
                                         const train::OptimizerConfig& defaults) {
  train::OptimizerConfig opt = defaults;
  if (kv.has(section, "kind")) {
    opt.kind = train::optimizer_kind_from_name(kv.get_string(section, "kind"));
  }
  opt.learning_rate = kv.get_real_or(section, "learning_rate", opt.learning_rate);
  opt.weight_decay = kv.get_real_or(section, "weight_decay", opt.weight_decay);
  opt.momentum = kv.get_real_or(section, "momentum", opt.momentum);
  opt.beta1 = kv.get_real_or(section, "beta1", opt.beta1);
  opt.beta2 = kv.get_real_or(section, "beta2", opt.beta2);
  opt.cosine_schedule = kv.get_bool_or(section, "cosine_schedule", opt.cosine_schedule);
  opt.warmup_epochs = static_cast<int>(kv.get_int_or(section, "warmup_epochs", opt.warmup_epochs));
  opt.batch_size =
      static_cast<std::size_t>(kv.get_int_or(section, "batch_size", static_cast<long>(opt.batch_size)));
  opt.validate();
  return opt;
}

tasks::SyntheticTaskSpec suite_task(const std::string& name) {
  const tasks::DifficultySuite suite = tasks::difficulty_suite();
  if (name == "source") return suite.source;
  if (name == "easy") return suite.easy;
  if (name == "medium") return suite.medium;
  if (name == "hard") return suite.hard;
  throw config::ParseError("config: unknown task name '" + name + "'");
}

double parse_eps(const std::string& value) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos == value.size()) return v;
  } catch (...) {
  }
  return tasks::eps_preset(value);
}

train::OptimizerConfig default_finetune_optimizer() {
  train::OptimizerConfig opt;
  opt.kind = train::OptimizerConfig::Kind::AdamLike;
  opt.learning_rate = 1e-2;
  opt.weight_decay = 1e-4;
  opt.cosine_schedule = true;
  opt.warmup_epochs = 2;
  opt.batch_size = 64;
  return opt;
}

train::OptimizerConfig default_pretrain_optimizer() {
  train::OptimizerConfig opt = default_finetune_optimizer();
  opt.learning_rate = 2e-2;
  opt.warmup_epochs = 0;
  return opt;
}

}  // namespace

config::KeyValueFile ExperimentConfig::to_key_value() const {
  config::KeyValueFile kv;
  kv.set("", "name", name);
  std::vector<std::string> seed_strs;
  for (std::uint64_t s : seeds) seed_strs.push_back(std::to_string(s));
  kv.set_list("", "seeds", seed_strs);
  kv.set_real("", "eval_grid_step", eval_grid_step);
  kv.set_real("", "delay_threshold", delay_threshold);
  kv.set_int("", "eval_steps", eval_steps);
  kv.set_int("", "eval_every", eval_every);

  kv.set("task", "name", task_name);
  kv.set_int("task", "input_dim", static_cast<long>(task.input_dim));
  kv.set_int("task", "num_classes", static_cast<long>(task.num_classes));
  kv.set_real("task", "class_separation", task.class_separation);
  kv.set_int("task", "samples_per_class", static_cast<long>(task.samples_per_class));
  kv.set_real("task", "noise_scale", task.noise_scale);
  kv.set_int("task", "seed", static_cast<long>(task.seed));
  kv.set("task", "relation", tasks::relation_name(task.relation));

  std::vector<std::string> hidden_strs;
  for (std::size_t h : hidden_dims) hidden_strs.push_back(std::to_string(h));
  kv.set_list("model", "hidden_dims", hidden_strs);

  kv.set_int("pretrain", "epochs", pretrain_epochs);
  kv.set_int("pretrain", "seed", static_cast<long>(pretrain_seed));
  optimizer_to_kv(kv, "pretrain", pretrain_optimizer);

  kv.set("schedule", "preset", schedule_name);
  kv.set("schedule", "variant", schedule::variant_name(sched.variant));
  kv.set_real("schedule", "eps", sched.eps_goal);
  kv.set_int("schedule", "total_epochs", sched.total_epochs);
  kv.set_int("schedule", "t1", sched.t1);
  kv.set_int("schedule", "t2", sched.t2);

  kv.set_int("attack", "steps", attack.steps);
  kv.set_real("attack", "step_size", attack.step_size);
  kv.set_bool("attack", "random_start", attack.random_start);

  optimizer_to_kv(kv, "optimizer", optimizer);
  return kv;
}

ExperimentConfig ExperimentConfig::from_key_value(const config::KeyValueFile& kv) {
  ExperimentConfig cfg;
  if (kv.has("", "seeds")) {
    cfg.seeds.clear();
    for (long s : kv.get_int_list("", "seeds")) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (cfg.seeds.empty()) throw config::ParseError("config: seeds must be non-empty");
  cfg.eval_grid_step = kv.get_real_or("", "eval_grid_step", cfg.eval_grid_step);
  cfg.delay_threshold = kv.get_real_or("", "delay_threshold", cfg.delay_threshold);
  cfg.eval_steps = static_cast<int>(kv.get_int_or("", "eval_steps", cfg.eval_steps));
  cfg.eval_every = static_cast<int>(kv.get_int_or("", "eval_every", cfg.eval_every));

  cfg.task_name = kv.get_string_or("task", "name", "custom");
  if (cfg.task_name != "custom") cfg.task = suite_task(cfg.task_name);
  cfg.task.input_dim = static_cast<std::size_t>(
      kv.get_int_or("task", "input_dim", static_cast<long>(cfg.task.input_dim)));
  cfg.task.num_classes = static_cast<std::size_t>(
      kv.get_int_or("task", "num_classes", static_cast<long>(cfg.task.num_classes)));
  cfg.task.class_separation =
      kv.get_real_or("task", "class_separation", cfg.task.class_separation);
  cfg.task.samples_per_class = static_cast<std::size_t>(
      kv.get_int_or("task", "samples_per_class", static_cast<long>(cfg.task.samples_per_class)));
  cfg.task.noise_scale = kv.get_real_or("task", "noise_scale", cfg.task.noise_scale);
  cfg.task.seed =
      static_cast<std::uint64_t>(kv.get_int_or("task", "seed", static_cast<long>(cfg.task.seed)));
  if (kv.has("task", "relation")) {
    cfg.task.relation = tasks::relation_from_name(kv.get_string("task", "relation"));
  }
  cfg.task.validate();

  if (kv.has("model", "hidden_dims")) {
    cfg.hidden_dims.clear();
    for (long h : kv.get_int_list("model", "hidden_dims")) {
      cfg.hidden_dims.push_back(static_cast<std::size_t>(h));
    }
  }

  cfg.pretrain_epochs = static_cast<int>(kv.get_int_or("pretrain", "epochs", cfg.pretrain_epochs));
  cfg.pretrain_seed = static_cast<std::uint64_t>(
      kv.get_int_or("pretrain", "seed", static_cast<long>(cfg.pretrain_seed)));
  cfg.pretrain_optimizer = optimizer_from_kv(kv, "pretrain", default_pretrain_optimizer());

  const int total_epochs = static_cast<int>(kv.get_int_or("schedule", "total_epochs", 50));
  const double eps_goal =
      kv.has("schedule", "eps") ? parse_eps(kv.get_string("schedule", "eps")) : 0.0;
  cfg.schedule_name = kv.get_string_or("schedule", "preset", "custom");
  if (!cfg.schedule_name.empty() && cfg.schedule_name != "custom") {
    cfg.sched = schedule::preset(cfg.schedule_name, eps_goal, total_epochs);
  } else {
    cfg.sched.eps_goal = eps_goal;
    cfg.sched.total_epochs = total_epochs;
  }
  // Explicit keys take precedence over the preset; saved configs always carry
  // them, which keeps save/load faithful.
  if (kv.has("schedule", "variant")) {
    const std::string variant = kv.get_string("schedule", "variant");
    if (variant == "fix") {
      cfg.sched.variant = schedule::Variant::Fix;
    } else if (variant == "two_hinge") {
      cfg.sched.variant = schedule::Variant::TwoHinge;
    } else if (variant == "uniform") {
      cfg.sched.variant = schedule::Variant::Uniform;
    } else {
      throw config::ParseError("config: unknown schedule variant '" + variant + "'");
    }
  }
  if (kv.has("schedule", "t1")) cfg.sched.t1 = static_cast<int>(kv.get_int("schedule", "t1"));
  if (kv.has("schedule", "t2")) cfg.sched.t2 = static_cast<int>(kv.get_int("schedule", "t2"));
  cfg.sched.validate();

  cfg.attack.steps = static_cast<int>(kv.get_int_or("attack", "steps", 7));
  cfg.attack.step_size = kv.get_real_or("attack", "step_size", 0.0);
  cfg.attack.random_start = kv.get_bool_or("attack", "random_start", true);

  cfg.optimizer = optimizer_from_kv(kv, "optimizer", default_finetune_optimizer());

  cfg.name = kv.get_string_or("", "name", "run_" + config::hash_hex(cfg.hash()));
  return cfg;
}

std::string ExperimentConfig::canonical_string() const {
  config::KeyValueFile kv = to_key_value();
  // Display-only fields never affect numerics: the output name, and the
  // preset label (variant/t1/t2/eps fully determine the schedule).
  kv.set("", "name", "");
  kv.set("schedule", "preset", "");
  return kv.serialize();
}

std::uint64_t ExperimentConfig::hash() const { return config::fnv1a(canonical_string()); }

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  return from_key_value(config::KeyValueFile::parse_file(path));
}

void ExperimentConfig::save(const std::string& path) const { to_key_value().write_file(path); }

std::string default_out_root() {
  if (const char* env = std::getenv("RFTLAB_OUT")) return env;
  return "out";
}

// ===========================================================================
// Backbone cache
// ===========================================================================

namespace {

tasks::SyntheticTaskSpec source_task_for(const ExperimentConfig& cfg) {
  tasks::SyntheticTaskSpec source = tasks::difficulty_suite().source;
  // Custom geometries get a matched source so shapes line up.
  source.input_dim = cfg.task.input_dim;
  return source;
}

std::string backbone_cache_key(const ExperimentConfig& cfg) {
  const tasks::SyntheticTaskSpec source = source_task_for(cfg);
  config::KeyValueFile kv;
  kv.set_int("", "input_dim", static_cast<long>(source.input_dim));
  kv.set_int("", "num_classes", static_cast<long>(source.num_classes));
  kv.set_real("", "class_separation", source.class_separation);
  kv.set_int("", "samples_per_class", static_cast<long>(source.samples_per_class));
  kv.set_real("", "noise_scale", source.noise_scale);
  kv.set_int("", "task_seed", static_cast<long>(source.seed));
  std::vector<std::string> hidden;
  for (std::size_t h : cfg.hidden_dims) hidden.push_back(std::to_string(h));
  kv.set_list("", "hidden_dims", hidden);
  kv.set_int("", "epochs", cfg.pretrain_epochs);
  kv.set_int("", "seed", static_cast<long>(cfg.pretrain_seed));
  optimizer_to_kv(kv, "optimizer", cfg.pretrain_optimizer);
  return config::hash_hex(config::fnv1a(kv.serialize()));
}

std::mutex backbone_mutex;

}  // namespace

models::ModelState backbone_for(const ExperimentConfig& cfg, const std::string& out_root) {
  std::lock_guard<std::mutex> lock(backbone_mutex);
  const fs::path cache_dir = fs::path(out_root) / "backbones";
  fs::create_directories(cache_dir);
  const fs::path path = cache_dir / ("backbone_" + backbone_cache_key(cfg) + ".json");
  if (fs::exists(path)) return models::load_checkpoint(path.string());

  const tasks::TaskData source = tasks::generate(source_task_for(cfg));
  models::ModelSpec spec = cfg.model_spec();
  models::ModelState state = models::pretrain_backbone(spec, source, cfg.pretrain_epochs,
                                                       cfg.pretrain_optimizer, cfg.pretrain_seed);
  models::save_checkpoint(state, path.string());
  return state;
}

// ===========================================================================
// Persistence
// ===========================================================================

namespace {

void write_trace_csv(const std::string& path, const std::vector<train::EpochTrace>& trace) {
  csv::Writer w(path);
  w.header({"schema", "epoch", "train_eps", "train_loss", "val_clean_acc", "val_adv_acc_at_goal",
            "val_clean_loss", "val_adv_loss"});
  for (const train::EpochTrace& row : trace) {
    w.row({"1", std::to_string(row.epoch), csv::format_real(row.train_eps),
           csv::format_real(row.train_loss), csv::format_real(row.val_clean_acc),
           csv::format_real(row.val_adv_acc_at_goal), csv::format_real(row.val_clean_loss),
           csv::format_real(row.val_adv_loss)});
  }
  w.write();
}

std::vector<train::EpochTrace> read_trace_csv(const std::string& path) {
  std::vector<train::EpochTrace> trace;
  auto rows = csv::read_rows(path);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    train::EpochTrace row;
    row.epoch = std::stoi(r.at(1));
    row.train_eps = std::stod(r.at(2));
    row.train_loss = std::stod(r.at(3));
    row.val_clean_acc = std::stod(r.at(4));
    row.val_adv_acc_at_goal = std::stod(r.at(5));
    row.val_clean_loss = std::stod(r.at(6));
    row.val_adv_loss = std::stod(r.at(7));
    trace.push_back(row);
  }
  return trace;
}

void write_curve_csv(const std::string& path, const metrics::RobustnessCurve& curve) {
  csv::Writer w(path);
  w.header({"schema", "eps", "accuracy"});
  for (std::size_t i = 0; i < curve.eps_grid.size(); ++i) {
    w.row({"1", csv::format_real(curve.eps_grid[i]), csv::format_real(curve.accuracy[i])});
  }
  w.write();
}

metrics::RobustnessCurve read_curve_csv(const std::string& path) {
  metrics::RobustnessCurve curve;
  auto rows = csv::read_rows(path);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    curve.eps_grid.push_back(std::stod(rows[i].at(1)));
    curve.accuracy.push_back(std::stod(rows[i].at(2)));
  }
  return curve;
}

void write_summary_csv(const std::string& path, const ExperimentRecord& record) {
  csv::Writer w(path);
  w.header({"schema", "seed", "clean", "adv", "expected_adv", "delay_epoch", "aborted"});
  for (const SeedOutcome& s : record.seeds) {
    w.row({"1", std::to_string(s.seed), csv::format_real(s.clean), csv::format_real(s.adv),
           csv::format_real(s.expected_adv), std::to_string(s.delay), s.aborted ? "true" : "false"});
  }
  w.row({"1", "mean", csv::format_real(record.mean_clean), csv::format_real(record.mean_adv),
         csv::format_real(record.mean_expected_adv), "", ""});
  w.write();
}

nlohmann::json record_to_json(const ExperimentRecord& record) {
  nlohmann::json j;
  j["schema"] = 1;
  j["name"] = record.config.name;
  j["config_hash"] = record.hash_hex;
  j["task"] = record.config.task_name;
  j["eps_goal"] = record.config.sched.eps_goal;
  j["schedule"] = record.config.schedule_name;
  j["seeds"] = nlohmann::json::array();
  for (const SeedOutcome& s : record.seeds) {
    j["seeds"].push_back({{"seed", s.seed},
                          {"clean", s.clean},
                          {"adv", s.adv},
                          {"expected_adv", s.expected_adv},
                          {"delay", s.delay},
                          {"aborted", s.aborted},
                          {"abort_reason", s.abort_reason}});
  }
  j["mean"] = {{"clean", record.mean_clean},
               {"adv", record.mean_adv},
               {"expected_adv", record.mean_expected_adv}};
  return j;
}

void finalize_means(ExperimentRecord& record) {
  double c = 0.0, a = 0.0, e = 0.0;
  for (const SeedOutcome& s : record.seeds) {
    c += s.clean;
    a += s.adv;
    e += s.expected_adv;
  }
  const double n = static_cast<double>(record.seeds.size());
  record.mean_clean = c / n;
  record.mean_adv = a / n;
  record.mean_expected_adv = e / n;
}

}  // namespace

// ===========================================================================
// Single experiment
// ===========================================================================

ExperimentRecord run(const ExperimentConfig& cfg, const std::string& out_root,
                     bool reuse_existing) {
  const fs::path dir = fs::path(out_root) / cfg.name;
  const std::string hash = config::hash_hex(cfg.hash());
  if (reuse_existing && fs::exists(dir / "record.json")) {
    ExperimentRecord existing = load_record(dir.string());
    if (existing.hash_hex == hash) return existing;
  }
  fs::create_directories(dir);

  const models::ModelState backbone = backbone_for(cfg, out_root);
  const tasks::TaskData task = tasks::generate(cfg.task);
  const double threshold = cfg.resolved_delay_threshold();

  ExperimentRecord record;
  record.config = cfg;
  record.hash_hex = hash;
  record.dir = dir.string();

  for (std::uint64_t seed : cfg.seeds) {
    SeedOutcome outcome;
    outcome.seed = seed;

    models::ModelState state =
        models::reinit_head(backbone, cfg.task.num_classes, derive_seed(seed, kSeedInit));

    schedule::ScheduleSpec sched = cfg.sched;
    if (sched.variant == schedule::Variant::Uniform) sched.seed = seed;

    train::RunOptions options;
    options.eval_every = cfg.eval_every;
    options.eval_steps = cfg.eval_steps;
    train::RunResult result =
        train::run_rft(state, task, sched, cfg.attack, cfg.optimizer, seed, options);

    outcome.trace = result.trace;
    outcome.aborted = result.aborted;
    outcome.abort_reason = result.abort_reason;

    attacks::AttackConfig eval_cfg = cfg.attack;
    eval_cfg.steps = cfg.eval_steps;
    eval_cfg.seed = derive_seed(seed, kSeedEval, 0xC0FFEE);
    outcome.curve = metrics::accuracy_curve(result.state, task.test, sched.eps_goal,
                                            cfg.eval_grid_step, eval_cfg);
    outcome.clean = outcome.curve.accuracy.front();
    outcome.adv = outcome.curve.accuracy.back();
    outcome.expected_adv = sched.eps_goal > 0.0 ? metrics::expected_robustness(outcome.curve)
                                                : outcome.clean;
    const std::optional<int> delay = metrics::delay_epoch(outcome.trace, threshold);
    outcome.delay = delay ? *delay : -1;

    write_trace_csv((dir / ("trace_seed" + std::to_string(seed) + ".csv")).string(),
                    outcome.trace);
    write_curve_csv((dir / ("curve_seed" + std::to_string(seed) + ".csv")).string(),
                    outcome.curve);
    record.seeds.push_back(std::move(outcome));
  }

  finalize_means(record);
  cfg.save((dir / "config.cfg").string());
  write_summary_csv((dir / "summary.csv").string(), record);
  std::ofstream json_out(dir / "record.json", std::ios::binary | std::ios::trunc);
  json_out << record_to_json(record).dump(2) << "\n";
  return record;
}

ExperimentRecord load_record(const std::string& record_dir) {
  const fs::path dir(record_dir);
  std::ifstream in(dir / "record.json", std::ios::binary);
  if (!in) throw std::runtime_error("record: cannot open " + (dir / "record.json").string());
  nlohmann::json j = nlohmann::json::parse(in);

  ExperimentRecord record;
  record.config = ExperimentConfig::load((dir / "config.cfg").string());
  record.hash_hex = j.at("config_hash").get<std::string>();
  record.dir = record_dir;
  for (const auto& s : j.at("seeds")) {
    SeedOutcome outcome;
    outcome.seed = s.at("seed").get<std::uint64_t>();
    outcome.clean = s.at("clean").get<double>();
    outcome.adv = s.at("adv").get<double>();
    outcome.expected_adv = s.at("expected_adv").get<double>();
    outcome.delay = s.at("delay").get<int>();
    outcome.aborted = s.at("aborted").get<bool>();
    outcome.abort_reason = s.at("abort_reason").get<std::string>();
    outcome.trace =
        read_trace_csv((dir / ("trace_seed" + std::to_string(outcome.seed) + ".csv")).string());
    outcome.curve =
        read_curve_csv((dir / ("curve_seed" + std::to_string(outcome.seed) + ".csv")).string());
    record.seeds.push_back(std::move(outcome));
  }
  record.mean_clean = j.at("mean").at("clean").get<double>();
  record.mean_adv = j.at("mean").at("adv").get<double>();
  record.mean_expected_adv = j.at("mean").at("expected_adv").get<double>();
  return record;
}

// ===========================================================================
// Matrix
// ===========================================================================

MatrixResult run_matrix(const config::KeyValueFile& file, const std::string& out_root,
                        int workers) {
  if (!file.has_section("matrix")) {
    throw config::ParseError("matrix: config needs a [matrix] section");
  }
  const std::vector<std::string> schedules = file.get_list("matrix", "schedules");
  const std::vector<std::string> task_names = file.get_list("matrix", "tasks");
  const std::vector<std::string> eps_names = file.get_list("matrix", "eps");
  if (schedules.empty() || task_names.empty() || eps_names.empty()) {
    throw config::ParseError("matrix: schedules, tasks and eps must be non-empty");
  }

  MatrixResult result;
  for (const std::string& task_name : task_names) {
    for (const std::string& sched_name : schedules) {
      for (const std::string& eps_name : eps_names) {
        MatrixCell cell;
        cell.task = task_name;
        cell.schedule_name = sched_name;
        cell.eps_name = eps_name;
        cell.eps_goal = parse_eps(eps_name);
        result.cells.push_back(std::move(cell));
      }
    }
  }

  auto cell_config = [&](const MatrixCell& cell) {
    config::KeyValueFile kv = file;
    kv.set("task", "name", cell.task);
    kv.set("schedule", "preset", cell.eps_goal == 0.0 ? "fix" : cell.schedule_name);
    kv.set_real("schedule", "eps", cell.eps_goal);
    ExperimentConfig cfg = ExperimentConfig::from_key_value(kv);
    cfg.name = "matrix_" + cell.task + "_" + cell.schedule_name + "_" + cell.eps_name;
    std::replace(cfg.name.begin(), cfg.name.end(), '/', '-');
    return cfg;
  };

  // All cells share the backbone; build it once before going parallel.
  backbone_for(cell_config(result.cells.front()), out_root);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= result.cells.size()) break;
      MatrixCell& cell = result.cells[i];
      try {
        cell.record = run(cell_config(cell), out_root);
      } catch (const std::exception& err) {
        cell.failed = true;
        cell.error = err.what();
      }
    }
  };
  const int thread_count = std::max(1, std::min<int>(workers, static_cast<int>(result.cells.size())));
  if (thread_count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < thread_count; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  // Scheduler-vs-fix winner counts per (task, eps) cell.
  for (const std::string& task_name : task_names) {
    for (const std::string& eps_name : eps_names) {
      const MatrixCell* fix = nullptr;
      const MatrixCell* sched = nullptr;
      for (const MatrixCell& cell : result.cells) {
        if (cell.task != task_name || cell.eps_name != eps_name || cell.failed) continue;
        if (cell.schedule_name == "fix") fix = &cell;
        if (cell.schedule_name == "scheduler") sched = &cell;
      }
      if (fix != nullptr && sched != nullptr && fix->eps_goal > 0.0) {
        ++result.cells_compared;
        if (sched->record.mean_clean > fix->record.mean_clean) ++result.scheduler_wins_clean;
        if (sched->record.mean_expected_adv > fix->record.mean_expected_adv) {
          ++result.scheduler_wins_expected;
        }
      }
    }
  }

  const fs::path summary_path = fs::path(out_root) / "matrix_summary.csv";
  csv::Writer w(summary_path.string());
  w.header({"schema", "task", "schedule", "eps_name", "eps_goal", "clean", "adv", "expected_adv",
            "failed"});
  for (const MatrixCell& cell : result.cells) {
    w.row({"1", cell.task, cell.schedule_name, cell.eps_name, csv::format_real(cell.eps_goal),
           cell.failed ? "" : csv::format_real(cell.record.mean_clean),
           cell.failed ? "" : csv::format_real(cell.record.mean_adv),
           cell.failed ? "" : csv::format_real(cell.record.mean_expected_adv),
           cell.failed ? "true" : "false"});
  }
  w.write();
  result.summary_path = summary_path.string();
  return result;
}

// ===========================================================================
// Emission and reports
// ===========================================================================

void emit_curves(const ExperimentRecord& record, const std::string& format) {
  const fs::path dir(record.dir);
  if (format == "csv") {
    csv::Writer eps_csv((dir / "emit_accuracy_vs_eps.csv").string());
    eps_csv.header({"schema", "seed", "x", "metric", "value"});
    for (const SeedOutcome& s : record.seeds) {
      for (std::size_t i = 0; i < s.curve.eps_grid.size(); ++i) {
        eps_csv.row({"1", std::to_string(s.seed), csv::format_real(s.curve.eps_grid[i]),
                     "robust_accuracy", csv::format_real(s.curve.accuracy[i])});
      }
    }
    eps_csv.write();

    csv::Writer epoch_csv((dir / "emit_accuracy_vs_epoch.csv").string());
    epoch_csv.header({"schema", "seed", "x", "metric", "value"});
    for (const SeedOutcome& s : record.seeds) {
      for (const train::EpochTrace& row : s.trace) {
        epoch_csv.row({"1", std::to_string(s.seed), std::to_string(row.epoch), "val_clean_acc",
                       csv::format_real(row.val_clean_acc)});
        epoch_csv.row({"1", std::to_string(s.seed), std::to_string(row.epoch),
                       "val_adv_acc_at_goal", csv::format_real(row.val_adv_acc_at_goal)});
      }
    }
    epoch_csv.write();
    return;
  }
  if (format == "svg") {
    std::vector<svg::Series> eps_series;
    for (const SeedOutcome& s : record.seeds) {
      eps_series.push_back(
          {"seed " + std::to_string(s.seed), s.curve.eps_grid, s.curve.accuracy});
    }
    std::ofstream eps_out(dir / "accuracy_vs_eps.svg", std::ios::binary | std::ios::trunc);
    eps_out << svg::line_chart(record.config.name + ": accuracy vs eps", "eps", "accuracy",
                               eps_series);

    svg::Series clean{"val clean acc", {}, {}};
    svg::Series adv{"val adv acc", {}, {}};
    if (!record.seeds.empty()) {
      const std::size_t epochs = record.seeds.front().trace.size();
      for (std::size_t t = 0; t < epochs; ++t) {
        double c = 0.0, a = 0.0;
        for (const SeedOutcome& s : record.seeds) {
          c += s.trace[t].val_clean_acc;
          a += s.trace[t].val_adv_acc_at_goal;
        }
        clean.xs.push_back(static_cast<double>(t));
        clean.ys.push_back(c / static_cast<double>(record.seeds.size()));
        adv.xs.push_back(static_cast<double>(t));
        adv.ys.push_back(a / static_cast<double>(record.seeds.size()));
      }
    }
    std::ofstream epoch_out(dir / "accuracy_vs_epoch.svg", std::ios::binary | std::ios::trunc);
    epoch_out << svg::line_chart(record.config.name + ": accuracy vs epoch", "epoch", "accuracy",
                                 {clean, adv});
    return;
  }
  throw std::invalid_argument("emit: unknown format '" + format + "' (use csv or svg)");
}

DelayReport delay_severity_report(const std::vector<ExperimentRecord>& records) {
  // Deduplicate by config hash.
  std::vector<const ExperimentRecord*> unique;
  std::set<std::string> seen;
  for (const ExperimentRecord& r : records) {
    if (seen.insert(r.hash_hex).second) unique.push_back(&r);
  }
  if (unique.size() < 3) {
    throw std::invalid_argument("delay report: need at least 3 distinct records");
  }
  std::set<double> eps_values;
  for (const ExperimentRecord* r : unique) eps_values.insert(r->config.sched.eps_goal);
  if (eps_values.size() < 2) {
    throw std::invalid_argument("delay report: records must span multiple eps values");
  }

  auto reference_clean = [&](const ExperimentRecord& of, std::uint64_t seed) -> double {
    for (const ExperimentRecord* r : unique) {
      if (r->config.sched.eps_goal != 0.0 || r->config.task_name != of.config.task_name) continue;
      for (const SeedOutcome& s : r->seeds) {
        if (s.seed == seed) return s.clean;
      }
    }
    return -1.0;
  };

  DelayReport report;
  std::vector<double> delays;
  std::vector<double> finals;
  for (const ExperimentRecord* r : unique) {
    for (const SeedOutcome& s : r->seeds) {
      DelayReportRow row;
      row.record_name = r->config.name;
      row.seed = s.seed;
      row.eps_goal = r->config.sched.eps_goal;
      // Never-adapting runs count as the full run length.
      row.delay_epochs = s.delay >= 0 ? s.delay : r->config.sched.total_epochs;
      row.final_clean_acc = s.clean;
      const double ref = reference_clean(*r, s.seed);
      row.severity = ref >= 0.0 ? ref - s.clean : 0.0;
      delays.push_back(static_cast<double>(row.delay_epochs));
      finals.push_back(row.final_clean_acc);
      report.rows.push_back(std::move(row));
    }
  }
  report.correlation = metrics::pearson_correlation(delays, finals);
  return report;
}

void write_delay_report(const DelayReport& report, const std::string& path) {
  csv::Writer w(path);
  w.header({"schema", "record", "seed", "eps_goal", "delay_epochs", "final_clean_acc",
            "severity"});
  for (const DelayReportRow& row : report.rows) {
    w.row({"1", row.record_name, std::to_string(row.seed), csv::format_real(row.eps_goal),
           std::to_string(row.delay_epochs), csv::format_real(row.final_clean_acc),
           csv::format_real(row.severity)});
  }
  w.row({"1", "pearson_delay_vs_final", "", "", "", csv::format_real(report.correlation), ""});
  w.write();
}

std::vector<std::string> expand_record_glob(const std::string& pattern) {
  const fs::path pat(pattern);
  const fs::path parent = pat.parent_path().empty() ? fs::path(".") : pat.parent_path();
  const std::string leaf = pat.filename().string();

  auto matches = [](const std::string& name, const std::string& glob) {
    // Simple '*' wildcard match.
    std::size_t n = name.size(), g = glob.size();
    std::vector<std::vector<char>> dp(n + 1, std::vector<char>(g + 1, 0));
    dp[0][0] = 1;
    for (std::size_t j = 1; j <= g; ++j) dp[0][j] = dp[0][j - 1] && glob[j - 1] == '*';
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t j = 1; j <= g; ++j) {
        if (glob[j - 1] == '*') {
          dp[i][j] = dp[i - 1][j] || dp[i][j - 1];
        } else {
          dp[i][j] = dp[i - 1][j - 1] && name[i - 1] == glob[j - 1];
        }
      }
    }
    return dp[n][g] != 0;
  };

  std::vector<std::string> out;
  if (!fs::exists(parent)) return out;
  for (const auto& entry : fs::directory_iterator(parent)) {
    if (!entry.is_directory()) continue;
    if (!matches(entry.path().filename().string(), leaf)) continue;
    if (fs::exists(entry.path() / "record.json")) out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace rftlab::harness
