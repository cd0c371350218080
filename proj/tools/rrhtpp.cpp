// rrhtpp command-line driver.
//
// Exit codes: 0 ok, 1 usage error, 2 data error, 3 numeric failure.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rrhtpp/rrhtpp.hpp"

#ifndef RRHTPP_VERSION
#define RRHTPP_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using namespace rrhtpp;

namespace {

struct ConfigArgs {
  std::string file;
  std::map<std::string, std::string> overrides;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("-c,--config", args.file, "config file (key = value lines, or a run.json)");
  for (const auto& key : config_keys()) {
    std::string flag = "--" + key;
    std::replace(flag.begin() + 2, flag.end(), '_', '-');
    cmd->add_option(flag, args.overrides[key], "override config key '" + key + "'");
  }
}

RunConfig resolve(const ConfigArgs& args) {
  RunConfig cfg;
  if (!args.file.empty()) cfg.load_file(args.file);
  for (const auto& [k, v] : args.overrides)
    if (!v.empty()) cfg.set(k, v);
  cfg.validate();
  return cfg;
}

fs::path prepare_out_dir(const RunConfig& cfg) {
  fs::path dir = cfg.output_dir();
  fs::create_directories(dir);
  return dir;
}

void write_run_json(const fs::path& path, const RunConfig& cfg, const std::string& command) {
  nlohmann::json j = cfg.to_json();
  j["command"] = command;
  j["version"] = RRHTPP_VERSION;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

EventStream load_stream(const RunConfig& cfg) {
  if (cfg.data.empty()) throw UsageError("no dataset given (set 'data' or pass --data)");
  return ingest(cfg.data).stream;
}

ModelConfig model_config(const RunConfig& cfg, const EventStream& s) {
  ModelConfig mc;
  mc.num_nodes = s.num_nodes;
  mc.num_relations = s.num_relations;
  mc.depth = s.depth;
  mc.dim = cfg.dim;
  mc.heads = cfg.heads;
  mc.drift = cfg.drift;
  mc.ode_steps = cfg.ode_steps;
  mc.seed = cfg.seed;
  return mc;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig tc;
  tc.batch = cfg.batch;
  tc.noise_streams = cfg.noise_streams;
  tc.negatives = cfg.negatives;
  tc.alpha = cfg.alpha;
  tc.optimizer.lr = cfg.lr;
  tc.optimizer.weight_decay = cfg.weight_decay;
  tc.optimizer.clip_norm = cfg.clip_norm;
  tc.seed = cfg.seed;
  tc.bandwidth = cfg.bandwidth;
  return tc;
}

void put_model_meta(Checkpoint& ck, const ModelConfig& mc) {
  ck.meta["num_nodes"] = std::to_string(mc.num_nodes);
  ck.meta["num_relations"] = std::to_string(mc.num_relations);
  ck.meta["depth"] = std::to_string(mc.depth);
  ck.meta["dim"] = std::to_string(mc.dim);
  ck.meta["heads"] = std::to_string(mc.heads);
  ck.meta["drift"] = to_string(mc.drift);
  ck.meta["ode_steps"] = std::to_string(mc.ode_steps);
  ck.meta["version"] = RRHTPP_VERSION;
}

void check_model_meta(const Checkpoint& ck, const ModelConfig& mc) {
  auto expect = [&](const std::string& key, const std::string& value) {
    auto it = ck.meta.find(key);
    if (it == ck.meta.end()) throw DataError("checkpoint lacks '" + key + "'");
    if (it->second != value)
      throw DataError("checkpoint " + key + " is " + it->second + " but the run expects " + value);
  };
  expect("num_nodes", std::to_string(mc.num_nodes));
  expect("num_relations", std::to_string(mc.num_relations));
  expect("depth", std::to_string(mc.depth));
  expect("dim", std::to_string(mc.dim));
  expect("heads", std::to_string(mc.heads));
  expect("drift", to_string(mc.drift));
}

void print_stats(const DatasetStats& s, bool json) {
  if (json) {
    nlohmann::json j{{"num_nodes", s.num_nodes}, {"num_relations", s.num_relations}, {"num_events", s.num_events},
                     {"horizon", s.horizon},     {"depth", s.depth},                 {"mean_gap", s.mean_gap},
                     {"max_gap", s.max_gap},     {"min_gap", s.min_gap},             {"zero_gaps", s.zero_gaps}};
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::cout << "nodes      " << s.num_nodes << '\n'
            << "relations  " << s.num_relations << '\n'
            << "events     " << s.num_events << '\n'
            << "horizon    " << s.horizon << '\n'
            << "depth      " << s.depth << '\n'
            << "mean gap   " << s.mean_gap << '\n'
            << "max gap    " << s.max_gap << '\n'
            << "min gap    " << s.min_gap << '\n'
            << "zero gaps  " << s.zero_gaps << '\n';
}

int cmd_ingest(const std::string& path, bool json) {
  print_stats(ingest(path).stats, json);
  return 0;
}

int cmd_split(const std::string& path, const std::string& out_dir) {
  const auto parts = split(ingest(path).stream);
  fs::create_directories(out_dir);
  serialize((fs::path(out_dir) / "train.jsonl").string(), parts.train);
  serialize((fs::path(out_dir) / "validation.jsonl").string(), parts.validation);
  serialize((fs::path(out_dir) / "test.jsonl").string(), parts.test);
  std::cout << "train " << parts.train.size() << ", validation " << parts.validation.size() << ", test "
            << parts.test.size() << " events written to " << out_dir << '\n';
  return 0;
}

int cmd_synth(const SyntheticSpec& spec, const std::string& out) {
  serialize(out, synthesize(spec));
  std::cout << "wrote " << spec.events << " events to " << out << '\n';
  return 0;
}

int cmd_train(const ConfigArgs& args, const std::string& resume) {
  const RunConfig cfg = resolve(args);
  const fs::path dir = prepare_out_dir(cfg);
  write_run_json(dir / "run.json", cfg, "train");
  const EventStream stream = load_stream(cfg);
  const auto parts = split(stream);
  const ModelConfig mc = model_config(cfg, stream);
  IntensityModel model(mc);
  Trainer trainer(model, parts.train, train_config(cfg));

  const fs::path metrics_path = dir / "epochs.csv";
  bool append = false;
  if (!resume.empty()) {
    const Checkpoint ck = load_checkpoint(resume);
    check_model_meta(ck, mc);
    ck.load_parameters(model.parameters());
    trainer.load(ck);
    append = fs::exists(metrics_path);
    std::cerr << "resuming at epoch " << trainer.epoch() << '\n';
  }
  std::ofstream metrics(metrics_path, append ? std::ios::app : std::ios::trunc);
  if (!metrics) throw DataError("cannot write " + metrics_path.string());
  if (!append) metrics << "epoch,train_loss,val_loss,wall_seconds\n";
  metrics.precision(10);

  auto save = [&](const fs::path& path, bool with_optimizer) {
    Checkpoint ck;
    put_model_meta(ck, mc);
    ck.put_parameters(model.parameters());
    if (with_optimizer) trainer.save(ck);
    save_checkpoint(path.string(), ck);
  };

  const std::size_t todo = cfg.epochs > trainer.epoch() ? cfg.epochs - trainer.epoch() : 0;
  trainer.fit(parts.validation, todo, [&](const EpochMetrics& m) {
    metrics << m.epoch << ',' << m.train_loss << ',' << m.val_loss << ',' << m.wall_seconds << '\n' << std::flush;
    std::cerr << "epoch " << m.epoch << "  train " << m.train_loss << "  val " << m.val_loss << "  (" << m.wall_seconds
              << " s)\n";
    save(dir / "last.ckpt", true);
  });
  save(dir / "last.ckpt", true);
  trainer.restore_best();
  save(dir / "best.ckpt", false);
  std::cout << "trained " << todo << " epochs; checkpoint " << (dir / "best.ckpt").string() << '\n';
  return 0;
}

int cmd_eval(const ConfigArgs& args, std::string checkpoint) {
  const RunConfig cfg = resolve(args);
  const fs::path dir = prepare_out_dir(cfg);
  if (checkpoint.empty()) checkpoint = (dir / "best.ckpt").string();
  const EventStream stream = load_stream(cfg);
  const auto parts = split(stream);
  const ModelConfig mc = model_config(cfg, stream);
  IntensityModel model(mc);
  const Checkpoint ck = load_checkpoint(checkpoint);
  check_model_meta(ck, mc);
  ck.load_parameters(model.parameters());
  write_run_json(dir / "run.json", cfg, "eval");

  ModelRunner runner(model);
  runner.replay(parts.train.events);
  runner.replay(parts.validation.events);
  RunnerSource source(runner);
  const auto stats = compute_stats(parts.train);
  EvaluationOptions opt;
  opt.negatives = cfg.negatives;
  opt.duration.step_scale = cfg.duration_step;
  opt.duration.time_scale = stats.mean_gap;
  opt.duration.horizon = cfg.duration_horizon > 0.0 ? cfg.duration_horizon : 10.0 * stream.events.back().time;
  std::mt19937_64 rng(cfg.eval_seed);
  const auto result = evaluate(source, parts.test.events, CorruptionModel::fit(parts.train), opt, rng);
  write_metrics_csv((dir / "metrics.csv").string(), result);
  write_trials_csv((dir / "trials.csv").string(), result);
  std::cout << "auc " << result.auc << "  mae " << result.mae << "  events " << result.events;
  if (result.unconverged) std::cout << "  (" << result.unconverged << " duration integrals hit the horizon)";
  std::cout << '\n';
  return 0;
}

int cmd_nll_oracle(const ConfigArgs& args, const std::string& checkpoint, std::size_t steps) {
  const RunConfig cfg = resolve(args);
  const EventStream stream = load_stream(cfg);
  IntensityModel model(model_config(cfg, stream));
  if (!checkpoint.empty()) {
    const Checkpoint ck = load_checkpoint(checkpoint);
    check_model_meta(ck, model.config());
    ck.load_parameters(model.parameters());
  }
  CandidateSet vocab;
  for (const auto& e : stream.events) vocab.add(e.edge);
  ModelRunner runner(model);
  RunnerSource source(runner);
  const double nll = nll_oracle(source, stream.events, vocab.edges(), stream.events.back().time, steps);
  std::cout.precision(12);
  std::cout << "nll " << nll << "  events " << stream.size() << "  vocabulary " << vocab.size() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recursive multi-relational hyperedge temporal point process"};
  app.set_version_flag("--version", std::string(RRHTPP_VERSION));
  app.require_subcommand(1);

  std::string log_path, out_dir, resume, checkpoint;
  bool json = false;
  std::size_t steps = 200;

  auto* ingest_cmd = app.add_subcommand("ingest", "validate an event log and print its statistics");
  ingest_cmd->add_option("log", log_path, "event log (JSON lines)")->required();
  ingest_cmd->add_flag("--json", json, "print statistics as JSON");

  auto* split_cmd = app.add_subcommand("split", "write the 50/25/25 chronological split");
  split_cmd->add_option("log", log_path, "event log")->required();
  split_cmd->add_option("-o,--out-dir", out_dir, "output directory")->required();

  SyntheticSpec spec;
  std::string generator = "planted-community";
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic event log");
  synth_cmd->add_option("-o,--out", log_path, "output log path")->required();
  synth_cmd->add_option("--generator", generator, "homogeneous-poisson or planted-community");
  synth_cmd->add_option("--nodes", spec.num_nodes, "number of nodes");
  synth_cmd->add_option("--relations", spec.num_relations, "number of relations");
  synth_cmd->add_option("--depth", spec.depth, "hyperedge depth (1 or 2)");
  synth_cmd->add_option("--events", spec.events, "number of events");
  synth_cmd->add_option("--rate", spec.rate, "event rate");
  synth_cmd->add_option("--communities", spec.communities, "planted communities");
  synth_cmd->add_option("--outsider-prob", spec.outsider_prob, "chance a node ignores its community");
  synth_cmd->add_option("--seed", spec.seed, "random seed");

  ConfigArgs train_args, eval_args, nll_args;
  auto* train_cmd = app.add_subcommand("train", "train with noise-contrastive estimation");
  add_config_options(train_cmd, train_args);
  train_cmd->add_option("--resume", resume, "continue from a last.ckpt");

  auto* eval_cmd = app.add_subcommand("eval", "interaction-type AUC and duration MAE on the test split");
  add_config_options(eval_cmd, eval_args);
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint (default <out>/best.ckpt)");

  auto* nll_cmd = app.add_subcommand("nll-oracle", "exact negative log-likelihood for a tiny edge vocabulary");
  add_config_options(nll_cmd, nll_args);
  nll_cmd->add_option("--checkpoint", checkpoint, "checkpoint (default: untrained parameters)");
  nll_cmd->add_option("--steps", steps, "trapezoid steps per inter-event interval");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*ingest_cmd) return cmd_ingest(log_path, json);
    if (*split_cmd) return cmd_split(log_path, out_dir);
    if (*synth_cmd) {
      spec.generator = parse_generator(generator);
      return cmd_synth(spec, log_path);
    }
    if (*train_cmd) return cmd_train(train_args, resume);
    if (*eval_cmd) return cmd_eval(eval_args, checkpoint);
    if (*nll_cmd) return cmd_nll_oracle(nll_args, checkpoint, steps);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
