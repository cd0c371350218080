#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "test_support.hpp"

using namespace rrhtpp;
namespace fs = std::filesystem;

#ifndef RRHTPP_CLI
#error "RRHTPP_CLI must name the rrhtpp executable"
#endif

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::size_t line_count(const fs::path& p) {
  const auto s = slurp(p);
  return std::size_t(std::count(s.begin(), s.end(), '\n'));
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("rrhtpp_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs the CLI with `args`; stdout goes to dir/out.txt, stderr to dir/err.txt.
  int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + "\"" + std::string(RRHTPP_CLI) + "\" " + args + " > \"" +
                            (dir_ / "out.txt").string() + "\" 2> \"" + (dir_ / "err.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string synth(const std::string& name, std::size_t events = 80, std::uint64_t seed = 3) {
    const auto path = (dir_ / name).string();
    EXPECT_EQ(run("synth -o " + path + " --generator planted-community --nodes 20 --relations 3 --events " +
                  std::to_string(events) + " --seed " + std::to_string(seed)),
              0)
        << slurp(dir_ / "err.txt");
    return path;
  }

  std::string small_run(const std::string& data, const std::string& out, int dim = 4) const {
    return "--data " + data + " --out " + (dir_ / out).string() + " --dim " + std::to_string(dim) +
           " --heads 2 --batch 16 --negatives 3 --noise-streams 2 --lr 0.01";
  }

  // A depth-1 log over three relations plus its sidecar.
  std::string write_log(const std::string& name, const std::string& lines, std::size_t nodes = 3) {
    const auto path = dir_ / name;
    std::ofstream(path) << lines;
    std::ofstream(path.string() + ".meta.json")
        << nlohmann::json{{"num_nodes", nodes}, {"num_relations", 3}, {"depth", 1}}.dump();
    return path.string();
  }

  fs::path dir_;
};

}  // namespace

TEST(RunConfig, DefaultsAndSet) {
  RunConfig c;
  EXPECT_EQ(c.dim, 64u);
  EXPECT_EQ(c.batch, 128u);
  EXPECT_EQ(c.noise_streams, 20);
  EXPECT_EQ(c.negatives, 20u);
  EXPECT_EQ(c.lr, 5e-4);
  EXPECT_EQ(c.drift, DriftVariant::TimeEmbedding);
  c.set("dim", "16");
  c.set("drift", "neural-ode");
  c.set("bandwidth", "0.25");
  EXPECT_EQ(c.dim, 16u);
  EXPECT_EQ(c.drift, DriftVariant::NeuralOde);
  EXPECT_EQ(c.bandwidth, 0.25);
  c.set("bandwidth", "auto");
  EXPECT_FALSE(c.bandwidth.has_value());
}

TEST(RunConfig, BadKeysAndValuesAreUsageErrors) {
  RunConfig c;
  EXPECT_THROW(c.set("dimension", "4"), UsageError);
  EXPECT_THROW(c.set("dim", "four"), UsageError);
  EXPECT_THROW(c.set("dim", "-4"), UsageError);
  EXPECT_THROW(c.set("lr", "1e-3x"), UsageError);
  EXPECT_THROW(c.set("drift", "sideways"), std::exception);
  c.set("heads", "3");
  c.set("dim", "4");
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(RunConfig, KeyValueFile) {
  const auto path = fs::temp_directory_path() / "rrhtpp_cfg_test.conf";
  {
    std::ofstream out(path);
    out << "# small run\n  dim = 8 \n\nalpha=0  # no supervised term\ndrift = time-projection\n";
  }
  RunConfig c;
  c.load_file(path.string());
  EXPECT_EQ(c.dim, 8u);
  EXPECT_EQ(c.alpha, 0.0);
  EXPECT_EQ(c.drift, DriftVariant::TimeProjection);
  {
    std::ofstream out(path);
    out << "dim 8\n";
  }
  EXPECT_THROW(c.load_file(path.string()), UsageError);
  fs::remove(path);
  EXPECT_THROW(c.load_file("/nonexistent/x.conf"), UsageError);
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c;
  c.data = "d.jsonl";
  c.dim = 12;
  c.heads = 3;
  c.lr = 3.7e-3;
  c.bandwidth = 0.125;
  c.drift = DriftVariant::NeuralOde;
  auto j = c.to_json();
  j["command"] = "train";
  RunConfig back;
  back.apply_json(j);
  EXPECT_EQ(back.to_json(), c.to_json());
  for (const auto& key : config_keys()) EXPECT_TRUE(c.to_json().contains(key)) << key;
}

TEST(RunConfig, EnvironmentOverridesOutputDir) {
  RunConfig c;
  c.out = "here";
  ::unsetenv(kOutDirEnv);
  EXPECT_EQ(c.output_dir(), "here");
  ::setenv(kOutDirEnv, "/tmp/elsewhere", 1);
  EXPECT_EQ(c.output_dir(), "/tmp/elsewhere");
  ::unsetenv(kOutDirEnv);
}

TEST_F(Cli, VersionAndUsage) {
  EXPECT_EQ(run("--version"), 0);
  EXPECT_FALSE(slurp(dir_ / "out.txt").empty());
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("train --no-such-flag 1"), 1);
  EXPECT_EQ(run("train"), 1);  // no dataset
  EXPECT_NE(slurp(dir_ / "err.txt").find("usage error"), std::string::npos);
}

TEST_F(Cli, DataErrorsExitTwo) {
  EXPECT_EQ(run("ingest " + (dir_ / "missing.jsonl").string()), 2);
  std::ofstream(dir_ / "nometa.jsonl") << "{\"t\":1.0,\"edge\":[[0,[1]]]}\n";
  EXPECT_EQ(run("ingest " + (dir_ / "nometa.jsonl").string()), 2);
  EXPECT_NE(slurp(dir_ / "err.txt").find("sidecar"), std::string::npos);
  EXPECT_EQ(run("ingest " + write_log("bad.jsonl", "{\"t\":1.0,\"edge\":[[0,[1]]]}\n{\"t\":0.5,\"edge\":[[0,[2]]]}\n")), 2);
  EXPECT_EQ(run("ingest " + write_log("junk.jsonl", "{\"t\":1.0,\"edge\":[[0,[1]]]}\nnot json\n")), 2);
  EXPECT_NE(slurp(dir_ / "err.txt").find("line 2"), std::string::npos);
}

TEST_F(Cli, SynthIsDeterministicAndIngestable) {
  const auto a = synth("a.jsonl", 50, 11);
  const auto b = synth("b.jsonl", 50, 11);
  const auto c = synth("c.jsonl", 50, 12);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_NE(slurp(a), slurp(c));
  ASSERT_EQ(run("ingest --json " + a), 0);
  const auto stats = nlohmann::json::parse(slurp(dir_ / "out.txt"));
  EXPECT_EQ(stats["num_events"], 50);
  EXPECT_EQ(stats["num_relations"], 3);
  EXPECT_EQ(stats["depth"], 1);
  // Serialize/ingest round trip through the library.
  const auto loaded = ingest(a).stream;
  const auto copy = (dir_ / "copy.jsonl").string();
  serialize(copy, loaded);
  EXPECT_EQ(ingest(copy).stream, loaded);
}

TEST_F(Cli, SplitWritesThreeSegments) {
  const auto log = synth("s.jsonl", 80);
  ASSERT_EQ(run("split " + log + " -o " + (dir_ / "parts").string()), 0);
  EXPECT_EQ(ingest((dir_ / "parts" / "train.jsonl").string()).stream.size(), 40u);
  EXPECT_EQ(ingest((dir_ / "parts" / "validation.jsonl").string()).stream.size(), 20u);
  EXPECT_EQ(ingest((dir_ / "parts" / "test.jsonl").string()).stream.size(), 20u);
}

TEST_F(Cli, ZeroEpochsWritesInitialCheckpoint) {
  const auto log = synth("z.jsonl");
  ASSERT_EQ(run("train " + small_run(log, "run") + " --epochs 0"), 0) << slurp(dir_ / "err.txt");
  EXPECT_TRUE(fs::exists(dir_ / "run" / "best.ckpt"));
  EXPECT_EQ(slurp(dir_ / "run" / "epochs.csv"), "epoch,train_loss,val_loss,wall_seconds\n");
  const auto j = nlohmann::json::parse(slurp(dir_ / "run" / "run.json"));
  EXPECT_EQ(j["command"], "train");
  EXPECT_EQ(j["dim"], 4);
  EXPECT_EQ(j["epochs"], 0);
  EXPECT_TRUE(j.contains("version"));
  // The checkpoint holds the seeded initialization.
  const auto stream = ingest(log).stream;
  ModelConfig mc;
  mc.num_nodes = stream.num_nodes;
  mc.num_relations = stream.num_relations;
  mc.depth = 1;
  mc.dim = 4;
  mc.heads = 2;
  IntensityModel fresh(mc);
  IntensityModel loaded(mc);
  load_checkpoint((dir_ / "run" / "best.ckpt").string()).load_parameters(loaded.parameters());
  EXPECT_EQ(loaded.parameters().values(), fresh.parameters().values());
}

TEST_F(Cli, SameSeedSameLoss) {
  const auto log = synth("r.jsonl");
  ASSERT_EQ(run("train " + small_run(log, "one") + " --epochs 1"), 0) << slurp(dir_ / "err.txt");
  ASSERT_EQ(run("train " + small_run(log, "two") + " --epochs 1"), 0);
  auto losses = [&](const char* d) {
    auto s = slurp(dir_ / d / "epochs.csv");
    s = s.substr(s.find('\n') + 1);
    return s.substr(0, s.find(',', s.find(',') + 1));  // epoch,train_loss
  };
  EXPECT_EQ(losses("one"), losses("two"));
  EXPECT_EQ(slurp(dir_ / "one" / "best.ckpt"), slurp(dir_ / "two" / "best.ckpt"));
}

TEST_F(Cli, ResumeContinuesTheEpochCounter) {
  const auto log = synth("c.jsonl");
  ASSERT_EQ(run("train " + small_run(log, "run") + " --epochs 1"), 0) << slurp(dir_ / "err.txt");
  ASSERT_EQ(run("train " + small_run(log, "run") + " --epochs 2 --resume " + (dir_ / "run" / "last.ckpt").string()), 0)
      << slurp(dir_ / "err.txt");
  const auto csv = slurp(dir_ / "run" / "epochs.csv");
  EXPECT_EQ(line_count(dir_ / "run" / "epochs.csv"), 3u);
  EXPECT_NE(csv.find("\n0,"), std::string::npos);
  EXPECT_NE(csv.find("\n1,"), std::string::npos);

  // Uninterrupted two-epoch run lands on the same parameters.
  ASSERT_EQ(run("train " + small_run(log, "straight") + " --epochs 2"), 0);
  EXPECT_EQ(slurp(dir_ / "run" / "last.ckpt"), slurp(dir_ / "straight" / "last.ckpt"));
}

TEST_F(Cli, EvalWritesMetrics) {
  const auto log = synth("e.jsonl");
  ASSERT_EQ(run("train " + small_run(log, "run") + " --epochs 1"), 0) << slurp(dir_ / "err.txt");
  ASSERT_EQ(run("eval " + small_run(log, "run")), 0) << slurp(dir_ / "err.txt");
  const auto metrics = slurp(dir_ / "run" / "metrics.csv");
  EXPECT_EQ(metrics.substr(0, metrics.find('\n')), "auc,mae,events,negatives,unconverged");
  EXPECT_EQ(line_count(dir_ / "run" / "trials.csv"), 21u);  // header + 20 test events
  EXPECT_EQ(nlohmann::json::parse(slurp(dir_ / "run" / "run.json"))["command"], "eval");
  // A checkpoint from a different architecture is refused.
  EXPECT_EQ(run("eval " + small_run(log, "run", 8)), 2);
  EXPECT_NE(slurp(dir_ / "err.txt").find("dim"), std::string::npos);
}

TEST_F(Cli, EnvironmentSelectsOutputDir) {
  const auto log = synth("v.jsonl");
  const auto env_dir = dir_ / "from_env";
  ASSERT_EQ(run("train " + small_run(log, "ignored") + " --epochs 0", std::string(kOutDirEnv) + "=" + env_dir.string()),
            0);
  EXPECT_TRUE(fs::exists(env_dir / "best.ckpt"));
  EXPECT_FALSE(fs::exists(dir_ / "ignored"));
}

TEST_F(Cli, NllOracle) {
  const auto log = write_log("tiny.jsonl",
                             "{\"t\":0.5,\"edge\":[[0,[0]],[1,[1]]]}\n"
                             "{\"t\":1.5,\"edge\":[[0,[1]],[1,[2]]]}\n"
                             "{\"t\":2.0,\"edge\":[[0,[0]],[1,[1]]]}\n");
  ASSERT_EQ(run("nll-oracle --data " + log + " --dim 4 --heads 2 --steps 50"), 0)
      << slurp(dir_ / "err.txt");
  const auto out = slurp(dir_ / "out.txt");
  EXPECT_EQ(out.rfind("nll ", 0), 0u);
  EXPECT_NE(out.find("vocabulary 2"), std::string::npos);
}
