#pragma once

// Run configuration: a flat "key = value" file (or a previous run.json),
// overridden by command-line flags, validated before anything runs.

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rrhtpp/encoder.hpp"
#include "rrhtpp/error.hpp"

namespace rrhtpp {

inline constexpr const char* kOutDirEnv = "RRHTPP_OUT_DIR";

/// Every key accepted by RunConfig::set, in run.json order.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{"data",      "out",       "dim",        "batch",    "noise_streams",
                                             "negatives", "alpha",     "lr",         "weight_decay", "clip_norm",
                                             "epochs",    "drift",     "ode_steps",  "heads",    "seed",
                                             "bandwidth", "eval_seed", "duration_step", "duration_horizon"};
  return keys;
}

struct RunConfig {
  std::string data;
  std::string out = "run";
  std::size_t dim = 64;
  std::size_t batch = 128;
  int noise_streams = 20;
  std::size_t negatives = 20;
  double alpha = 1.0;
  double lr = 5e-4;
  double weight_decay = 0.01;
  double clip_norm = 10.0;
  std::size_t epochs = 200;
  DriftVariant drift = DriftVariant::TimeEmbedding;
  std::size_t ode_steps = 8;
  std::size_t heads = 4;
  std::uint64_t seed = 1;
  std::optional<double> bandwidth;  // unset: Silverman's rule
  std::uint64_t eval_seed = 7919;
  double duration_step = 0.01;
  double duration_horizon = 0.0;  // 0: ten times the stream's time span

  /// Sets one key from its text form. Unknown keys and bad values are usage errors.
  void set(const std::string& key, const std::string& value) {
    auto fail = [&](const std::string& why) { throw UsageError("config key '" + key + "': " + why + " ('" + value + "')"); };
    auto to_double = [&]() {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(value, &pos);
      } catch (const std::exception&) {
        fail("not a number");
      }
      if (pos != value.size()) fail("not a number");
      return v;
    };
    auto to_uint = [&]() -> std::uint64_t {
      if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos) fail("not a non-negative integer");
      try {
        return std::stoull(value);
      } catch (const std::exception&) {
        fail("integer out of range");
      }
      return 0;
    };
    if (key == "data") data = value;
    else if (key == "out") out = value;
    else if (key == "dim") dim = to_uint();
    else if (key == "batch") batch = to_uint();
    else if (key == "noise_streams") noise_streams = int(to_uint());
    else if (key == "negatives") negatives = to_uint();
    else if (key == "alpha") alpha = to_double();
    else if (key == "lr") lr = to_double();
    else if (key == "weight_decay") weight_decay = to_double();
    else if (key == "clip_norm") clip_norm = to_double();
    else if (key == "epochs") epochs = to_uint();
    else if (key == "drift") drift = parse_drift_variant(value);
    else if (key == "ode_steps") ode_steps = to_uint();
    else if (key == "heads") heads = to_uint();
    else if (key == "seed") seed = to_uint();
    else if (key == "bandwidth") bandwidth = value == "auto" ? std::nullopt : std::optional<double>(to_double());
    else if (key == "eval_seed") eval_seed = to_uint();
    else if (key == "duration_step") duration_step = to_double();
    else if (key == "duration_horizon") duration_horizon = to_double();
    else if (key == "version" || key == "command") {}  // informational, written into run.json
    else throw UsageError("unknown config key '" + key + "'");
  }

  void validate() const {
    auto bad = [](const std::string& m) { throw UsageError("invalid config: " + m); };
    if (dim == 0) bad("dim must be positive");
    if (heads == 0 || (2 * dim) % heads != 0) bad("heads must divide 2*dim");
    if (batch == 0) bad("batch must be positive");
    if (noise_streams < 0) bad("noise_streams must be non-negative");
    if (negatives == 0) bad("negatives must be positive");
    if (!(alpha >= 0.0)) bad("alpha must be non-negative");
    if (!(lr > 0.0)) bad("lr must be positive");
    if (!(weight_decay >= 0.0)) bad("weight_decay must be non-negative");
    if (drift == DriftVariant::NeuralOde && ode_steps == 0) bad("ode_steps must be positive");
    if (bandwidth && !(*bandwidth > 0.0)) bad("bandwidth must be positive");
    if (!(duration_step > 0.0)) bad("duration_step must be positive");
    if (duration_horizon < 0.0) bad("duration_horizon must be non-negative");
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["data"] = data;
    j["out"] = out;
    j["dim"] = dim;
    j["batch"] = batch;
    j["noise_streams"] = noise_streams;
    j["negatives"] = negatives;
    j["alpha"] = alpha;
    j["lr"] = lr;
    j["weight_decay"] = weight_decay;
    j["clip_norm"] = clip_norm;
    j["epochs"] = epochs;
    j["drift"] = to_string(drift);
    j["ode_steps"] = ode_steps;
    j["heads"] = heads;
    j["seed"] = seed;
    j["bandwidth"] = bandwidth ? nlohmann::json(*bandwidth) : nlohmann::json("auto");
    j["eval_seed"] = eval_seed;
    j["duration_step"] = duration_step;
    j["duration_horizon"] = duration_horizon;
    return j;
  }

  /// Applies every key of a JSON object (a run.json).
  void apply_json(const nlohmann::json& j) {
    if (!j.is_object()) throw UsageError("config JSON must be an object");
    for (const auto& [k, v] : j.items()) {
      if (v.is_string()) {
        set(k, v.get<std::string>());
      } else if (v.is_number_integer()) {
        set(k, std::to_string(v.get<long long>()));
      } else if (v.is_number()) {
        std::ostringstream os;
        os.precision(17);
        os << v.get<double>();
        set(k, os.str());
      } else {
        throw UsageError("config key '" + k + "' has an unsupported value");
      }
    }
  }

  /// "key = value" lines; '#' starts a comment. Files ending in .json are
  /// read as a run.json.
  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path);
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
      try {
        apply_json(nlohmann::json::parse(in));
      } catch (const nlohmann::json::exception& e) {
        throw UsageError("config " + path + ": " + e.what());
      }
      return;
    }
    std::string line;
    std::size_t n = 0;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    while (std::getline(in, line)) {
      ++n;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(n) + ": expected key = value");
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
  }

  /// The environment variable, when set, wins over `out`.
  std::string output_dir() const {
    if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
    return out;
  }
};

}  // namespace rrhtpp
