#include "swift/harness/experiment.hpp"

#include "swift/error.hpp"
#include "swift/harness/costs.hpp"
#include "swift/harness/io.hpp"
#include "swift/harness/noise.hpp"
#include "swift/metrics.hpp"
#include "swift/solver.hpp"

#include <chrono>
#include <fstream>
#include <functional>
#include <set>

#ifndef SWIFT_VERSION
#define SWIFT_VERSION "unknown"
#endif

namespace fs = std::filesystem;

namespace swift::harness {

namespace {

using Clock = std::chrono::steady_clock;

const Json& solver_defaults() {
  static const Json d = {
      {"rank", 5},          {"rho", 50.0},           {"lambda", 1.0},
      {"outer_iters", 50},  {"sinkhorn_iters", 25},  {"seed", 0},
      {"parallel", true},   {"warm_start", true},    {"drop_zero_columns", true},
      {"denominator", "stacked"},
  };
  return d;
}

Json command_defaults(const std::string& command) {
  if (command == "factorize") {
    Json d = solver_defaults();
    d.update({{"cost_mode", "cosine"}, {"cost_files", Json::object()}, {"cost_seed", 0},
              {"holdout", 0}});
    return d;
  }
  if (command == "project") {
    Json d = solver_defaults();
    d.update({{"cost_mode", "cosine"}, {"cost_files", Json::object()}, {"cost_seed", 0}});
    return d;
  }
  if (command == "noise") return {{"model", "bernoulli"}, {"p", 0.0}, {"seed", 0}};
  if (command == "costmat") return {{"mode", 0}, {"kind", "cosine"}, {"seed", 0}};
  fail(ErrorKind::InvalidArgument, "unknown command '" + command + "'");
}

std::vector<std::string> required_keys(const std::string& command) {
  if (command == "project") return {"tensor", "factors", "out"};
  return {"tensor", "out"};
}

std::vector<std::string> path_keys(const std::string& command) {
  if (command == "project") return {"tensor", "factors", "out"};
  return {"tensor", "out"};
}

std::string absolute(const fs::path& p, const fs::path& base) {
  return fs::weakly_canonical(p.is_absolute() ? p : base / p).string();
}

template <typename T>
T get(const Json& config, const char* key) {
  try {
    return config.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("config key '") + key + "': " + e.what());
  }
}

SolverConfig solver_from_json(const Json& c) {
  SolverConfig s;
  s.rank = get<Index>(c, "rank");
  s.rho = get<double>(c, "rho");
  s.lambda = get<double>(c, "lambda");
  s.outer_iters = get<int>(c, "outer_iters");
  s.sinkhorn_iters = get<int>(c, "sinkhorn_iters");
  s.seed = get<std::uint64_t>(c, "seed");
  s.parallel = get<bool>(c, "parallel");
  s.warm_start = get<bool>(c, "warm_start");
  s.drop_zero_columns = get<bool>(c, "drop_zero_columns");
  s.denominator = parse_denominator(get<std::string>(c, "denominator"));
  s.validate();
  return s;
}

// Runs `body`, timing it under `phase` and prefixing errors with the phase.
template <typename F>
auto phase(RunManifest& m, const std::string& name, F&& body) {
  const auto start = Clock::now();
  auto record = [&] {
    m.timings[name] += std::chrono::duration<double>(Clock::now() - start).count();
  };
  try {
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      record();
    } else {
      auto out = body();
      record();
      return out;
    }
  } catch (const Error& e) {
    throw Error(e.kind(), name + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, name + ": " + e.what());
  }
}

void digest_input(RunManifest& m, const fs::path& p) { m.input_digests[p.string()] = sha256_file(p); }

void digest_output(RunManifest& m, const fs::path& dir, const std::string& name) {
  m.output_digests[name] = sha256_file(dir / name);
}

/// Cost for mode n of `tensor` following the config's cost_mode / cost_files.
Matrix resolve_cost(RunManifest& m, const Json& c, const SparseTensor& tensor, int n,
                    const std::string& label) {
  const std::string mode = get<std::string>(c, "cost_mode");
  const Json& files = c.at("cost_files");
  const std::string key = std::to_string(n);
  if (files.contains(key)) {
    const fs::path p = files.at(key).get<std::string>();
    if (fs::exists(p)) {
      digest_input(m, p);
      Matrix cost = load_matrix(p);
      require(cost.rows() == tensor.extent(n) && cost.cols() == tensor.extent(n),
              "cost file " + p.string() + " does not match extent " +
                  std::to_string(tensor.extent(n)) + " of mode " + key);
      return cost;
    }
    if (mode == "files") fail(ErrorKind::Io, "cost file " + p.string() + " does not exist");
    m.notes.push_back(label + "cost file " + p.string() + " missing; built " + mode +
                      " cost for mode " + key);
  } else if (mode == "files") {
    fail(ErrorKind::InvalidArgument, "cost_mode=files but no cost file for mode " + key);
  }
  if (mode == "cosine") {
    m.notes.push_back(label + "mode " + key + " cost built from the tensor (cosine)");
    return build_cost_cosine(tensor, n);
  }
  if (mode == "identity") return build_cost_one_identity(tensor.extent(n));
  if (mode == "random")
    return build_cost_random(tensor.extent(n), get<std::uint64_t>(c, "cost_seed") +
                                                   static_cast<std::uint64_t>(n));
  fail(ErrorKind::InvalidArgument, "unknown cost_mode '" + mode + "'");
}

/// Splits off the last `h` mode-0 slices.
std::pair<SparseTensor, SparseTensor> split_mode0(const SparseTensor& t, Index h) {
  const Index keep = t.extent(0) - h;
  Shape train_shape = t.shape(), test_shape = t.shape();
  train_shape[0] = keep;
  test_shape[0] = h;
  std::vector<Entry> train, test;
  for (Index e = 0; e < t.nnz(); ++e) {
    auto idx = t.index(e);
    Entry entry{{idx.begin(), idx.end()}, t.value(e)};
    if (entry.index[0] < keep) {
      train.push_back(std::move(entry));
    } else {
      entry.index[0] -= keep;
      test.push_back(std::move(entry));
    }
  }
  return {SparseTensor(train_shape, std::move(train)), SparseTensor(test_shape, std::move(test))};
}

void write_factors(RunManifest& m, const fs::path& dir, const FactorSet& f,
                   const std::string& prefix = "factor_") {
  for (int n = 0; n < f.order(); ++n) {
    const std::string name = prefix + std::to_string(n) + ".txt";
    save_matrix(dir / name, f[n]);
    digest_output(m, dir, name);
  }
}

void run_factorize(RunManifest& m, const Json& c) {
  const fs::path out = get<std::string>(c, "out");
  const fs::path tensor_path = get<std::string>(c, "tensor");
  fs::create_directories(out);
  const SolverConfig config = phase(m, "config", [&] { return solver_from_json(c); });

  const SparseTensor full = phase(m, "load", [&] {
    digest_input(m, tensor_path);
    return load_tensor(tensor_path);
  });
  const Index holdout = get<Index>(c, "holdout");
  require(holdout >= 0 && holdout < full.extent(0),
          "holdout must leave at least one mode-0 slice for training");
  SparseTensor train = full, test;
  if (holdout > 0) std::tie(train, test) = split_mode0(full, holdout);

  std::vector<Matrix> costs = phase(m, "costs", [&] {
    std::vector<Matrix> cs;
    for (int n = 0; n < train.order(); ++n) {
      if (holdout > 0 && n == 0 && c.at("cost_files").contains("0") &&
          fs::exists(c.at("cost_files").at("0").get<std::string>())) {
        // slice the full mode-0 file into the train block
        const Matrix whole = resolve_cost(m, c, full, 0, "");
        cs.push_back(whole.topLeftCorner(train.extent(0), train.extent(0)));
        continue;
      }
      cs.push_back(resolve_cost(m, c, train, n, ""));
    }
    return cs;
  });
  const auto models = phase(m, "costs", [&] { return build_cost_models(costs, config.rho); });

  const FitResult result = phase(m, "fit", [&] { return fit(train, models, config); });

  phase(m, "write", [&] {
    write_factors(m, out, result.factors);
    for (int n = 0; n < train.order(); ++n) {
      const std::string name = "cost_" + std::to_string(n) + ".txt";
      save_matrix(out / name, costs[static_cast<std::size_t>(n)]);
      digest_output(m, out, name);
    }
    save_trace(out / "trace.csv", result.trace);
    digest_output(m, out, "trace.csv");
  });

  m.results["nnz_columns"] = result.trace.nnz_columns;
  m.results["floored_denominators"] = result.trace.floored_denominators;
  if (!result.trace.records.empty())
    m.results["final_objective"] = result.trace.records.back().objective.total;
  if (train.nnz() > 0) m.results["reconstruction_error"] = reconstruction_error(train, result.factors);

  if (holdout == 0) return;
  Matrix test_cost;
  phase(m, "costs", [&] {
    if (c.at("cost_files").contains("0") &&
        fs::exists(c.at("cost_files").at("0").get<std::string>())) {
      const Matrix whole = resolve_cost(m, c, full, 0, "holdout: ");
      test_cost = whole.bottomRightCorner(holdout, holdout);
    } else {
      test_cost = resolve_cost(m, c, test, 0, "holdout: ");
    }
  });
  std::vector<CostModel> test_models = models;
  test_models[0] = build_kernel(test_cost, config.rho, config.floor_k);
  const ProjectionResult proj =
      phase(m, "project", [&] { return project(test, result.factors, test_models, config); });
  phase(m, "write", [&] {
    save_matrix(out / "projected_factor_0.txt", proj.projected);
    digest_output(m, out, "projected_factor_0.txt");
    save_matrix(out / "projected_cost_0.txt", test_cost);
    digest_output(m, out, "projected_cost_0.txt");
  });
  if (test.nnz() > 0) m.results["holdout_error"] = reconstruction_error(test, proj.factors);
  else m.notes.push_back("holdout slab is all zero; no holdout error reported");
}

void run_project(RunManifest& m, const Json& c) {
  const fs::path out = get<std::string>(c, "out");
  const fs::path dir = get<std::string>(c, "factors");
  const fs::path tensor_path = get<std::string>(c, "tensor");
  fs::create_directories(out);
  const SolverConfig config = phase(m, "config", [&] { return solver_from_json(c); });

  const SparseTensor tensor = phase(m, "load", [&] {
    digest_input(m, tensor_path);
    return load_tensor(tensor_path);
  });
  FactorSet trained;
  std::vector<Matrix> costs;
  phase(m, "load", [&] {
    for (int n = 0; n < tensor.order(); ++n) {
      const fs::path fp = dir / ("factor_" + std::to_string(n) + ".txt");
      digest_input(m, fp);
      trained.factors.push_back(load_matrix(fp));
      if (n == 0) continue;
      const fs::path cp = dir / ("cost_" + std::to_string(n) + ".txt");
      digest_input(m, cp);
      costs.push_back(load_matrix(cp));
    }
  });
  phase(m, "costs", [&] { costs.insert(costs.begin(), resolve_cost(m, c, tensor, 0, "")); });
  const auto models = phase(m, "costs", [&] { return build_cost_models(costs, config.rho); });
  const ProjectionResult proj =
      phase(m, "project", [&] { return project(tensor, trained, models, config); });
  phase(m, "write", [&] {
    save_matrix(out / "factor_0.txt", proj.projected);
    digest_output(m, out, "factor_0.txt");
    save_matrix(out / "cost_0.txt", costs[0]);
    digest_output(m, out, "cost_0.txt");
    save_trace(out / "trace.csv", proj.trace);
    digest_output(m, out, "trace.csv");
  });
  if (tensor.nnz() > 0) m.results["reconstruction_error"] = reconstruction_error(tensor, proj.factors);
}

void run_noise(RunManifest& m, const Json& c) {
  const fs::path out = get<std::string>(c, "out");
  const fs::path tensor_path = get<std::string>(c, "tensor");
  const SparseTensor tensor = phase(m, "load", [&] {
    digest_input(m, tensor_path);
    return load_tensor(tensor_path);
  });
  const std::string model = get<std::string>(c, "model");
  const NoiseReport report = phase(m, "noise", [&] {
    const double p = get<double>(c, "p");
    const auto seed = get<std::uint64_t>(c, "seed");
    if (model == "bernoulli") return inject_noise_bernoulli(tensor, p, seed);
    if (model == "poisson") return inject_noise_poisson(tensor, p, seed);
    fail(ErrorKind::InvalidArgument, "unknown noise model '" + model + "'");
  });
  if (report.capped)
    m.notes.push_back("selection capped at " + std::to_string(report.selected) +
                      " zero cells (fewer zeros than nonzeros)");
  phase(m, "write", [&] {
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_tensor(out, report.tensor);
    digest_output(m, out.parent_path(), out.filename().string());
  });
  m.results["selected"] = report.selected;
  m.results["flipped"] = report.flipped;
  m.results["capped"] = report.capped;
}

void run_costmat(RunManifest& m, const Json& c) {
  const fs::path out = get<std::string>(c, "out");
  const fs::path tensor_path = get<std::string>(c, "tensor");
  const SparseTensor tensor = phase(m, "load", [&] {
    digest_input(m, tensor_path);
    return load_tensor(tensor_path);
  });
  const int mode = get<int>(c, "mode");
  require(mode >= 0 && mode < tensor.order(), "mode " + std::to_string(mode) + " out of range");
  const std::string kind = get<std::string>(c, "kind");
  const Matrix cost = phase(m, "costs", [&] {
    if (kind == "cosine") return build_cost_cosine(tensor, mode);
    if (kind == "identity") return build_cost_one_identity(tensor.extent(mode));
    if (kind == "random") return build_cost_random(tensor.extent(mode), get<std::uint64_t>(c, "seed"));
    fail(ErrorKind::InvalidArgument, "unknown cost kind '" + kind + "'");
  });
  phase(m, "write", [&] {
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_matrix(out, cost);
    digest_output(m, out.parent_path(), out.filename().string());
  });
}

}  // namespace

std::string code_version() { return SWIFT_VERSION; }

Json RunManifest::to_json() const {
  return {{"command", command}, {"config", config},   {"input_digests", input_digests},
          {"output_digests", output_digests},         {"timings", timings},
          {"notes", notes},     {"results", results}, {"version", version}};
}

RunManifest RunManifest::from_json(const Json& j) {
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.input_digests = j.value("input_digests", std::map<std::string, std::string>{});
    m.output_digests = j.value("output_digests", std::map<std::string, std::string>{});
    m.timings = j.value("timings", std::map<std::string, double>{});
    m.notes = j.value("notes", std::vector<std::string>{});
    m.results = j.value("results", Json::object());
    m.version = j.value("version", std::string{});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed manifest: ") + e.what());
  }
  return m;
}

void RunManifest::save(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

RunManifest RunManifest::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
  return from_json(j);
}

Json normalize_config(const std::string& command, Json config, const fs::path& base) {
  if (!config.is_object()) fail(ErrorKind::Format, "config must be a JSON object");
  config.erase("command");
  Json out = command_defaults(command);

  if (command == "project" && config.contains("factors")) {
    // inherit solver settings from the training run unless given explicitly
    const fs::path train_manifest =
        fs::path(absolute(config["factors"].get<std::string>(), base)) / "manifest.json";
    if (fs::exists(train_manifest)) {
      const Json trained = RunManifest::load(train_manifest).config;
      for (const auto& [key, value] : solver_defaults().items())
        if (trained.contains(key)) out[key] = trained[key];
    }
  }

  for (auto& [key, value] : config.items()) {
    if (!out.contains(key) && key != "tensor" && key != "out" && key != "factors")
      fail(ErrorKind::InvalidArgument, "unknown config key '" + key + "' for " + command);
    out[key] = value;
  }
  for (const auto& key : required_keys(command))
    if (!out.contains(key)) fail(ErrorKind::InvalidArgument, command + " needs '" + key + "'");
  for (const auto& key : path_keys(command))
    out[key] = absolute(out[key].get<std::string>(), base);
  if (out.contains("cost_files"))
    for (auto& [mode, path] : out["cost_files"].items())
      path = absolute(path.get<std::string>(), base);
  return out;
}

fs::path manifest_location(const std::string& command, const Json& config) {
  const fs::path out = config.at("out").get<std::string>();
  if (command == "factorize" || command == "project") return out / "manifest.json";
  return fs::path(out.string() + ".manifest.json");
}

RunManifest execute(const std::string& command, const Json& config) {
  RunManifest m;
  m.command = command;
  m.config = config;
  m.version = code_version();
  if (command == "factorize") run_factorize(m, config);
  else if (command == "project") run_project(m, config);
  else if (command == "noise") run_noise(m, config);
  else if (command == "costmat") run_costmat(m, config);
  else fail(ErrorKind::InvalidArgument, "unknown command '" + command + "'");
  m.save(manifest_location(command, config));
  return m;
}

RunManifest run_experiment(const fs::path& config_path) {
  std::ifstream in(config_path);
  if (!in) fail(ErrorKind::Io, "cannot open " + config_path.string());
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, config_path.string() + ": " + e.what());
  }
  if (j.contains("config") && j.contains("output_digests")) return rerun(config_path);
  const std::string command = j.value("command", std::string("factorize"));
  const fs::path base = fs::absolute(config_path).parent_path();
  return execute(command, normalize_config(command, std::move(j), base));
}

RunManifest rerun(const fs::path& manifest_path, const fs::path& out_dir,
                  std::optional<bool> parallel) {
  const RunManifest old = RunManifest::load(manifest_path);
  for (const auto& [path, digest] : old.input_digests)
    if (sha256_file(path) != digest)
      fail(ErrorKind::Io, "input " + path + " changed since the recorded run");
  Json config = old.config;
  if (!out_dir.empty()) {
    const fs::path target = fs::absolute(out_dir);
    if (old.command == "factorize" || old.command == "project") {
      config["out"] = target.string();
    } else {
      fs::create_directories(target);
      config["out"] = (target / fs::path(config["out"].get<std::string>()).filename()).string();
    }
  }
  if (parallel && config.contains("parallel")) config["parallel"] = *parallel;
  return execute(old.command, config);
}

std::vector<std::string> differing_outputs(const RunManifest& a, const RunManifest& b) {
  std::set<std::string> names;
  for (const auto& [k, v] : a.output_digests) names.insert(k);
  for (const auto& [k, v] : b.output_digests) names.insert(k);
  std::vector<std::string> diff;
  for (const auto& name : names) {
    auto ia = a.output_digests.find(name);
    auto ib = b.output_digests.find(name);
    if (ia == a.output_digests.end() || ib == b.output_digests.end() || ia->second != ib->second)
      diff.push_back(name);
  }
  return diff;
}

}  // namespace swift::harness
