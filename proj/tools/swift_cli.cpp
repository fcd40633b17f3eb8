#include "swift/error.hpp"
#include "swift/harness/bench.hpp"
#include "swift/harness/costs.hpp"
#include "swift/harness/experiment.hpp"
#include "swift/harness/io.hpp"
#include "swift/metrics.hpp"
#include "swift/solver.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace swift;
using harness::Json;

namespace {

enum Exit { kOk = 0, kInternal = 1, kUsage = 2, kInvalid = 3, kFormat = 4, kNumerical = 5, kIo = 6 };

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return kInvalid;
    case ErrorKind::Format: return kFormat;
    case ErrorKind::Numerical: return kNumerical;
    case ErrorKind::Io: return kIo;
  }
  return kInternal;
}

const char* kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Numerical: return "numerical error";
    case ErrorKind::Io: return "io error";
  }
  return "error";
}

void apply_thread_env() {
  if (const char* env = std::getenv("SWIFT_NUM_THREADS")) {
    const int n = std::atoi(env);
    if (n <= 0) fail(ErrorKind::InvalidArgument, "SWIFT_NUM_THREADS must be a positive integer");
    omp_set_num_threads(n);
  }
}

bool on_off(const std::string& s) {
  if (s == "on") return true;
  if (s == "off") return false;
  fail(ErrorKind::InvalidArgument, "expected on|off, got '" + s + "'");
}

/// "1=path" pairs into {"1": "path"}.
Json cost_file_map(const std::vector<std::string>& pairs) {
  Json files = Json::object();
  for (const auto& p : pairs) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0)
      fail(ErrorKind::InvalidArgument, "--cost-file expects MODE=PATH, got '" + p + "'");
    const std::string mode = p.substr(0, eq);
    if (mode.find_first_not_of("0123456789") != std::string::npos)
      fail(ErrorKind::InvalidArgument, "--cost-file mode must be an integer, got '" + mode + "'");
    files[std::to_string(std::stoi(mode))] = p.substr(eq + 1);
  }
  return files;
}

std::vector<Index> parse_list(const std::string& s) {
  std::vector<Index> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoll(item));
    } catch (const std::exception&) {
      fail(ErrorKind::InvalidArgument, "bad integer '" + item + "' in '" + s + "'");
    }
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      fail(ErrorKind::InvalidArgument, "bad number '" + item + "' in '" + s + "'");
    }
  }
  return out;
}

/// Solver flags shared by factorize, project and compare-direct. Values left
/// unset fall through to the config defaults.
struct SolverFlags {
  std::optional<Index> rank;
  std::optional<double> rho, lambda;
  std::optional<int> outer, sinkhorn;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> parallel, denominator;

  void attach(CLI::App* app) {
    app->add_option("--rank", rank, "CP rank");
    app->add_option("--rho", rho, "entropic regularization");
    app->add_option("--lambda", lambda, "marginal relaxation weight");
    app->add_option("--outer", outer, "outer iterations");
    app->add_option("--sinkhorn", sinkhorn, "Sinkhorn rounds per outer iteration");
    app->add_option("--seed", seed, "factor initialization seed");
    app->add_option("--parallel", parallel, "on|off")->check(CLI::IsMember({"on", "off"}));
    app->add_option("--denominator", denominator, "stacked|paper")
        ->check(CLI::IsMember({"stacked", "paper"}));
  }

  void write(Json& j) const {
    if (rank) j["rank"] = *rank;
    if (rho) j["rho"] = *rho;
    if (lambda) j["lambda"] = *lambda;
    if (outer) j["outer_iters"] = *outer;
    if (sinkhorn) j["sinkhorn_iters"] = *sinkhorn;
    if (seed) j["seed"] = *seed;
    if (parallel) j["parallel"] = on_off(*parallel);
    if (denominator) j["denominator"] = *denominator;
  }
};

SolverConfig solver_config(const Json& j) {
  SolverConfig c;
  c.rank = j.value("rank", c.rank);
  c.rho = j.value("rho", c.rho);
  c.lambda = j.value("lambda", c.lambda);
  c.outer_iters = j.value("outer_iters", c.outer_iters);
  c.sinkhorn_iters = j.value("sinkhorn_iters", c.sinkhorn_iters);
  c.seed = j.value("seed", c.seed);
  c.parallel = j.value("parallel", c.parallel);
  c.denominator = parse_denominator(j.value("denominator", std::string("stacked")));
  c.validate();
  return c;
}

void print_manifest(const harness::RunManifest& m) {
  std::cout << "wrote " << m.output_digests.size() << " file(s) to "
            << m.config.at("out").get<std::string>() << '\n';
  for (const auto& note : m.notes) std::cout << "note: " << note << '\n';
  if (!m.results.empty()) std::cout << m.results.dump(2) << '\n';
}

Matrix eval_cost(const std::string& kind, const SparseTensor& a, int n, const Json& files,
                 std::uint64_t seed) {
  const std::string key = std::to_string(n);
  if (files.contains(key)) return harness::load_matrix(files[key].get<std::string>());
  if (kind == "cosine") return harness::metric_closure(harness::build_cost_cosine(a, n));
  if (kind == "identity") return harness::build_cost_one_identity(a.extent(n));
  if (kind == "random") return harness::build_cost_random(a.extent(n), seed + static_cast<std::uint64_t>(n));
  fail(ErrorKind::InvalidArgument, "no cost for mode " + key + " (cost mode '" + kind + "')");
}

double max_relative_difference(const FactorSet& a, const FactorSet& b) {
  double worst = 0.0;
  for (int n = 0; n < a.order(); ++n) {
    const double scale = std::max(a[n].cwiseAbs().maxCoeff(), 1e-300);
    worst = std::max(worst, (a[n] - b[n]).cwiseAbs().maxCoeff() / scale);
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein CP factorization of sparse nonnegative tensors"};
  app.set_version_flag("--version", harness::code_version());
  app.require_subcommand(1);

  // factorize
  auto* factorize = app.add_subcommand("factorize", "fit nonnegative CP factors");
  std::string f_tensor, f_out, f_cost_mode;
  std::vector<std::string> f_cost_files;
  std::optional<std::uint64_t> f_cost_seed;
  std::optional<Index> f_holdout;
  SolverFlags f_flags;
  factorize->add_option("--tensor", f_tensor, "COO tensor file")->required();
  factorize->add_option("--out", f_out, "output directory")->required();
  factorize->add_option("--cost-mode", f_cost_mode, "cosine|identity|random|files")
      ->check(CLI::IsMember({"cosine", "identity", "random", "files"}));
  factorize->add_option("--cost-file", f_cost_files, "MODE=PATH, repeatable");
  factorize->add_option("--cost-seed", f_cost_seed, "seed for random costs");
  factorize->add_option("--holdout", f_holdout, "trailing mode-0 slices projected instead of fit");
  f_flags.attach(factorize);

  // project
  auto* project = app.add_subcommand("project", "learn mode-0 factors for new data");
  std::string p_tensor, p_factors, p_out, p_cost_mode;
  std::vector<std::string> p_cost_files;
  SolverFlags p_flags;
  project->add_option("--tensor", p_tensor, "new COO tensor")->required();
  project->add_option("--factors", p_factors, "directory of a factorize run")->required();
  project->add_option("--out", p_out, "output directory")->required();
  project->add_option("--cost-mode", p_cost_mode, "cosine|identity|random|files")
      ->check(CLI::IsMember({"cosine", "identity", "random", "files"}));
  project->add_option("--cost-file", p_cost_files, "MODE=PATH for mode 0");
  p_flags.attach(project);

  // eval
  auto* eval = app.add_subcommand("eval", "tensor Wasserstein distance");
  std::string e_a, e_b, e_mode = "exact", e_cost_mode = "cosine";
  std::vector<std::string> e_cost_files;
  double e_rho = 50.0;
  int e_sinkhorn = 5000;
  std::uint64_t e_cost_seed = 0;
  bool e_normalize = false;
  eval->add_option("--a", e_a, "first tensor")->required();
  eval->add_option("--b", e_b, "second tensor")->required();
  eval->add_option("--mode", e_mode, "exact|entropic")->check(CLI::IsMember({"exact", "entropic"}));
  eval->add_option("--cost-mode", e_cost_mode, "cosine (from --a, metric closed)|identity|random")
      ->check(CLI::IsMember({"cosine", "identity", "random", "files"}));
  eval->add_option("--cost-file", e_cost_files, "MODE=PATH, repeatable");
  eval->add_option("--cost-seed", e_cost_seed, "seed for random costs");
  eval->add_option("--rho", e_rho, "regularization for entropic mode");
  eval->add_option("--sinkhorn", e_sinkhorn, "Sinkhorn rounds for entropic mode");
  eval->add_flag("--normalize", e_normalize, "scale columns to unit sum first");

  // noise
  auto* noise = app.add_subcommand("noise", "inject zero-cell noise");
  std::string n_tensor, n_out, n_model = "bernoulli";
  double n_p = 0.0;
  std::uint64_t n_seed = 0;
  noise->add_option("--tensor", n_tensor, "input tensor")->required();
  noise->add_option("--model", n_model, "bernoulli|poisson")
      ->check(CLI::IsMember({"bernoulli", "poisson"}));
  noise->add_option("--p", n_p, "flip probability")->required();
  noise->add_option("--seed", n_seed, "selection seed");
  noise->add_option("--out", n_out, "output tensor file")->required();

  // costmat
  auto* costmat = app.add_subcommand("costmat", "build a cost matrix");
  std::string c_tensor, c_out, c_kind = "cosine";
  int c_mode = 0;
  std::uint64_t c_seed = 0;
  costmat->add_option("--tensor", c_tensor, "tensor supplying the mode extent")->required();
  costmat->add_option("--mode", c_mode, "mode index")->required();
  costmat->add_option("--kind", c_kind, "cosine|identity|random")
      ->check(CLI::IsMember({"cosine", "identity", "random"}));
  costmat->add_option("--seed", c_seed, "seed for random costs");
  costmat->add_option("--out", c_out, "output matrix file")->required();

  // compare-direct
  auto* compare = app.add_subcommand("compare-direct", "fit vs the materialized-Kronecker solver");
  std::string d_tensor, d_cost_mode = "cosine";
  SolverFlags d_flags;
  compare->add_option("--tensor", d_tensor, "third-order tensor")->required();
  compare->add_option("--cost-mode", d_cost_mode, "cosine|identity|random")
      ->check(CLI::IsMember({"cosine", "identity", "random"}));
  d_flags.attach(compare);

  // bench
  auto* bench = app.add_subcommand("bench", "zero-column dropping and parallel sweep timings");
  std::string b_shape = "30,30,30", b_grid = "0.1,0.5,1.0";
  SolverFlags b_flags;
  int b_repeats = 5;
  std::uint64_t b_seed = 0;
  bench->add_option("--shape", b_shape, "I,J,K");
  bench->add_option("--density-grid", b_grid, "column densities, comma separated");
  bench->add_option("--repeats", b_repeats, "median over this many sweeps");
  bench->add_option("--data-seed", b_seed, "tensor seed");
  b_flags.attach(bench);

  // run / rerun
  auto* run = app.add_subcommand("run", "execute a JSON experiment config");
  std::string r_config;
  run->add_option("config", r_config, "config or manifest file")->required();
  auto* rerun = app.add_subcommand("rerun", "re-execute a manifest");
  std::string rr_manifest, rr_out;
  std::optional<std::string> rr_parallel;
  rerun->add_option("manifest", rr_manifest, "manifest.json")->required();
  rerun->add_option("--out", rr_out, "write here instead of the recorded location");
  rerun->add_option("--parallel", rr_parallel, "on|off")->check(CLI::IsMember({"on", "off"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    apply_thread_env();

    if (*factorize) {
      Json j = {{"tensor", f_tensor}, {"out", f_out}};
      f_flags.write(j);
      if (!f_cost_mode.empty()) j["cost_mode"] = f_cost_mode;
      if (!f_cost_files.empty()) j["cost_files"] = cost_file_map(f_cost_files);
      if (f_cost_seed) j["cost_seed"] = *f_cost_seed;
      if (f_holdout) j["holdout"] = *f_holdout;
      print_manifest(harness::execute("factorize", harness::normalize_config("factorize", j)));
    } else if (*project) {
      Json j = {{"tensor", p_tensor}, {"factors", p_factors}, {"out", p_out}};
      p_flags.write(j);
      if (!p_cost_mode.empty()) j["cost_mode"] = p_cost_mode;
      if (!p_cost_files.empty()) j["cost_files"] = cost_file_map(p_cost_files);
      print_manifest(harness::execute("project", harness::normalize_config("project", j)));
    } else if (*eval) {
      const SparseTensor a = harness::load_tensor(e_a), b = harness::load_tensor(e_b);
      const Json files = cost_file_map(e_cost_files);
      std::vector<Matrix> costs;
      for (int n = 0; n < a.order(); ++n) costs.push_back(eval_cost(e_cost_mode, a, n, files, e_cost_seed));
      const auto models = build_cost_models(costs, e_rho);
      DistanceOptions options;
      options.mode = parse_ot_mode(e_mode);
      options.normalize_columns = e_normalize;
      options.sinkhorn_iters = e_sinkhorn;
      const auto report = wasserstein_tensor(a, b, models, options);
      Json out = {{"mode", e_mode},
                  {"normalized", report.normalized},
                  {"per_mode", report.per_mode},
                  {"total", report.total}};
      std::cout << out.dump(2) << '\n';
    } else if (*noise) {
      Json j = {{"tensor", n_tensor}, {"out", n_out}, {"model", n_model}, {"p", n_p}, {"seed", n_seed}};
      print_manifest(harness::execute("noise", harness::normalize_config("noise", j)));
    } else if (*costmat) {
      Json j = {{"tensor", c_tensor}, {"out", c_out}, {"mode", c_mode}, {"kind", c_kind}, {"seed", c_seed}};
      print_manifest(harness::execute("costmat", harness::normalize_config("costmat", j)));
    } else if (*compare) {
      const SparseTensor x = harness::load_tensor(d_tensor);
      Json j = Json::object();
      d_flags.write(j);
      SolverConfig config = solver_config(j);
      std::vector<Matrix> costs;
      for (int n = 0; n < x.order(); ++n) costs.push_back(eval_cost(d_cost_mode, x, n, Json::object(), 0));
      const auto models = build_cost_models(costs, config.rho, config.floor_k);
      config.drop_zero_columns = false;
      const auto ours = fit(x, models, config);
      const auto direct = fit_direct(x, models, config);
      std::cout << "max relative factor discrepancy: "
                << harness::format_double(max_relative_difference(ours.factors, direct.factors))
                << '\n';
    } else if (*bench) {
      Json j = Json::object();
      b_flags.write(j);
      const SolverConfig config = solver_config(j);
      harness::SparsityBenchOptions options;
      options.repeats = b_repeats;
      options.seed = b_seed;
      const auto rows = harness::benchmark_sparsity(parse_list(b_shape), parse_doubles(b_grid),
                                                    config, options);
      std::cout << "target_density,column_density,nnz,drop_s,keep_all_s,serial_s,"
                   "drop_speedup,parallel_speedup,max_factor_difference\n";
      for (const auto& r : rows) {
        double mean_density = 0.0;
        for (double d : r.column_density) mean_density += d / static_cast<double>(r.column_density.size());
        std::cout << r.target_density << ',' << mean_density << ',' << r.nnz << ',' << r.drop_seconds
                  << ',' << r.keep_all_seconds << ',' << r.serial_seconds << ',' << r.drop_speedup
                  << ',' << r.parallel_speedup << ',' << r.max_factor_difference << '\n';
      }
      std::cout << "threads: " << omp_get_max_threads() << '\n';
    } else if (*run) {
      print_manifest(harness::run_experiment(r_config));
    } else if (*rerun) {
      std::optional<bool> parallel;
      if (rr_parallel) parallel = on_off(*rr_parallel);
      const auto old = harness::RunManifest::load(rr_manifest);
      const auto m = harness::rerun(rr_manifest, rr_out, parallel);
      print_manifest(m);
      const auto diff = harness::differing_outputs(old, m);
      if (!diff.empty()) {
        for (const auto& name : diff) std::cerr << "differs: " << name << '\n';
        fail(ErrorKind::Numerical, std::to_string(diff.size()) + " output(s) differ from the recorded run");
      }
      std::cout << "all outputs identical to the recorded run\n";
    }
  } catch (const Error& e) {
    std::cerr << "swift: " << kind_name(e.kind()) << ": " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "swift: internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}
