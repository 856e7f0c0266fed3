#pragma once

// Command-line front end. `lsw::cli::main` is the whole program; the tools/
// executable only forwards argv so tests can drive it in-process.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lsw/core.hpp"
#include "lsw/io.hpp"
#include "lsw/methods.hpp"
#include "lsw/models.hpp"
#include "lsw/pipeline.hpp"
#include "lsw/samplers.hpp"

namespace lsw::cli {

namespace fs = std::filesystem;

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_data = 2;

namespace detail {

/// Reads `key = value` lines; `#` starts a comment. Keys may carry a
/// leading "--".
inline std::vector<std::pair<std::string, std::string>> read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path.string() + "'");
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = io::detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = io::detail::trim(std::string_view(body).substr(0, eq));
    std::string value = io::detail::trim(std::string_view(body).substr(eq + 1));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (key.empty())
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": empty key");
    entries.emplace_back(std::move(key), std::move(value));
  }
  return entries;
}

/// Replaces `--config FILE` by the file's entries as flags. Flags given on
/// the command line win over the file.
inline std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config requires a file argument");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      kept.push_back(args[i]);
    }
  }
  if (!path) return kept;
  auto given = [&](const std::string& key) {
    for (const auto& a : kept)
      if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0) return true;
    return false;
  };
  for (const auto& [key, value] : read_config(*path)) {
    if (given(key)) continue;
    kept.push_back("--" + key);
    kept.push_back(value);
  }
  return kept;
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw DataError("cannot create output directory '" + dir.string() + "'");
}

inline void write_text(const fs::path& path, const std::string& text) {
  io::write_bytes(path, text);
}

inline std::size_t inferred_K(std::optional<std::size_t> flag, const io::FloatArray* mcmc,
                              const io::FloatArray* p, const io::IntArray* z) {
  if (flag) return *flag;
  if (mcmc && mcmc->ndim() == 3) return mcmc->dims[1];
  if (p && p->ndim() == 3) return p->dims[2];
  if (z) {
    std::int64_t hi = 0;
    for (auto v : z->values) hi = std::max(hi, v);
    return static_cast<std::size_t>(std::max<std::int64_t>(hi, 1));
  }
  throw UsageError("cannot determine K: supply --K, --mcmc, --p or --z");
}

inline std::string input_flag(std::string_view input) {
  if (input == "complete") return "--model";
  if (input == "userPerm") return "--user-perm";
  return "--" + std::string(input);
}

// Optional path-valued inputs shared by several subcommands.
struct ChainPaths {
  std::string mcmc, z, p, data;
};

struct LoadedChains {
  std::optional<ParameterChain> mcmc;
  std::optional<AllocationChain> z;
  std::optional<ClassificationChain> p;
  std::optional<Dataset> x;
  std::size_t K = 0;

  RunInputs view() const {
    return {mcmc ? &*mcmc : nullptr, z ? &*z : nullptr, p ? &*p : nullptr, x ? &*x : nullptr};
  }
};

inline LoadedChains load_chains(const ChainPaths& paths, std::optional<std::size_t> K_flag) {
  std::optional<io::FloatArray> mcmc, p;
  std::optional<io::IntArray> z;
  if (!paths.mcmc.empty()) mcmc = io::read_float_array(paths.mcmc);
  if (!paths.p.empty()) p = io::read_float_array(paths.p);
  if (!paths.z.empty()) z = io::read_int_array(paths.z);
  LoadedChains out;
  const bool any = mcmc || p || z;
  out.K = any ? inferred_K(K_flag, mcmc ? &*mcmc : nullptr, p ? &*p : nullptr, z ? &*z : nullptr)
              : K_flag.value_or(0);
  if (mcmc) out.mcmc = io::to_parameter_chain(*mcmc);
  if (p) out.p = io::to_classification_chain(*p);
  if (z) out.z = io::to_allocation_chain(*z, out.K);
  if (!paths.data.empty()) out.x = io::to_dataset(io::read_float_array(paths.data));
  return out;
}

inline void add_chain_options(CLI::App* app, ChainPaths& paths) {
  app->add_option("--mcmc", paths.mcmc, "Parameter chain, m x K x J float array");
  app->add_option("--z", paths.z, "Allocations, m x n integer array (1-based)");
  app->add_option("--p", paths.p, "Classification probabilities, m x n x K float array");
  app->add_option("--data", paths.data, "Observations, n or n x d float array");
}

inline std::unique_ptr<Model> model_from_flag(const std::string& name) {
  if (name.empty()) return nullptr;
  return make_model(parse_model_kind(name));
}

inline void write_chain_files(const fs::path& dir, const FixtureChain& c) {
  io::write_array(io::from_chain(c.mcmc), dir / "mcmc.lsa");
  io::write_array(io::from_labels(c.z.array()), dir / "z.lsa");
  io::write_array(io::from_chain(c.p), dir / "p.lsa");
}

inline void write_pivots(const fs::path& dir, const ParameterChain& mcmc, const AllocationChain& z,
                         std::size_t index) {
  io::write_array(io::from_labels(z.draw(index)), dir / "zpivot.lsa");
  io::write_array(io::from_matrix(mcmc.draw(index)), dir / "prapivot.lsa");
}

// ---- relabel ---------------------------------------------------------------

struct RelabelOptions {
  std::vector<std::string> methods;
  ChainPaths chains;
  std::string zpivot, prapivot, ground_truth, model, out_dir;
  std::string constraint = "1";
  std::optional<std::size_t> K;
  std::optional<std::size_t> sjw_init;
  double thr_ecr = 1e-6, thr_ste = 1e-6, thr_sjw = 1e-6;
  std::size_t max_ecr = 100, max_ste = 100, max_sjw = 100;
  std::vector<std::string> user_perms;
  unsigned threads = 1;
  std::uint64_t seed = 0;
};

inline void setup_relabel(CLI::App& app, RelabelOptions& o) {
  auto* s = app.add_subcommand("relabel", "Run relabelling methods on an MCMC output");
  s->add_option("--method", o.methods,
                "Methods: STEPHENS PRA ECR ECR-ITERATIVE-1 ECR-ITERATIVE-2 SJW AIC DATA-BASED "
                "USER-PERM (repeatable or comma separated)")
      ->required()
      ->delimiter(',');
  add_chain_options(s, o.chains);
  s->add_option("--zpivot", o.zpivot, "ECR pivot(s), n or r x n integer array (1-based)");
  s->add_option("--prapivot", o.prapivot, "PRA pivot, K x J float array");
  s->add_option("--constraint", o.constraint, "AIC parameter column (1-based) or ALL");
  s->add_option("--ground-truth", o.ground_truth, "True allocations, n integer array (1-based)");
  s->add_option("--model", o.model, "Model family: normal, bivariate-normal or poisson-hmm");
  s->add_option("--K", o.K, "Number of components (default: inferred from the inputs)");
  s->add_option("--sjw-init", o.sjw_init, "SJW starting draw (1-based; default complete MAP)");
  s->add_option("--thr-ecr", o.thr_ecr, "Iterative ECR threshold")->capture_default_str();
  s->add_option("--thr-ste", o.thr_ste, "STEPHENS threshold")->capture_default_str();
  s->add_option("--thr-sjw", o.thr_sjw, "SJW threshold")->capture_default_str();
  s->add_option("--max-ecr", o.max_ecr, "Iterative ECR iteration cap")->capture_default_str();
  s->add_option("--max-ste", o.max_ste, "STEPHENS iteration cap")->capture_default_str();
  s->add_option("--max-sjw", o.max_sjw, "SJW iteration cap")->capture_default_str();
  s->add_option("--user-perm", o.user_perms, "User permutation set(s), m x K integer array")
      ->delimiter(',');
  s->add_option("--out-dir", o.out_dir, "Output directory")->required();
  s->add_option("--threads", o.threads, "Worker threads")->capture_default_str()
      ->check(CLI::PositiveNumber);
  s->add_option("--seed", o.seed, "Recorded in the run summary")->capture_default_str();
}

inline std::string relabel_summary(const RelabelOptions& o, const RelabelResult& r,
                                   const LoadedChains& in) {
  std::ostringstream s;
  const std::size_t m = r.runs.empty() ? 0 : r.runs.front().output.permutations.m();
  std::size_t n = 0;
  if (in.z) n = in.z->n();
  else if (in.p) n = in.p->n();
  s << "K = " << r.K << "\n";
  s << "m = " << m << "\n";
  s << "n = " << n << "\n";
  s << "seed = " << o.seed << "\n";
  s << "reference = " << r.reference << "\n";
  s << "labels =";
  for (const auto& l : r.labels) s << ' ' << l;
  s << "\n";
  for (const auto& run : r.runs) {
    const auto& out = run.output;
    s << "[" << run.name << "]\n";
    s << "iterations = " << out.iterations_used << "\n";
    s << "converged = " << (out.converged ? "true" : "false") << "\n";
    if (!out.objective_trace.empty()) {
      s << "objective =";
      for (double v : out.objective_trace) s << ' ' << io::format_double(v);
      s << "\n";
    }
  }
  if (!r.similarity.empty()) {
    s << "[similarity]\n";
    for (std::size_t a = 0; a < r.similarity.rows(); ++a) {
      s << r.labels[a];
      for (std::size_t b = 0; b < r.similarity.cols(); ++b)
        s << ' ' << io::format_double(r.similarity(a, b));
      s << "\n";
    }
  }
  return s.str();
}

inline int run_relabel(const RelabelOptions& o, std::ostream& out) {
  RunConfig cfg;
  for (const auto& m : o.methods) cfg.methods.push_back(parse_method(m));
  if (o.constraint == "ALL" || o.constraint == "all") {
    cfg.constraint.all = true;
  } else {
    const auto j = io::detail::parse_number<std::int64_t>(o.constraint, "--constraint");
    if (j < 1) throw UsageError("--constraint must be a 1-based column index or ALL");
    cfg.constraint.index = static_cast<std::size_t>(j - 1);
  }
  cfg.ecr_options = {o.thr_ecr, o.max_ecr, o.threads};
  cfg.stephens_options = {o.thr_ste, o.max_ste, o.threads};
  cfg.sjw_options = {o.thr_sjw, o.max_sjw, o.threads};
  if (o.sjw_init) {
    if (*o.sjw_init < 1) throw UsageError("--sjw-init is 1-based");
    cfg.sjw_init = *o.sjw_init - 1;
  }
  cfg.threads = o.threads;
  const auto model = model_from_flag(o.model);
  cfg.model = model.get();

  const LoadedChains in = load_chains(o.chains, o.K);
  if (in.K > 0) cfg.K = in.K;
  if (!o.zpivot.empty()) {
    const Array2<int> piv = io::to_labels(io::read_int_array(o.zpivot), "zpivot");
    for (std::size_t r = 0; r < piv.rows(); ++r)
      cfg.zpivots.emplace_back(piv.row(r).begin(), piv.row(r).end());
  }
  if (!o.prapivot.empty())
    cfg.prapivot = io::to_matrix(io::read_float_array(o.prapivot), "prapivot");
  if (!o.ground_truth.empty())
    cfg.ground_truth = io::to_label_vector(io::read_int_array(o.ground_truth), "ground-truth");
  for (const auto& path : o.user_perms)
    cfg.user_perms.push_back(io::to_permutations(io::read_int_array(path), path));

  RelabelResult result;
  try {
    result = run(cfg, in.view());
  } catch (const MissingInput& e) {
    throw UsageError(std::string(e.what()) + " (flag " + input_flag(e.input()) + ")");
  }

  const fs::path dir(o.out_dir);
  ensure_dir(dir);
  std::ostringstream timings;
  for (const auto& r : result.runs) {
    io::write_array(io::from_permutations(r.output.permutations),
                    dir / ("permutations_" + r.name + ".lsa"));
    timings << r.name << ' ' << io::format_double(r.seconds) << "\n";
  }
  if (!result.similarity.empty()) {
    Array2<int> clusters(result.labels.size(), result.runs.front().clusters.size());
    for (std::size_t a = 0; a < result.runs.size(); ++a)
      std::copy(result.runs[a].clusters.begin(), result.runs[a].clusters.end(),
                clusters.row(a).begin());
    if (cfg.ground_truth)
      std::copy(cfg.ground_truth->begin(), cfg.ground_truth->end(),
                clusters.row(result.runs.size()).begin());
    io::write_array(io::from_labels(clusters), dir / "clusters.lsa");
    io::write_array(io::from_matrix(result.similarity), dir / "similarity.lsa");
  }
  write_text(dir / "timings.txt", timings.str());
  const std::string summary = relabel_summary(o, result, in);
  write_text(dir / "summary.txt", summary);
  out << summary;
  return exit_ok;
}

// ---- permute ---------------------------------------------------------------

struct PermuteOptions {
  ChainPaths chains;
  std::string perm, model, out_dir;
};

inline void setup_permute(CLI::App& app, PermuteOptions& o) {
  auto* s = app.add_subcommand("permute", "Apply a permutation set to chain arrays");
  s->add_option("--perm", o.perm, "Permutation set, m x K integer array (1-based)")->required();
  s->add_option("--mcmc", o.chains.mcmc, "Parameter chain to reorder");
  s->add_option("--z", o.chains.z, "Allocation chain to relabel");
  s->add_option("--p", o.chains.p, "Classification chain to reorder");
  s->add_option("--model", o.model, "Model family (needed for poisson-hmm chains)");
  s->add_option("--out-dir", o.out_dir, "Output directory")->required();
}

inline int run_permute(const PermuteOptions& o, std::ostream& out) {
  if (o.chains.mcmc.empty() && o.chains.z.empty() && o.chains.p.empty())
    throw UsageError("permute: supply at least one of --mcmc, --z, --p");
  const PermutationSet perms = io::to_permutations(io::read_int_array(o.perm), "perm");
  const auto model = model_from_flag(o.model);
  const LoadedChains in = load_chains(o.chains, perms.K());
  const fs::path dir(o.out_dir);
  ensure_dir(dir);
  auto check_m = [&](std::size_t m, const char* what) {
    if (m != perms.m())
      throw DataError(std::string(what) + " has " + std::to_string(m) + " draws, permutation set " +
                      std::to_string(perms.m()));
  };
  if (in.mcmc) {
    check_m(in.mcmc->m(), "mcmc");
    const ParameterChain moved =
        model ? permute_mcmc(*in.mcmc, perms, *model) : permute_mcmc(*in.mcmc, perms);
    io::write_array(io::from_chain(moved), dir / "mcmc.lsa");
  }
  if (in.z) {
    check_m(in.z->m(), "z");
    io::write_array(io::from_labels(relabelled_allocations(*in.z, perms)), dir / "z.lsa");
  }
  if (in.p) {
    check_m(in.p->m(), "p");
    Array3<double> moved(in.p->m(), in.p->n(), in.p->K());
    for (std::size_t t = 0; t < in.p->m(); ++t) {
      const Matrix pt = apply_to_classification(in.p->draw(t), perms[t]);
      std::copy(pt.values().begin(), pt.values().end(), moved.slice(t).begin());
    }
    io::write_array(io::from_chain(ClassificationChain(std::move(moved))), dir / "p.lsa");
  }
  out << "permuted " << perms.m() << " draws\n";
  return exit_ok;
}

// ---- simulate --------------------------------------------------------------

struct SimulateOptions {
  std::string preset, truth, model, out_dir;
  std::optional<std::size_t> n, K, iterations, burn;
  std::uint64_t seed = 1;
};

inline void setup_simulate(CLI::App& app, SimulateOptions& o) {
  auto* s = app.add_subcommand("simulate", "Simulate data and a fixture MCMC chain");
  std::string names;
  for (const auto& p : preset_names()) names += (names.empty() ? "" : ", ") + p;
  s->add_option("--preset", o.preset, "Fixture preset: " + names);
  s->add_option("--truth", o.truth, "True parameters, K x J float array (instead of a preset)");
  s->add_option("--model", o.model, "Model family for --truth");
  s->add_option("--n", o.n, "Number of observations");
  s->add_option("--K", o.K, "Number of fitted components");
  s->add_option("--iterations", o.iterations, "Gibbs iterations including burn-in");
  s->add_option("--burn", o.burn, "Burn-in iterations");
  s->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  s->add_option("--out-dir", o.out_dir, "Output directory")->required();
}

inline int run_simulate(const SimulateOptions& o, std::ostream& out) {
  FixturePreset recipe;
  if (!o.preset.empty()) {
    if (!o.truth.empty()) throw UsageError("simulate: --preset and --truth are exclusive");
    recipe = preset(o.preset);
  } else {
    if (o.truth.empty() || o.model.empty() || !o.n)
      throw UsageError("simulate: supply --preset, or --truth with --model and --n");
    const Matrix th = io::to_matrix(io::read_float_array(o.truth), "truth");
    recipe = {"custom", {parse_model_kind(o.model), th, *o.n}, th.rows(), 2000, 1000};
  }
  if (o.n) recipe.truth.n = *o.n;
  if (o.K) recipe.K = *o.K;
  if (o.iterations) recipe.iterations = *o.iterations;
  if (o.burn) recipe.burn = *o.burn;

  const FixtureChain c = make_fixture(recipe, o.seed);
  const fs::path dir(o.out_dir);
  ensure_dir(dir);
  write_chain_files(dir, c);
  io::write_array(io::from_dataset(c.x), dir / "data.lsa");
  io::write_array(io::from_labels(std::span<const int>(*c.z_true)), dir / "ztrue.lsa");
  write_pivots(dir, c.mcmc, c.z, c.map_index);
  std::ostringstream s;
  s << "preset = " << recipe.name << "\n"
    << "model = " << make_model(recipe.truth.kind)->name() << "\n"
    << "seed = " << o.seed << "\n"
    << "n = " << c.x.n() << "\n"
    << "K = " << c.mcmc.K() << "\n"
    << "m = " << c.mcmc.m() << "\n"
    << "map_index = " << c.map_index + 1 << "\n";
  write_text(dir / "summary.txt", s.str());
  out << s.str();
  return exit_ok;
}

// ---- inject ----------------------------------------------------------------

struct InjectOptions {
  ChainPaths chains;
  std::string model = "normal", out_dir;
  std::uint64_t seed = 1;
};

inline void setup_inject(CLI::App& app, InjectOptions& o) {
  auto* s = app.add_subcommand("inject", "Apply uniformly random per-draw relabellings");
  s->add_option("--mcmc", o.chains.mcmc, "Parameter chain")->required();
  s->add_option("--z", o.chains.z, "Allocation chain")->required();
  s->add_option("--p", o.chains.p, "Classification chain")->required();
  s->add_option("--model", o.model, "Model family")->capture_default_str();
  s->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  s->add_option("--out-dir", o.out_dir, "Output directory")->required();
}

inline int run_inject(const InjectOptions& o, std::ostream& out) {
  const auto model = make_model(parse_model_kind(o.model));
  LoadedChains in = load_chains(o.chains, std::nullopt);
  if (in.z->m() != in.mcmc->m() || in.p->m() != in.mcmc->m() || in.z->n() != in.p->n() ||
      in.p->K() != in.mcmc->K())
    throw DataError("inject: mcmc, z and p dimensions disagree");
  FixtureChain chain{std::move(*in.mcmc), std::move(*in.z), std::move(*in.p), 0, Dataset{},
                     std::nullopt, o.seed};
  const Injection inj = inject_label_switching(chain, *model, o.seed);
  const fs::path dir(o.out_dir);
  ensure_dir(dir);
  write_chain_files(dir, inj.chain);
  io::write_array(io::from_permutations(inj.applied), dir / "applied.lsa");
  out << "injected " << inj.applied.m() << " permutations\n";
  return exit_ok;
}

// ---- map-pivot -------------------------------------------------------------

struct MapPivotOptions {
  ChainPaths chains;
  std::string model, out_dir;
  unsigned threads = 1;
};

inline void setup_map_pivot(CLI::App& app, MapPivotOptions& o) {
  auto* s = app.add_subcommand("map-pivot", "Find the complete-MAP draw");
  s->add_option("--mcmc", o.chains.mcmc, "Parameter chain")->required();
  s->add_option("--z", o.chains.z, "Allocation chain")->required();
  s->add_option("--data", o.chains.data, "Observations")->required();
  s->add_option("--model", o.model, "Model family")->required();
  s->add_option("--out-dir", o.out_dir, "Write zpivot.lsa and prapivot.lsa here");
  s->add_option("--threads", o.threads, "Worker threads")->capture_default_str()
      ->check(CLI::PositiveNumber);
}

inline int run_map_pivot(const MapPivotOptions& o, std::ostream& out) {
  const auto model = make_model(parse_model_kind(o.model));
  const LoadedChains in = load_chains(o.chains, std::nullopt);
  const std::size_t index = select_map_pivot(*model, *in.mcmc, *in.z, *in.x, o.threads);
  if (!o.out_dir.empty()) {
    ensure_dir(o.out_dir);
    write_pivots(o.out_dir, *in.mcmc, *in.z, index);
  }
  out << index + 1 << "\n";
  return exit_ok;
}

}  // namespace detail

inline int main(const std::vector<std::string>& argv, std::ostream& out = std::cout,
                std::ostream& err = std::cerr) {
  CLI::App app{"Relabelling algorithms for label switching in MCMC output", "lsw"};
  app.require_subcommand(1);
  detail::RelabelOptions relabel;
  detail::PermuteOptions permute;
  detail::SimulateOptions simulate;
  detail::InjectOptions inject;
  detail::MapPivotOptions map_pivot;
  detail::setup_relabel(app, relabel);
  detail::setup_permute(app, permute);
  detail::setup_simulate(app, simulate);
  detail::setup_inject(app, inject);
  detail::setup_map_pivot(app, map_pivot);

  try {
    std::vector<std::string> args = detail::expand_config(
        std::vector<std::string>(argv.begin() + (argv.empty() ? 0 : 1), argv.end()));
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(args);
    if (app.got_subcommand("relabel")) return detail::run_relabel(relabel, out);
    if (app.got_subcommand("permute")) return detail::run_permute(permute, out);
    if (app.got_subcommand("simulate")) return detail::run_simulate(simulate, out);
    if (app.got_subcommand("inject")) return detail::run_inject(inject, out);
    if (app.got_subcommand("map-pivot")) return detail::run_map_pivot(map_pivot, out);
    return exit_usage;
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? exit_ok : exit_usage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return exit_usage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return exit_data;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_data;
  }
}

inline int main(int argc, const char* const* argv) {
  return main(std::vector<std::string>(argv, argv + argc));
}

}  // namespace lsw::cli
