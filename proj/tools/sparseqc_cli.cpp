#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "sparseqc/errors.hpp"
#include "sparseqc/experiments.hpp"
#include "sparseqc/io.hpp"

using namespace sparseqc;

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<double> theta;
  std::optional<int> restarts;
  std::optional<int> max_iters;
  std::string alphas;
  std::string scale = "full";
  std::string measure;
  std::string export_dir;
  int jobs = 1;
  int directions = 20;
};

ScenarioConfig resolve_config(const Flags& f) {
  ScenarioConfig cfg;
  if (std::filesystem::exists(f.config)) {
    cfg = load_config(f.config);
  } else {
    // A bare reference-scenario name is accepted as well.
    try {
      cfg = reference_config(f.config);
    } catch (const ConfigError&) {
      throw ConfigError("--config: no such file or reference scenario '" + f.config + "'");
    }
  }
  if (f.scale == "reduced" && !cfg.reduced) cfg = reduce(cfg);
  if (f.out) cfg.output_dir = *f.out;
  if (f.seed) cfg.optimizer.seed = *f.seed;
  if (f.alpha) cfg.alpha = *f.alpha;
  if (f.theta) cfg.theta = *f.theta;
  if (f.restarts) cfg.restarts = *f.restarts;
  if (f.max_iters) cfg.optimizer.max_iters = *f.max_iters;
  cfg.validate();
  return cfg;
}

void print_outcome(const ScenarioConfig& cfg, const ScenarioOutcome& o) {
  const RunResult& r = o.run;
  std::printf("scenario        %s\n", cfg.name.c_str());
  std::printf("objective       %.10g\n", r.breakdown.total);
  std::printf("terminal_term   %.6e\n", r.breakdown.terminal_term);
  std::printf("cost_term       %.6e\n", r.breakdown.cost_term);
  std::printf("support_size    %zu (theta %.3g)\n", r.support_size, cfg.theta);
  if (o.metrics.max_atom < 100.0 * cfg.theta)
    std::fprintf(stderr, "warning: theta %.3g is less than two decades below the largest atom %.3g\n", cfg.theta,
                 o.metrics.max_atom);
  std::printf("max_dual/alpha  %.6f\n", cfg.alpha > 0 ? r.report.max_dual / cfg.alpha : 0.0);
  std::printf("band_mass       %.4f\n", o.metrics.band_mass);
  std::printf("low_freq_frac   %.4f\n", o.metrics.low_frequency_fraction);
  std::printf("termination     %s after %d iterations, %d evaluations, %.1f s (seed %llu)\n",
              to_string(r.termination).c_str(), r.log.empty() ? 0 : r.log.back().iter, r.evaluations,
              r.wall_seconds, static_cast<unsigned long long>(r.seed));
  std::printf("largest atoms   ");
  for (const auto& a : o.metrics.largest_atoms) {
    if (cfg.kind == SynthesisKind::gabor_tf)
      std::printf("(%.5g@%.4g: %.3e) ", a[0], a[1], a[2]);
    else
      std::printf("(%.5g: %.3e) ", a[0], a[2]);
  }
  std::printf("\n");
  for (const auto& p : o.files) std::printf("wrote %s\n", p.string().c_str());
}

int cmd_run(const Flags& f) {
  const ScenarioConfig cfg = resolve_config(f);
  const ScenarioOutcome o = run_scenario(cfg, f.jobs, true);
  print_outcome(cfg, o);
  return 0;
}

int cmd_sweep(const Flags& f) {
  const ScenarioConfig cfg = resolve_config(f);
  const std::vector<double> alphas = io::parse_double_list(f.alphas);
  if (alphas.empty()) throw ConfigError("--alphas: need at least one value");
  const auto stages = run_sweep(cfg, alphas, true);
  std::printf("%-12s %-14s %-8s %-12s %s\n", "alpha", "terminal_term", "support", "measure_norm", "start");
  for (const auto& s : stages)
    std::printf("%-12.4g %-14.6e %-8zu %-12.6g %s\n", s.alpha, s.result.breakdown.terminal_term,
                s.result.support_size, s.result.report.measure_norm, s.warm_started ? "warm" : "random");
  std::printf("wrote %s\n", (std::filesystem::path(cfg.output_dir) / "sweep.csv").string().c_str());
  return 0;
}

int cmd_grad_check(const Flags& f) {
  const bool reduced = f.scale != "full";
  const auto entries = gradient_check_matrix(f.directions, f.seed.value_or(0), reduced);
  double worst = 0.0;
  std::printf("%-12s %-14s %-14s %s\n", "model", "kind", "max_rel_error", "seconds");
  for (const auto& e : entries) {
    std::printf("%-12s %-14s %-14.3e %.1f\n", e.model.c_str(), to_string(e.kind).c_str(), e.max_rel_error, e.seconds);
    worst = std::max(worst, e.max_rel_error);
  }
  std::printf("max relative error %.3e (%s)\n", worst, worst <= 1e-5 ? "ok" : "FAILED");
  return worst <= 1e-5 ? 0 : 2;
}

int cmd_report(const Flags& f) {
  const ScenarioConfig cfg = resolve_config(f);
  const Problem problem = build_problem(cfg);
  ControlMeasure u = read_measure_csv(f.measure);
  if (!(u.grid == problem.op->grid()))
    throw ConfigError("--measure: frequency grid does not match the config");
  u.check(problem.space());
  const OptimalityReport r = optimality_report(problem, u);
  const ObjectiveBreakdown b = evaluate(problem, u).breakdown;
  std::printf("objective          %.10g\n", b.total);
  std::printf("terminal_term      %.6e\n", b.terminal_term);
  std::printf("support_size       %zu\n", r.support.size());
  std::printf("max_dual/alpha     %.6f  (%s)\n", cfg.alpha > 0 ? r.max_dual / cfg.alpha : 0.0,
              r.dual_bound_ok() ? "ok" : "violated");
  std::printf("max_alignment      %.3e  (%s)\n", r.max_alignment, r.alignment_ok() ? "ok" : "violated");
  std::printf("support_violations %zu\n", r.support_violations.size());
  std::printf("complementarity    %.3e  (%s)\n", r.complementarity_gap, r.complementarity_ok() ? "ok" : "violated");
  if (f.out) {
    const auto path = std::filesystem::path(*f.out) / "optimality.json";
    write_optimality_json(path, r);
    std::printf("wrote %s\n", path.string().c_str());
  }
  return 0;
}

int cmd_list(const Flags& f) {
  std::printf("%-28s %-12s %-14s %-16s %s\n", "name", "model", "kind", "space", "real_dof");
  for (const auto& c : reference_configs()) {
    std::printf("%-28s %-12s %-14s %-16s %lld\n", c.name.c_str(), to_string(c.model).c_str(),
                to_string(c.kind).c_str(), to_string(c.space).c_str(), static_cast<long long>(real_dof(c)));
    if (!f.export_dir.empty()) save_config(std::filesystem::path(f.export_dir) / (c.name + ".json"), c);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  io::tune_allocator();
  CLI::App app{"Sparse time-frequency optimal control of quantum systems"};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", f.config, "Scenario JSON file or reference scenario name");
    if (needs_config) c->required();
    sub->add_option("--out", f.out, "Output directory (overrides output_dir)");
    sub->add_option("--seed", f.seed, "Base seed");
    sub->add_option("--alpha", f.alpha, "Override cost.alpha");
    sub->add_option("--theta", f.theta, "Override cost.theta");
    sub->add_option("--scale", f.scale, "full or reduced")->check(CLI::IsMember({"full", "reduced"}));
    sub->add_option("--restarts", f.restarts, "Override optimizer.restarts")->check(CLI::PositiveNumber);
    sub->add_option("--max-iters", f.max_iters, "Override optimizer.max_iters")->check(CLI::PositiveNumber);
    sub->add_option("--jobs", f.jobs, "Concurrent restarts")->check(CLI::PositiveNumber);
  };

  CLI::App* run = app.add_subcommand("run", "Optimize one scenario and write its artifacts");
  add_common(run, true);
  CLI::App* sweep = app.add_subcommand("sweep", "Alpha continuation sweep");
  add_common(sweep, true);
  sweep->add_option("--alphas", f.alphas, "Ascending comma-separated alphas")->required();
  CLI::App* grad = app.add_subcommand("grad-check", "Adjoint gradient against finite differences");
  grad->add_option("--scale", f.scale, "full or reduced")->check(CLI::IsMember({"full", "reduced"}));
  grad->add_option("--seed", f.seed, "Seed for points and directions");
  grad->add_option("--directions", f.directions, "Random directions per pair")->check(CLI::PositiveNumber);
  CLI::App* report = app.add_subcommand("report", "Optimality report for a saved measure");
  add_common(report, true);
  report->add_option("--measure", f.measure, "measure.csv written by run")->required();
  CLI::App* list = app.add_subcommand("list-scenarios", "Reference scenarios");
  list->add_option("--export", f.export_dir, "Also write each scenario as DIR/<name>.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }
  if (!grad->parsed()) f.scale = f.scale.empty() ? "full" : f.scale;
  else if (grad->count("--scale") == 0) f.scale = "reduced";

  try {
    if (run->parsed()) return cmd_run(f);
    if (sweep->parsed()) return cmd_sweep(f);
    if (grad->parsed()) return cmd_grad_check(f);
    if (report->parsed()) return cmd_report(f);
    if (list->parsed()) return cmd_list(f);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
