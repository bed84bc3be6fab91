#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "palps/oracle.hpp"
#include "palps/palps.hpp"

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitModelError = 1;
constexpr int kExitPropertyViolated = 2;
constexpr int kExitInternalError = 3;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw palps::ModelError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ModelFlags {
  std::string path;
  bool open_channels = false;
};

palps::Model load_model(const ModelFlags& flags, bool close_channels) {
  palps::Model model = palps::parse_model(slurp(flags.path), flags.path);
  auto diags = palps::check_wellformed(model);
  if (palps::has_errors(diags)) {
    for (const auto& d : diags) std::cerr << d.str() << "\n";
    throw palps::ModelError("model '" + flags.path + "' is not well-formed");
  }
  for (const auto& d : diags) std::cerr << d.str() << "\n";
  if (close_channels && !flags.open_channels) palps::close_special_channels(model);
  return model;
}

std::string fmt_double(double d) {
  return palps::detail::format_double(d);
}

struct BoundFlags {
  std::optional<std::size_t> max_states;
  std::optional<std::size_t> max_depth;
  std::optional<std::uint32_t> max_pop;
  unsigned threads = 1;

  palps::ExploreOptions options() const {
    palps::ExploreOptions opts;
    opts.max_states = max_states;
    opts.max_depth = max_depth;
    opts.max_population_per_location = max_pop;
    opts.threads = threads;
    return opts;
  }
};

void add_bound_flags(CLI::App* cmd, BoundFlags& b) {
  cmd->add_option("--max-states", [&b](const std::vector<std::string>& v) {
        b.max_states = std::stoull(v[0]);
        return true;
      }, "stop expanding after this many states");
  cmd->add_option("--max-depth", [&b](const std::vector<std::string>& v) {
        b.max_depth = std::stoull(v[0]);
        return true;
      }, "stop expanding beyond this BFS depth");
  cmd->add_option("--max-pop", [&b](const std::vector<std::string>& v) {
        b.max_pop = static_cast<std::uint32_t>(std::stoul(v[0]));
        return true;
      }, "truncate states whose per-location population exceeds this");
  cmd->add_option("--threads", b.threads, "worker threads for exploration");
}

int cmd_parse(const ModelFlags& flags, bool as_json) {
  palps::Model model = palps::parse_model(slurp(flags.path), flags.path);
  auto diags = palps::check_wellformed(model);
  if (as_json) {
    json out = json::array();
    for (const auto& d : diags)
      out.push_back({{"severity", d.severity == palps::Severity::Error ? "error" : "warning"},
                     {"message", d.message},
                     {"file", d.span.file},
                     {"line", d.span.line},
                     {"column", d.span.column}});
    std::cout << out.dump(2) << "\n";
  } else {
    for (const auto& d : diags) std::cout << d.str() << "\n";
    if (diags.empty()) std::cout << flags.path << ": ok\n";
  }
  return diags.empty() ? kExitOk : kExitModelError;
}

int cmd_explore(const ModelFlags& flags, const BoundFlags& bounds, bool as_json) {
  palps::Model model = load_model(flags, true);
  auto [mdp, report] = palps::build(model, {}, bounds.options());
  if (as_json) {
    json out = {{"states", mdp.size()},
                {"states_explored", report.states_explored},
                {"transitions", report.transitions},
                {"deadlocks", report.deadlocks},
                {"truncated", report.truncated},
                {"truncation_reason", report.truncation_reason}};
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << "states:      " << mdp.size() << "\n"
              << "explored:    " << report.states_explored << "\n"
              << "transitions: " << report.transitions << "\n"
              << "deadlocks:   " << report.deadlocks << "\n"
              << "truncated:   " << (report.truncated ? "yes (" + report.truncation_reason + ")"
                                                      : std::string("no"))
              << "\n";
  }
  return kExitOk;
}

int cmd_check(const ModelFlags& flags, const std::string& props_path, const BoundFlags& bounds,
              const std::string& quantifier, bool as_json) {
  palps::Model model = load_model(flags, true);
  auto formulas = palps::parse_formula_file(slurp(props_path), model, props_path);
  if (formulas.empty()) throw palps::ModelError("no formulas in '" + props_path + "'");

  std::vector<palps::BoolPtr> atoms;
  for (const auto& f : formulas) palps::collect_atoms(f, atoms);
  auto [mdp, report] = palps::build(model, atoms, bounds.options());

  palps::CheckOptions copts;
  if (quantifier == "min") copts.force_max = false;
  if (quantifier == "max") copts.force_max = true;

  bool all_hold = true, any_approx = false;
  json jout = json::array();
  for (const auto& f : formulas) {
    palps::CheckResult r = palps::check(mdp, f, copts);
    all_hold = all_hold && r.holds;
    any_approx = any_approx || r.approximate;
    std::string verdict = r.approximate ? "approximate" : r.holds ? "holds" : "violated";
    double pmin_lo = 0, pmin_hi = 0, pmax_lo = 0, pmax_hi = 0;
    bool has_prob = !r.prob_results.empty();
    if (has_prob) {
      const auto& top = r.prob_results.back();
      pmin_lo = top.pmin_lo[mdp.initial];
      pmin_hi = top.pmin_hi[mdp.initial];
      pmax_lo = top.pmax_lo[mdp.initial];
      pmax_hi = top.pmax_hi[mdp.initial];
    }
    if (as_json) {
      json e = {{"formula", palps::pretty(model, f)},
                {"verdict", verdict},
                {"approximate", r.approximate}};
      if (has_prob) {
        e["pmin"] = pmin_lo;
        e["pmax"] = pmax_hi;
        if (r.approximate || pmin_lo != pmin_hi || pmax_lo != pmax_hi) {
          e["pmin_interval"] = {pmin_lo, pmin_hi};
          e["pmax_interval"] = {pmax_lo, pmax_hi};
        }
      }
      jout.push_back(e);
    } else {
      std::cout << palps::pretty(model, f) << "\n  verdict: " << verdict;
      if (has_prob) {
        std::cout << "  pmin=" << fmt_double(pmin_lo);
        if (pmin_hi != pmin_lo) std::cout << ".." << fmt_double(pmin_hi);
        std::cout << " pmax=" << fmt_double(pmax_lo);
        if (pmax_hi != pmax_lo) std::cout << ".." << fmt_double(pmax_hi);
      }
      std::cout << "\n";
    }
  }
  if (report.truncated && !as_json)
    std::cerr << "note: exploration truncated (" << report.truncation_reason
              << "); verdicts may be approximate\n";
  if (as_json) std::cout << jout.dump(2) << "\n";
  return (all_hold && !any_approx) ? kExitOk : kExitPropertyViolated;
}

int cmd_export(const ModelFlags& flags, const std::string& out_prefix,
               const std::string& props_path, const BoundFlags& bounds) {
  palps::Model model = load_model(flags, true);
  std::vector<palps::BoolPtr> atoms;
  if (!props_path.empty()) {
    auto formulas = palps::parse_formula_file(slurp(props_path), model, props_path);
    for (const auto& f : formulas) palps::collect_atoms(f, atoms);
  }
  auto [mdp, report] = palps::build(model, atoms, bounds.options());
  palps::export_explicit(mdp, out_prefix);
  std::cout << "wrote " << out_prefix << ".sta/.tra/.lab (" << mdp.size() << " states, "
            << report.transitions << " transitions"
            << (report.truncated ? ", truncated" : "") << ")\n";
  return kExitOk;
}

int cmd_simulate(const ModelFlags& flags, unsigned max_ticks, std::uint64_t seed,
                 std::size_t samples, const std::string& formula_text,
                 const std::string& props_path, const std::string& scheduler_name,
                 std::uint64_t sched_seed, unsigned until_cutoff, const std::string& trace_csv,
                 const std::string& trace_events, double confidence, unsigned threads,
                 bool as_json) {
  palps::Model model = load_model(flags, true);

  palps::Scheduler sched;
  if (scheduler_name == "first")
    sched.policy = palps::SchedulerPolicy::FirstEnabled;
  else if (scheduler_name == "seeded")
    sched.policy = palps::SchedulerPolicy::SeededRandom;
  else
    sched.policy = palps::SchedulerPolicy::UniformRandom;
  sched.seed = sched_seed;

  std::vector<palps::FormulaPtr> formulas;
  if (!formula_text.empty()) formulas.push_back(palps::parse_formula(formula_text, model));
  if (!props_path.empty()) {
    auto more = palps::parse_formula_file(slurp(props_path), model, props_path);
    formulas.insert(formulas.end(), more.begin(), more.end());
  }

  if (formulas.empty()) {
    palps::Trace trace = palps::run(model, sched, max_ticks, seed);
    std::ostream* csv = &std::cout;
    std::ofstream csv_file;
    if (!trace_csv.empty()) {
      csv_file.open(trace_csv, std::ios::binary);
      if (!csv_file) throw palps::ModelError("cannot write '" + trace_csv + "'");
      csv = &csv_file;
    }
    *csv << "tick,location,species,count\n";
    for (std::size_t t = 0; t < trace.census.size(); ++t)
      for (const auto& [key, n] : trace.census[t].entries())
        *csv << t << "," << model.habitat.locations[key.first] << ","
             << model.species[key.second].name << "," << n << "\n";
    if (!trace_events.empty()) {
      std::ofstream ev(trace_events, std::ios::binary);
      if (!ev) throw palps::ModelError("cannot write '" + trace_events + "'");
      for (const auto& e : trace.events) {
        json line = {{"label", e.label},
                     {"tick", e.tick},
                     {"ticks", e.tick_count},
                     {"digest", palps::detail::format_hash(e.digest)}};
        ev << line.dump() << "\n";
      }
    }
    std::string outcome = trace.outcome == palps::Trace::Outcome::MaxTicks ? "max-ticks"
                          : trace.outcome == palps::Trace::Outcome::Terminated ? "terminated"
                                                                               : "deadlock";
    std::cerr << "trace: " << trace.ticks << " ticks, " << trace.events.size() << " events, "
              << outcome << "\n";
    return kExitOk;
  }

  std::cerr << "note: sampling one scheduler policy estimates neither the scheduler minimum "
               "nor maximum of a nondeterministic model\n";
  json jout = json::array();
  for (const auto& f : formulas) {
    palps::PathSpec spec = palps::PathSpec::from_formula(f, until_cutoff);
    palps::Estimate est = palps::estimate(model, spec, samples, sched, seed, confidence, threads);
    if (as_json) {
      jout.push_back({{"formula", palps::pretty(model, f)},
                      {"estimate", est.point},
                      {"ci_low", est.lo},
                      {"ci_high", est.hi},
                      {"confidence", est.confidence},
                      {"samples", est.samples},
                      {"successes", est.successes}});
    } else {
      std::cout << palps::pretty(model, f) << "\n  estimate=" << fmt_double(est.point) << "  ci=["
                << fmt_double(est.lo) << ", " << fmt_double(est.hi) << "] @"
                << fmt_double(est.confidence * 100) << "%  n=" << est.samples << "\n";
    }
  }
  if (as_json) std::cout << jout.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PALPS: parse, explore, check and simulate located population models"};
  app.require_subcommand(1);

  std::string format = "text";
  app.add_option("--format", format, "output format: text or json")
      ->check(CLI::IsMember({"text", "json"}));

  ModelFlags parse_flags;
  auto* parse_cmd = app.add_subcommand("parse", "parse a model and report diagnostics");
  parse_cmd->add_option("model", parse_flags.path, "model file (.palps)")->required();

  ModelFlags explore_flags;
  BoundFlags explore_bounds;
  auto* explore_cmd = app.add_subcommand("explore", "build the reachable state space");
  explore_cmd->add_option("model", explore_flags.path, "model file (.palps)")->required();
  explore_cmd->add_flag("--open-channels", explore_flags.open_channels,
                        "do not restrict rep_*/prey_* at top level");
  add_bound_flags(explore_cmd, explore_bounds);

  ModelFlags check_flags;
  BoundFlags check_bounds;
  std::string check_props, check_quantifier = "default";
  auto* check_cmd = app.add_subcommand("check", "model-check PCTL properties");
  check_cmd->add_option("model", check_flags.path, "model file (.palps)")->required();
  check_cmd->add_option("props", check_props, "property file (.pctl)")->required();
  check_cmd->add_flag("--open-channels", check_flags.open_channels,
                      "do not restrict rep_*/prey_* at top level");
  check_cmd->add_option("--quantifier", check_quantifier,
                        "scheduler quantifier override: min or max")
      ->check(CLI::IsMember({"default", "min", "max"}));
  add_bound_flags(check_cmd, check_bounds);

  ModelFlags export_flags;
  BoundFlags export_bounds;
  std::string export_prefix, export_props;
  auto* export_cmd = app.add_subcommand("export", "write the explicit .sta/.tra/.lab files");
  export_cmd->add_option("model", export_flags.path, "model file (.palps)")->required();
  export_cmd->add_option("out", export_prefix, "output path prefix")->required();
  export_cmd->add_option("--props", export_props, "property file supplying the label atoms");
  export_cmd->add_flag("--open-channels", export_flags.open_channels,
                       "do not restrict rep_*/prey_* at top level");
  add_bound_flags(export_cmd, export_bounds);

  ModelFlags sim_flags;
  unsigned sim_max_ticks = 100, sim_cutoff = 0, sim_threads = 1;
  std::uint64_t sim_seed = 1, sim_sched_seed = 1;
  std::size_t sim_samples = 10000;
  double sim_confidence = 0.95;
  std::string sim_formula, sim_props, sim_scheduler = "uniform", sim_csv, sim_events;
  auto* sim_cmd = app.add_subcommand("simulate", "sample traces or estimate path probabilities");
  sim_cmd->add_option("model", sim_flags.path, "model file (.palps)")->required();
  sim_cmd->add_option("--max-ticks", sim_max_ticks, "stop a trace after this many ticks");
  sim_cmd->add_option("--seed", sim_seed, "root random seed");
  sim_cmd->add_option("--samples", sim_samples, "sample count for estimation");
  sim_cmd->add_option("--formula", sim_formula, "P operator whose path formula is estimated");
  sim_cmd->add_option("--props", sim_props, "property file to estimate");
  sim_cmd->add_option("--scheduler", sim_scheduler, "uniform, first, or seeded")
      ->check(CLI::IsMember({"uniform", "first", "seeded"}));
  sim_cmd->add_option("--sched-seed", sim_sched_seed, "seed for the seeded scheduler");
  sim_cmd->add_option("--until-cutoff", sim_cutoff, "tick cutoff for unbounded until");
  sim_cmd->add_option("--trace-csv", sim_csv, "write the per-tick census CSV here");
  sim_cmd->add_option("--trace-events", sim_events, "write the JSON-lines event log here");
  sim_cmd->add_option("--confidence", sim_confidence, "confidence level for the interval");
  sim_cmd->add_option("--threads", sim_threads, "worker threads for sampling");
  sim_cmd->add_flag("--open-channels", sim_flags.open_channels,
                    "do not restrict rep_*/prey_* at top level");

  CLI11_PARSE(app, argc, argv);
  bool as_json = format == "json";

  try {
    if (parse_cmd->parsed()) return cmd_parse(parse_flags, as_json);
    if (explore_cmd->parsed()) return cmd_explore(explore_flags, explore_bounds, as_json);
    if (check_cmd->parsed())
      return cmd_check(check_flags, check_props, check_bounds, check_quantifier, as_json);
    if (export_cmd->parsed())
      return cmd_export(export_flags, export_prefix, export_props, export_bounds);
    if (sim_cmd->parsed())
      return cmd_simulate(sim_flags, sim_max_ticks, sim_seed, sim_samples, sim_formula, sim_props,
                          sim_scheduler, sim_sched_seed, sim_cutoff, sim_csv, sim_events,
                          sim_confidence, sim_threads, as_json);
  } catch (const palps::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitModelError;
  } catch (const palps::InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternalError;
  } catch (const palps::ModelError& e) {
    std::cerr << e.what() << "\n";
    return kExitModelError;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitModelError;
  }
  return kExitOk;
}
