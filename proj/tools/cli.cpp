#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "essl/dynamics.hpp"
#include "essl/egt.hpp"
#include "essl/error.hpp"
#include "essl/metrics.hpp"
#include "essl/stability.hpp"
#include "essl/text_io.hpp"

namespace essl::cli {

namespace {

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

struct MetricsArgs {
  std::string input;
  std::string output;
  std::string params_out;
  std::string gen_method = "SimCLR+";
  std::string dis_method = "BT";
  std::string ens_method = "ESSL-Ensemble";
  std::vector<std::string> pairs;
  double w1 = 1.0;
  double w2 = 1.0;
};

std::string metrics_table_csv(const BenchmarkTable& table, WarningLog& warnings) {
  std::string out = "metric,method,reference,pretrain,eval,value\n";
  const auto row = [&out](std::string_view metric, std::string_view method,
                          std::string_view reference, std::string_view pretrain,
                          std::string_view eval, double value) {
    out.append(metric).append(",").append(method).append(",").append(reference).append(",");
    out.append(pretrain).append(",").append(eval).append(",");
    out += format_double(value);
    out += '\n';
  };
  for (const auto* records : {&table.ssl_accuracies, &table.ensemble_accuracies}) {
    for (const auto& r : *records) {
      const double sl = table.sl(r.eval);
      if (r.pretrain == r.eval) {
        row("D", r.method, "", r.pretrain, r.eval, discriminability(sl, r.accuracy, &warnings));
      } else {
        row("G", r.method, "", r.pretrain, r.eval, generalizability(sl, r.accuracy, &warnings));
      }
    }
  }
  for (const auto& ens : table.ensemble_accuracies) {
    row("N1", ens.method, "", ens.pretrain, ens.eval, table.sl(ens.eval) - ens.accuracy);
    for (const auto& r : table.ssl_accuracies) {
      if (r.pretrain == ens.pretrain && r.eval == ens.eval) {
        row("N2", r.method, ens.method, r.pretrain, r.eval, r.accuracy - ens.accuracy);
      }
    }
  }
  return out;
}

int run_metrics(const MetricsArgs& a, std::ostream& out, std::ostream& err) {
  const auto table = load_benchmark(a.input);
  if (!a.params_out.empty() && a.pairs.empty()) {
    throw ValidationError("--params-out needs at least one --pair");
  }
  WarningLog warnings;
  const auto metrics_csv = metrics_table_csv(table, warnings);

  // Everything is computed before anything is written.
  std::vector<PayoffTuple> tuples;
  for (const auto& pair : a.pairs) {
    auto parts = split(pair, ':');
    if (parts.size() != 2 || trim(parts[0]).empty() || trim(parts[1]).empty()) {
      throw ValidationError("--pair expects PRETRAIN:TRANSFER, got '" + pair + "'");
    }
    GamePairing g{a.gen_method, a.dis_method, a.ens_method, std::string(trim(parts[0])),
                  std::string(trim(parts[1]))};
    tuples.push_back(payoff_tuple(table, g, &warnings));
  }

  write_file(a.output, metrics_csv);
  out << "wrote metrics for " << table.ssl_accuracies.size() << " SSL and "
      << table.ensemble_accuracies.size() << " ensemble records to " << a.output << "\n";
  if (!tuples.empty()) {
    const auto params = payoff_from_tuples(tuples, a.w1, a.w2);
    if (!a.params_out.empty()) write_file(a.params_out, serialize_payoff(params));
    out << "payoff parameters averaged over " << tuples.size() << " dataset pair(s)";
    if (!a.params_out.empty()) out << " written to " << a.params_out;
    out << "\n" << serialize_payoff(params);
  }
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// saddle / equilibria
// ---------------------------------------------------------------------------

int run_saddle(const std::string& params_path, std::ostream& out, std::ostream& err) {
  const auto p = load_payoff(params_path);
  try {
    const auto s = saddle_point(p);
    out << "x* = " << fixed(s.x) << "\ny* = " << fixed(s.y) << "\n";
    out << "exact: " << format_double(s.x) << "," << format_double(s.y) << "\n";
    return kExitOk;
  } catch (const OutOfSimplexError& e) {
    err << "error: " << e.what() << "\n";
    err << "raw x* = " << format_double(e.x()) << ", raw y* = " << format_double(e.y()) << "\n";
    return kExitDegenerate;
  }
}

int run_equilibria(const std::string& params_path, const std::string& csv_out, std::ostream& out,
                   std::ostream& err) {
  const auto p = load_payoff(params_path);
  const auto eqs = classify_all(p);
  out << equilibria_table(eqs);
  if (eqs.size() == 4) {
    try {
      auto raw = saddle_point_unchecked(p);
      err << "note: interior point (" << format_double(raw.x) << ", " << format_double(raw.y)
          << ") lies outside the unit square\n";
    } catch (const DegenerateGameError& e) {
      err << "note: " << e.what() << "\n";
    }
  }
  if (!csv_out.empty()) write_file(csv_out, equilibria_csv(eqs));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string params;
  std::string starts_file;
  int starts = 0;
  std::string out;
  IntegratorConfig integrator;
  std::uint64_t seed = 7;
};

std::vector<PopulationState> read_starts(const std::string& path) {
  std::vector<PopulationState> starts;
  const auto text = read_file(path);
  std::size_t line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#' || line == "x,y") continue;
    auto f = split(line, ',');
    if (f.size() != 2) throw ParseError(line_no, "expected 'x,y'");
    PopulationState s;
    try {
      s = {parse_double(f[0]), parse_double(f[1])};
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
    if (!s.in_unit_square()) throw ParseError(line_no, "start outside the unit square");
    starts.push_back(s);
  }
  if (starts.empty()) throw ValidationError("starts file has no points");
  return starts;
}

int run_simulate(const SimulateArgs& a, std::ostream& out) {
  a.integrator.validate();
  const auto p = load_payoff(a.params);
  std::vector<PopulationState> starts;
  if (!a.starts_file.empty()) {
    starts = read_starts(a.starts_file);
  } else {
    if (a.starts < 1) throw ValidationError("--starts must be a positive count");
    std::mt19937_64 rng(a.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    while (starts.size() < static_cast<std::size_t>(a.starts)) {
      PopulationState s{u(rng), u(rng)};
      if (s.x > 0.0 && s.y > 0.0) starts.push_back(s);
    }
  }

  const auto trajectories = phase_portrait(p, starts, a.integrator);
  write_file(a.out, trajectories_csv(trajectories));

  std::map<std::pair<double, double>, int> basins;
  int unfinished = 0;
  for (const auto& t : trajectories) {
    if (t.converged()) {
      ++basins[{t.converged_to->x, t.converged_to->y}];
    } else {
      ++unfinished;
    }
  }
  out << "trajectories: " << trajectories.size() << "\n";
  for (const auto& [pt, n] : basins) {
    out << "converged to (" << format_double(pt.first) << ", " << format_double(pt.second)
        << "): " << n << "\n";
  }
  out << "max time reached: " << unfinished << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string out;
  std::string weights_out;
  std::string policy_out;
  std::optional<std::uint64_t> seed;
  std::optional<long long> steps;
};

int run_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : parse_train_config(read_file(a.config));
  if (a.seed) cfg.lab.seed = *a.seed;
  if (a.steps) cfg.lab.steps = *a.steps;
  cfg.lab.validate();
  cfg.scheduler.validate();

  const auto log = train_episode(cfg.lab, cfg.scheduler);
  write_file(a.out, training_log_csv(log));
  if (!a.weights_out.empty()) write_file(a.weights_out, weights_text(log.final_weights));
  if (!a.policy_out.empty()) write_file(a.policy_out, serialize_policy(log.final_policy));

  constexpr std::size_t kWindow = 1000;
  const auto [alpha, beta] = log.trailing_mean_weights(kWindow);
  out << "steps: " << log.records.size() << ", policy updates: " << log.policy_updates << "\n";
  out << "trailing mean (alpha, beta) over last "
      << std::min(kWindow, log.records.size()) << " steps: (" << fixed(alpha) << ", "
      << fixed(beta) << ")\n";
  out << "target: (" << format_double(cfg.scheduler.target.x) << ", "
      << format_double(cfg.scheduler.target.y) << ")\n";
  out << "cosine to target: " << fixed(log.trailing_cosine(kWindow, cfg.scheduler.target))
      << "\n";
  return kExitOk;
}

}  // namespace

TrainConfig parse_train_config(std::string_view text) {
  TrainConfig c;
  auto kv = parse_key_values(text);
  const std::map<std::string, double*, std::less<>> reals = {
      {"noise_scale", &c.lab.noise_scale},
      {"learning_rate", &c.lab.learning_rate},
      {"temperature", &c.lab.temperature},
      {"epsilon", &c.lab.epsilon},
      {"v", &c.scheduler.v},
      {"xi", &c.scheduler.xi},
      {"phi", &c.scheduler.phi},
      {"target_x", &c.scheduler.target.x},
      {"target_y", &c.scheduler.target.y},
      {"reward_cap", &c.scheduler.reward_cap},
      {"denom_floor", &c.scheduler.denom_floor},
      {"clip", &c.scheduler.clip},
      {"discount", &c.scheduler.discount},
      {"ppo_learning_rate", &c.scheduler.learning_rate},
      {"value_coef", &c.scheduler.value_coef},
      {"init_log_std", &c.scheduler.init_log_std},
  };
  const std::map<std::string, int*, std::less<>> ints = {
      {"input_dim", &c.lab.input_dim},
      {"feature_dim", &c.lab.feature_dim},
      {"batch_size", &c.lab.batch_size},
      {"update_period", &c.scheduler.update_period},
      {"minibatch_size", &c.scheduler.minibatch_size},
      {"hidden_width", &c.scheduler.hidden_width},
  };
  for (const auto& [key, value] : kv) {
    try {
      if (auto it = reals.find(key); it != reals.end()) {
        *it->second = parse_double(value);
      } else if (auto jt = ints.find(key); jt != ints.end()) {
        const auto v = parse_int(value);
        if (v < -(1LL << 30) || v > (1LL << 30)) throw ValidationError("out of range");
        *jt->second = static_cast<int>(v);
      } else if (key == "steps") {
        c.lab.steps = parse_int(value);
      } else if (key == "seed") {
        const auto v = parse_int(value);
        if (v < 0) throw ValidationError("seed must be nonnegative");
        c.lab.seed = static_cast<std::uint64_t>(v);
      } else {
        throw ValidationError("unknown key");
      }
    } catch (const ValidationError& e) {
      throw ValidationError("config key '" + key + "': " + e.what());
    }
  }
  c.lab.validate();
  c.scheduler.validate();
  return c;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evolutionary-game analysis of SSL loss balancing and an RL weight scheduler"};
  app.require_subcommand(1);
  app.allow_extras(false);

  std::uint64_t seed = 7;
  const auto add_seed = [&seed](CLI::App* sub) {
    sub->add_option("--seed", seed, "Random seed")->capture_default_str();
  };

  MetricsArgs margs;
  auto* metrics = app.add_subcommand("metrics", "Compute G/D/N1/N2 from a benchmark CSV");
  metrics->add_option("--input", margs.input, "Benchmark CSV (method,pretrain,eval,accuracy)")
      ->required();
  metrics->add_option("--output", margs.output, "Metrics table CSV")->required();
  metrics->add_option("--params-out", margs.params_out, "Also write averaged payoff parameters");
  metrics->add_option("--pair", margs.pairs, "PRETRAIN:TRANSFER dataset pair (repeatable)");
  metrics->add_option("--gen", margs.gen_method, "Generalizability model")->capture_default_str();
  metrics->add_option("--dis", margs.dis_method, "Discriminability model")->capture_default_str();
  metrics->add_option("--ens", margs.ens_method, "Ensemble model")->capture_default_str();
  metrics->add_option("--w1", margs.w1, "Generalizability preference weight")->capture_default_str();
  metrics->add_option("--w2", margs.w2, "Discriminability preference weight")->capture_default_str();
  add_seed(metrics);

  std::string params_path;
  auto* saddle = app.add_subcommand("saddle", "Print the interior equilibrium (x*, y*)");
  saddle->add_option("--params", params_path, "Payoff parameter file")->required();
  add_seed(saddle);

  std::string eq_csv;
  auto* equilibria = app.add_subcommand("equilibria", "Classify every equilibrium");
  equilibria->add_option("--params", params_path, "Payoff parameter file")->required();
  equilibria->add_option("--csv", eq_csv, "Also write x,y,det,trace,class CSV");
  add_seed(equilibria);

  SimulateArgs sargs;
  auto* simulate = app.add_subcommand("simulate", "Integrate replicator trajectories");
  simulate->add_option("--params", sargs.params, "Payoff parameter file")->required();
  auto* starts_count =
      simulate->add_option("--starts", sargs.starts, "Number of seeded random interior starts");
  auto* starts_file = simulate->add_option("--starts-file", sargs.starts_file, "CSV of x,y starts");
  starts_count->excludes(starts_file);
  simulate->add_option("--out", sargs.out, "Trajectory CSV")->required();
  simulate->add_option("--dt", sargs.integrator.dt, "Time step")->capture_default_str();
  simulate->add_option("--t-max", sargs.integrator.t_max, "Horizon")->capture_default_str();
  simulate->add_option("--stop-tol", sargs.integrator.stop_tol, "Convergence radius")
      ->capture_default_str();
  add_seed(simulate);

  TrainArgs targs;
  long long steps_override = 0;
  auto* train = app.add_subcommand("train", "Run the scheduler-driven training loop");
  train->add_option("--config", targs.config, "key = value training config");
  train->add_option("--out", targs.out, "Per-step CSV log")->required();
  train->add_option("--weights-out", targs.weights_out, "Final encoder weights");
  train->add_option("--policy-out", targs.policy_out, "Final policy checkpoint");
  auto* steps_opt = train->add_option("--steps", steps_override, "Override the step count");
  auto* seed_opt = train->add_option("--seed", seed, "Random seed (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::Error& e) {
    app.exit(e, out, err);
    return kExitInvalid;
  }

  try {
    if (metrics->parsed()) return run_metrics(margs, out, err);
    if (saddle->parsed()) return run_saddle(params_path, out, err);
    if (equilibria->parsed()) return run_equilibria(params_path, eq_csv, out, err);
    if (simulate->parsed()) {
      if (starts_count->count() == 0 && starts_file->count() == 0) {
        throw ValidationError("simulate needs --starts or --starts-file");
      }
      sargs.seed = seed;
      return run_simulate(sargs, out);
    }
    if (train->parsed()) {
      if (seed_opt->count() > 0) targs.seed = seed;
      if (steps_opt->count() > 0) targs.steps = steps_override;
      return run_train(targs, out);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInvalid;
}

}  // namespace essl::cli
