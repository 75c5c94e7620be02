// hitl: environment generation, exploration, planning with human feedback,
// offline planning, the query-efficiency experiments and the label service.

#include <csignal>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <pthread.h>

#include <CLI11.hpp>

#include "hitl/active_reward.hpp"
#include "hitl/dataset.hpp"
#include "hitl/env.hpp"
#include "hitl/errors.hpp"
#include "hitl/experiment.hpp"
#include "hitl/label_service.hpp"
#include "hitl/offline.hpp"
#include "hitl/online.hpp"
#include "hitl/oracle.hpp"

using namespace hitl;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitOracle = 4;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::parse_error& e) {
    throw DataError(path + " is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Turns a JSON config object into "--key value" tokens, skipping keys the
// user passed explicitly so that flags win.
std::vector<std::string> config_tokens(const json& config, const std::vector<std::string>& user) {
  auto given = [&](const std::string& key) {
    const std::string flag = "--" + key;
    for (const auto& a : user) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  auto scalar = [](const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  };
  std::vector<std::string> out;
  if (!config.is_object()) throw DataError("config file must hold a JSON object");
  for (const auto& [key, value] : config.items()) {
    if (key == "config" || given(key)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) out.push_back("--" + key);
    } else if (value.is_array()) {
      out.push_back("--" + key);
      for (const auto& v : value) out.push_back(scalar(v));
    } else {
      out.push_back("--" + key);
      out.push_back(scalar(value));
    }
  }
  return out;
}

std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::optional<std::string> path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path || args.size() < 2) return args;
  const auto tokens = config_tokens(read_json_file(*path), args);
  std::vector<std::string> out{args[0], args[1]};
  out.insert(out.end(), tokens.begin(), tokens.end());
  out.insert(out.end(), args.begin() + 2, args.end());
  return out;
}

struct BonusFlags {
  double c = 1.0;
  std::optional<double> beta_lin;
  std::optional<double> beta_tbl;
  std::optional<double> beta_offline;
  std::optional<double> c_explore;

  void add(CLI::App* app, double default_c) {
    c = default_c;
    app->add_option("--bonus-c", c, "Scale C in the theory bonus formulas")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--beta-lin", beta_lin, "Override beta_lin")->check(CLI::PositiveNumber);
    app->add_option("--beta-tbl", beta_tbl, "Override beta_tbl")->check(CLI::PositiveNumber);
    app->add_option("--beta-offline", beta_offline, "Override beta'_tbl")
        ->check(CLI::PositiveNumber);
    app->add_option("--c-explore", c_explore, "Override the exploration constant")
        ->check(CLI::PositiveNumber);
  }

  BonusConfig resolve(const BonusScale& scale) const {
    BonusConfig b = theory_bonus_config(scale, c);
    if (beta_lin) b.beta_lin = *beta_lin;
    if (beta_tbl) b.beta_tbl = *beta_tbl;
    if (beta_offline) b.beta_tbl_offline = *beta_offline;
    if (c_explore) b.c_explore = *c_explore;
    return b;
  }
};

BonusScale scale_for(const EnvBundle& env, std::size_t episodes, double delta, double margin) {
  BonusScale s;
  s.num_states = env.mdp.num_states();
  s.num_actions = env.mdp.max_actions();
  s.horizon = env.mdp.horizon();
  s.episodes = episodes;
  s.delta = delta;
  s.margin = margin;
  s.dim = env.features.dim();
  s.dim_f = std::max<double>(2.0, static_cast<double>(env.features.dim()));
  return s;
}

struct OracleFlags {
  std::string kind = "simulated";
  std::uint64_t seed = 0;
  std::string transcript;
  std::string record;
  std::string host = "127.0.0.1";
  int port = 8080;
  double poll = 2.0;
  double timeout = 86400.0;
  std::string resume;

  void add(CLI::App* app) {
    app->add_option("--oracle", kind, "Label source")
        ->check(CLI::IsMember({"simulated", "scripted", "remote"}))
        ->capture_default_str();
    app->add_option("--oracle-seed", seed, "Seed of the simulated oracle")->capture_default_str();
    app->add_option("--transcript", transcript, "Transcript replayed by the scripted oracle");
    app->add_option("--record", record, "Append every answered query to this JSONL file");
    app->add_option("--host", host, "Label service host")->capture_default_str();
    app->add_option("--port", port, "Label service port")->capture_default_str();
    app->add_option("--poll-interval", poll, "Seconds between status polls")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--timeout", timeout, "Seconds to wait for a label session")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app->add_option("--resume-session", resume, "Attach the first batch to this session id");
  }
};

// Owns the oracle chain (base plus optional recorder).
struct OracleStack {
  std::unique_ptr<FeedbackOracle> base;
  std::unique_ptr<std::ofstream> record_file;
  std::unique_ptr<RecordingOracle> recorder;

  FeedbackOracle& top() { return recorder ? *recorder : *base; }
};

OracleStack make_oracle(const OracleFlags& f, const EnvBundle& env, int levels) {
  OracleStack st;
  if (f.kind == "simulated") {
    st.base = std::make_unique<SimulatedOracle>(env.model, levels, f.seed);
  } else if (f.kind == "scripted") {
    if (f.transcript.empty()) throw DataError("--oracle scripted needs --transcript");
    st.base = std::make_unique<ScriptedOracle>(read_transcript(f.transcript), levels);
  } else {
    RemoteOracleConfig rc;
    rc.host = f.host;
    rc.port = f.port;
    rc.poll_interval = std::chrono::milliseconds(static_cast<long long>(f.poll * 1000.0));
    rc.timeout = std::chrono::milliseconds(static_cast<long long>(f.timeout * 1000.0));
    if (!f.resume.empty()) rc.resume_session = f.resume;
    st.base = std::make_unique<RemoteOracle>(rc, levels);
  }
  if (!f.record.empty()) {
    st.record_file = std::make_unique<std::ofstream>(f.record, std::ios::app);
    if (!*st.record_file) throw DataError("cannot write transcript " + f.record);
    st.recorder = std::make_unique<RecordingOracle>(*st.base, *st.record_file);
  }
  return st;
}

struct RewardFlags {
  double c1 = 1.0;
  double c2 = 1.0;
  std::optional<std::size_t> budget;
  std::string selection = "active";
  std::string rounding = "cover";
  std::string kind;

  void add(CLI::App* app) {
    app->add_option("--c1", c1, "Query budget constant")->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--c2", c2, "Confidence radius constant")->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--budget", budget, "Fixed queries per stage instead of the formula")
        ->check(CLI::PositiveNumber);
    app->add_option("--selection", selection, "Query selection")
        ->check(CLI::IsMember({"active", "passive"}))
        ->capture_default_str();
    app->add_option("--rounding", rounding, "Model rounding")
        ->check(CLI::IsMember({"cover", "identity"}))
        ->capture_default_str();
    app->add_option("--model", kind, "Response model kind (default: the environment's)")
        ->check(CLI::IsMember({"linear", "logistic"}));
  }

  RewardLearningConfig resolve(const EnvBundle& env, std::uint64_t seed) const {
    RewardLearningConfig rc;
    rc.kind = kind.empty() ? env.model.kind : model_kind_from_string(kind);
    rc.levels = env.mdp.levels();
    rc.c1 = c1;
    rc.c2 = c2;
    rc.budget = budget;
    rc.selection = selection_mode_from_string(selection);
    rc.rounding = rounding == "cover" ? Rounding::cover : Rounding::identity;
    rc.seed = seed;
    return rc;
  }
};

json learning_metrics(const std::vector<RewardLearning>& stages) {
  json out = json::array();
  for (const auto& s : stages) {
    out.push_back({{"budget", s.budget}, {"beta", s.beta}, {"queries", s.selected.size()}});
  }
  return out;
}

int cmd_gen_env(const EnvConfig& config, std::uint64_t seed, const std::string& out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto env = gen_env(config, seed);
  write_json_file(out_path, json(env));
  std::cout << json{{"out", out_path},
                    {"states", env.mdp.num_states()},
                    {"horizon", env.mdp.horizon()},
                    {"achieved_margin", achieved_margin(env.model, env.features, env.mdp.levels())},
                    {"wall_time_s", seconds_since(t0)}}
                   .dump(2)
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reward-free exploration and planning with human feedback"};
  app.require_subcommand(1);

  // gen-env
  auto* gen = app.add_subcommand("gen-env", "Generate a margin-enforced environment bundle");
  EnvConfig env_cfg;
  std::uint64_t seed = 0;
  std::string kind_name = "linear";
  std::string out_path;
  std::string config_path;
  gen->add_option("--config", config_path, "JSON config file (flags take precedence)");
  gen->add_option("--states", env_cfg.num_states, "Number of states")->capture_default_str();
  gen->add_option("--actions", env_cfg.actions, "Actions per stage")->capture_default_str();
  gen->add_option("--dim", env_cfg.dim, "Feature dimension")->capture_default_str();
  gen->add_option("--levels", env_cfg.levels, "Reward levels n")->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen->add_option("--margin", env_cfg.margin, "Noise margin to enforce")->capture_default_str();
  gen->add_option("--model", kind_name, "Response model")
      ->check(CLI::IsMember({"linear", "logistic"}))
      ->capture_default_str();
  gen->add_option("--radius-min", env_cfg.scaling.radius_min)->capture_default_str();
  gen->add_option("--radius-max", env_cfg.scaling.radius_max)->capture_default_str();
  gen->add_option("--seed", seed)->capture_default_str();
  gen->add_option("--out", out_path, "Output bundle")->required();

  // explore
  auto* exp = app.add_subcommand("explore", "Reward-free exploration");
  std::string env_path;
  std::size_t episodes = 2000;
  std::string variant_name = "tabular";
  double delta = 0.1;
  std::optional<double> margin;
  BonusFlags explore_bonus;
  exp->add_option("--config", config_path, "JSON config file (flags take precedence)");
  exp->add_option("--env", env_path, "Environment bundle")->required();
  exp->add_option("--episodes", episodes, "K")->check(CLI::PositiveNumber)->capture_default_str();
  exp->add_option("--variant", variant_name)->check(CLI::IsMember({"tabular", "linear"}))
      ->capture_default_str();
  exp->add_option("--delta", delta, "Confidence")->capture_default_str();
  exp->add_option("--margin", margin, "Margin used inside beta_lin (default: bundle margin)");
  exp->add_option("--seed", seed)->capture_default_str();
  exp->add_option("--out", out_path, "Output dataset")->required();
  explore_bonus.add(exp, 1.0);

  // plan
  auto* pl = app.add_subcommand("plan", "Learn the reward from feedback and plan");
  std::string dataset_path;
  bool guess = false;
  std::vector<double> low_noise;
  bool best = false;
  std::string metrics_path;
  OracleFlags plan_oracle;
  RewardFlags plan_reward;
  BonusFlags plan_bonus;
  pl->add_option("--config", config_path, "JSON config file (flags take precedence)");
  pl->add_option("--env", env_path, "Environment bundle")->required();
  pl->add_option("--dataset", dataset_path, "Exploration dataset")->required();
  auto* margin_opt = pl->add_option("--margin", margin, "Known noise margin");
  auto* guess_opt = pl->add_flag("--guess-delta", guess, "Search the margin by halving");
  auto* low_opt = pl->add_option("--low-noise", low_noise, "c alpha of the low-noise schedule")
                      ->expected(2);
  margin_opt->excludes(guess_opt)->excludes(low_opt);
  guess_opt->excludes(low_opt);
  pl->add_option("--delta", delta, "Confidence")->capture_default_str();
  pl->add_option("--variant", variant_name)->check(CLI::IsMember({"tabular", "linear"}))
      ->capture_default_str();
  pl->add_option("--seed", seed)->capture_default_str();
  pl->add_flag("--best-iterate", best, "Also report the best mixture member (diagnostic)");
  pl->add_option("--out", out_path, "Output policy file")->required();
  pl->add_option("--metrics", metrics_path, "Also write metrics JSON here");
  plan_oracle.add(pl);
  plan_reward.add(pl);
  plan_bonus.add(pl, 1.0);

  // offline
  auto* off = app.add_subcommand("offline", "Pessimistic offline planning");
  std::size_t behaviors = 5;
  OracleFlags off_oracle;
  RewardFlags off_reward;
  BonusFlags off_bonus;
  off->add_option("--config", config_path, "JSON config file (flags take precedence)");
  off->add_option("--env", env_path, "Environment bundle")->required();
  off->add_option("--dataset", dataset_path, "Compliant dataset (default: collect one)");
  off->add_option("--episodes", episodes, "K when collecting")->check(CLI::PositiveNumber)
      ->capture_default_str();
  off->add_option("--behavior-policies", behaviors, "Random behavior policies when collecting")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  off->add_option("--margin", margin, "Noise margin (default: bundle margin)");
  off->add_option("--delta", delta, "Confidence")->capture_default_str();
  off->add_option("--seed", seed)->capture_default_str();
  off->add_option("--out", out_path, "Output policy file")->required();
  off->add_option("--metrics", metrics_path, "Also write metrics JSON here");
  off->add_option("--save-dataset", dataset_path, "Write the collected dataset here");
  off_oracle.add(off);
  off_reward.add(off);
  off_bonus.add(off, 0.1);

  // reproduce-fig1
  auto* fig = app.add_subcommand("reproduce-fig1", "Active vs passive and margin sweeps");
  std::string panel = "left";
  std::size_t trials = 100;
  std::size_t jobs = 1;
  std::string summary_path;
  std::vector<std::size_t> budgets;
  std::vector<double> margins;
  std::optional<double> fig_beta;
  std::optional<double> fig_c2;
  std::optional<double> fig_c_explore;
  fig->add_option("--config", config_path, "JSON config file (flags take precedence)");
  fig->add_option("--panel", panel)->check(CLI::IsMember({"left", "right"}))
      ->capture_default_str();
  fig->add_option("--trials", trials)->check(CLI::PositiveNumber)->capture_default_str();
  fig->add_option("--seed", seed)->capture_default_str();
  fig->add_option("--jobs", jobs)->check(CLI::PositiveNumber)->capture_default_str();
  fig->add_option("--episodes", episodes, "K")->check(CLI::PositiveNumber)
      ->capture_default_str();
  fig->add_option("--budgets", budgets, "Queries per stage to sweep");
  fig->add_option("--margins", margins, "Margins to sweep");
  fig->add_option("--beta-tbl", fig_beta, "beta_tbl for exploration and planning");
  fig->add_option("--c-explore", fig_c_explore, "Exploration constant");
  fig->add_option("--c2", fig_c2, "Confidence radius constant for selection");
  fig->add_option("--out", out_path, "CSV output (default fig1_<panel>.csv)");
  fig->add_option("--summary", summary_path, "Summary JSON output");

  // serve
  auto* srv = app.add_subcommand("serve", "Run the label service");
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "label-data";
  srv->add_option("--config", config_path, "JSON config file (flags take precedence)");
  srv->add_option("--bind", bind)->capture_default_str();
  srv->add_option("--port", port)->capture_default_str();
  srv->add_option("--data-dir", data_dir)->capture_default_str();

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  std::vector<char*> cargv;
  for (auto& a : args) cargv.push_back(a.data());

  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    const auto t0 = std::chrono::steady_clock::now();

    if (*gen) {
      env_cfg.kind = model_kind_from_string(kind_name);
      return cmd_gen_env(env_cfg, seed, out_path);
    }

    if (*exp) {
      const auto env = env_bundle_from_json(read_json_file(env_path));
      ExploreOptions eo;
      eo.variant = variant_from_string(variant_name);
      eo.bonus = explore_bonus.resolve(scale_for(env, episodes, delta, margin.value_or(env.margin)));
      EnvironmentSampler sampler(env.mdp, seed);
      auto data = explore(sampler, episodes, eo, &env.features);
      data.provenance["seed"] = seed;
      data.provenance["env_steps"] = sampler.steps();
      save_dataset(out_path, data, &env.features);
      std::cout << json{{"out", out_path},
                        {"episodes", data.episodes()},
                        {"env_steps", sampler.steps()},
                        {"oracle_calls", 0},
                        {"wall_time_s", seconds_since(t0)}}
                       .dump(2)
                << '\n';
      return 0;
    }

    if (*pl) {
      const auto env = env_bundle_from_json(read_json_file(env_path));
      const auto data = load_dataset(dataset_path);
      auto oracle = make_oracle(plan_oracle, env, env.mdp.levels());
      PlanConfig pc;
      pc.variant = variant_from_string(variant_name);
      pc.reward = plan_reward.resolve(env, seed);
      pc.seed = seed;

      json extra = json::object();
      std::optional<PlanResult> result;
      double used_margin = 0.0;
      if (guess) {
        std::function<std::optional<PlanResult>(double, double)> pipeline =
            [&](double m, double d) -> std::optional<PlanResult> {
          PlanConfig c = pc;
          c.validate = true;
          c.bonus = plan_bonus.resolve(scale_for(env, data.episodes(), d, m));
          used_margin = m;
          return plan(data, env.features, oracle.top(), m, d, c, env.describe);
        };
        auto outcome = guess_delta(pipeline, delta);
        json guesses = json::array();
        for (const auto& g : outcome.guesses) {
          guesses.push_back({{"n", g.n},
                             {"margin", g.margin},
                             {"delta", g.delta},
                             {"accepted", g.accepted},
                             {"reason", g.reason}});
        }
        extra["guesses"] = std::move(guesses);
        result = std::move(outcome.value);
      } else {
        if (!low_noise.empty()) {
          used_margin = low_noise_delta(low_noise[0], low_noise[1],
                                        static_cast<double>(data.episodes()));
          extra["low_noise"] = {{"c", low_noise[0]}, {"alpha", low_noise[1]}};
        } else {
          used_margin = margin.value_or(env.margin);
        }
        pc.bonus = plan_bonus.resolve(scale_for(env, data.episodes(), delta, used_margin));
        result = plan(data, env.features, oracle.top(), used_margin, delta, pc, env.describe);
      }

      json policy_file{{"mixture", result->policy}, {"reward", result->reward},
                       {"reward_levels", result->reward_levels}};
      write_json_file(out_path, policy_file);
      json metrics{{"suboptimality", suboptimality(env.mdp, result->policy)},
                   {"value", dp_evaluate(env.mdp, result->policy)},
                   {"optimal_value", dp_optimal(env.mdp).values.v[0][static_cast<Eigen::Index>(
                                         env.mdp.initial_state())]},
                   {"oracle_calls", oracle.top().calls()},
                   {"env_steps", data.episodes() * data.horizon()},
                   {"margin", used_margin},
                   {"stages", learning_metrics(result->stages)},
                   {"wall_time_s", seconds_since(t0)}};
      metrics.update(extra);
      if (best) {
        const auto b = best_iterate(env.mdp, result->policy);
        metrics["best_iterate"] = {{"index", b.index}, {"value", b.value}};
      }
      if (!metrics_path.empty()) write_json_file(metrics_path, metrics);
      std::cout << metrics.dump(2) << '\n';
      return 0;
    }

    if (*off) {
      const auto env = env_bundle_from_json(read_json_file(env_path));
      TrajectoryDataset data;
      if (!dataset_path.empty() && off->count("--dataset") > 0) {
        data = load_dataset(dataset_path);
      } else {
        Rng rng(derive_seed(seed, 0xbe4a));
        std::vector<MixturePolicy> behavior;
        for (std::size_t b = 0; b < behaviors; ++b) {
          Policy p;
          for (std::size_t h = 0; h < env.mdp.horizon(); ++h) {
            std::vector<std::size_t> row;
            for (std::size_t s = 0; s < env.mdp.num_states(); ++s) {
              row.push_back(std::uniform_int_distribution<std::size_t>(
                  0, env.mdp.num_actions(h) - 1)(rng));
            }
            p.actions.push_back(std::move(row));
          }
          behavior.push_back(MixturePolicy{{std::move(p)}});
        }
        data = collect_compliant(env.mdp, behavior, episodes, seed);
        if (!dataset_path.empty()) save_dataset(dataset_path, data, &env.features);
      }
      auto oracle = make_oracle(off_oracle, env, env.mdp.levels());
      const double m = margin.value_or(env.margin);
      OfflineConfig oc;
      oc.bonus = off_bonus.resolve(scale_for(env, data.episodes(), delta, m));
      oc.reward = off_reward.resolve(env, seed);
      const auto result = lcbvi(data, env.features, oracle.top(), m, delta, oc, env.describe);
      write_json_file(out_path, json{{"policy", result.plan.policy},
                                     {"reward", result.reward},
                                     {"reward_levels", result.reward_levels}});
      const auto s1 = static_cast<Eigen::Index>(env.mdp.initial_state());
      json metrics{{"suboptimality", suboptimality(env.mdp, result.plan.policy)},
                   {"value", dp_evaluate(env.mdp, result.plan.policy)},
                   {"pessimistic_value", result.plan.values.v[0][s1]},
                   {"optimal_value", dp_optimal(env.mdp).values.v[0][s1]},
                   {"gap_bound", gap_bound(data, env.mdp, delta)},
                   {"oracle_calls", oracle.top().calls()},
                   {"env_steps", data.episodes() * data.horizon()},
                   {"margin", m},
                   {"stages", learning_metrics(result.stages)},
                   {"wall_time_s", seconds_since(t0)}};
      if (!metrics_path.empty()) write_json_file(metrics_path, metrics);
      std::cout << metrics.dump(2) << '\n';
      return 0;
    }

    if (*fig) {
      Fig1Config fc = panel == "left" ? fig1_left_defaults() : fig1_right_defaults();
      fc.trials = trials;
      fc.seed = seed;
      fc.jobs = jobs;
      if (fig->count("--episodes") > 0) fc.episodes = episodes;
      if (!budgets.empty()) fc.budgets = budgets;
      if (!margins.empty()) fc.margins = margins;
      if (fig_beta) {
        fc.explore.bonus.beta_tbl = *fig_beta;
        fc.plan_bonus.beta_tbl = *fig_beta;
      }
      if (fig_c_explore) fc.explore.bonus.c_explore = *fig_c_explore;
      if (fig_c2) fc.reward.c2 = *fig_c2;
      const auto rows = run_fig1(fc);
      if (out_path.empty()) out_path = "fig1_" + panel + ".csv";
      std::ofstream csv(out_path);
      if (!csv) throw DataError("cannot write " + out_path);
      write_csv(csv, rows);
      const auto cells = summarize(rows);
      json summary = json::array();
      std::cout << "method   delta    N      mean_error  stderr\n";
      for (const auto& c : cells) {
        char line[128];
        std::snprintf(line, sizeof line, "%-8s %-8.4g %-6zu %-11.5f %.5f\n", c.method.c_str(),
                      c.margin, c.n_queries, c.mean_error, c.stderr_error);
        std::cout << line;
        summary.push_back({{"method", c.method},
                           {"delta", c.margin},
                           {"n_queries", c.n_queries},
                           {"mean_error", c.mean_error},
                           {"stderr", c.stderr_error},
                           {"trials", c.trials}});
      }
      std::cout << "csv: " << out_path << "  wall time " << seconds_since(t0) << " s\n";
      if (!summary_path.empty()) write_json_file(summary_path, summary);
      return 0;
    }

    if (*srv) {
      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);

      LabelStore store(std::filesystem::path{data_dir});
      LabelServer server(store);
      const int bound = server.bind(bind, port);
      std::cout << "label service on http://" << bind << ':' << bound << " (data in "
                << data_dir << ")" << std::endl;
      std::thread worker([&] { server.serve(); });
      int sig = 0;
      sigwait(&signals, &sig);
      server.stop();
      worker.join();
      return 0;
    }
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const OracleError& e) {
    std::cerr << "oracle error: " << e.what() << '\n';
    return kExitOracle;
  } catch (const ServiceError& e) {
    std::cerr << "service error: " << e.what() << '\n';
    return kExitOracle;
  } catch (const json::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
