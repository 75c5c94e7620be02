#include "hitl/experiment.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include "hitl/oracle.hpp"

namespace hitl {

void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

Fig1Config fig1_left_defaults() {
  Fig1Config c;
  c.env.num_states = 20;
  c.env.actions = {10, 3};
  c.env.dim = 5;
  c.env.margin = 0.05;
  c.margins = {0.05};
  c.explore.bonus.beta_tbl = 0.003;
  c.explore.bonus.c_explore = 0.003;
  c.plan_bonus.beta_tbl = 0.003;
  c.reward.c2 = 0.03;
  return c;
}

Fig1Config fig1_right_defaults() {
  Fig1Config c = fig1_left_defaults();
  c.margins = {0.02, 0.05, 0.1};
  c.budgets = {100};
  return c;
}

std::vector<Fig1Row> run_fig1(const Fig1Config& config) {
  const std::size_t per_trial = config.margins.size();
  std::vector<std::vector<Fig1Row>> results(config.trials * per_trial);
  parallel_for(config.trials * per_trial, config.jobs, [&](std::size_t job) {
    const std::size_t trial = job / per_trial;
    const std::size_t mi = job % per_trial;
    const double margin = config.margins[mi];
    const std::uint64_t trial_seed = derive_seed(config.seed, trial);

    EnvConfig ec = config.env;
    ec.margin = margin;
    const auto bundle = gen_env(ec, trial_seed);
    EnvironmentSampler sampler(bundle.mdp, derive_seed(trial_seed, 0x5eed0001));
    const auto data = explore(sampler, config.episodes, config.explore);

    auto& out = results[job];
    for (std::size_t m = 0; m < config.methods.size(); ++m) {
      for (std::size_t b = 0; b < config.budgets.size(); ++b) {
        const std::uint64_t run_seed =
            derive_seed(trial_seed, 0x1000 * (m + 1) + b + 1);
        SimulatedOracle oracle(bundle.model, ec.levels, run_seed);
        PlanConfig pc;
        pc.variant = Variant::tabular;
        pc.bonus = config.plan_bonus;
        pc.reward = config.reward;
        pc.reward.kind = bundle.model.kind;
        pc.reward.levels = ec.levels;
        pc.reward.budget = config.budgets[b];
        pc.reward.selection = config.methods[m];
        pc.reward.seed = run_seed;
        pc.seed = run_seed;
        const auto result = plan(data, bundle.features, oracle, margin, config.delta, pc);
        Fig1Row row;
        row.method = to_string(config.methods[m]);
        row.margin = margin;
        row.n_queries = config.budgets[b];
        row.episodes = config.episodes;
        row.trial = trial;
        row.error = suboptimality(bundle.mdp, result.policy);
        row.env_steps = sampler.steps();
        row.oracle_calls = oracle.calls();
        out.push_back(row);
      }
    }
  });
  std::vector<Fig1Row> rows;
  for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
  return rows;
}

void write_csv(std::ostream& out, const std::vector<Fig1Row>& rows) {
  out << "method,delta,n_queries,k,trial,error,env_steps,oracle_calls\n";
  for (const auto& r : rows) {
    std::ostringstream line;
    line << r.method << ',' << r.margin << ',' << r.n_queries << ',' << r.episodes << ','
         << r.trial << ',' << std::setprecision(17) << r.error << ',' << r.env_steps << ','
         << r.oracle_calls << '\n';
    out << line.str();
  }
}

std::vector<Fig1Cell> summarize(const std::vector<Fig1Row>& rows) {
  std::map<std::tuple<std::string, double, std::size_t>, std::vector<double>> groups;
  for (const auto& r : rows) groups[{r.method, r.margin, r.n_queries}].push_back(r.error);
  std::vector<Fig1Cell> cells;
  for (const auto& [key, errors] : groups) {
    Fig1Cell c;
    std::tie(c.method, c.margin, c.n_queries) = key;
    c.trials = errors.size();
    double sum = 0.0;
    for (double e : errors) sum += e;
    c.mean_error = sum / static_cast<double>(c.trials);
    double var = 0.0;
    for (double e : errors) var += (e - c.mean_error) * (e - c.mean_error);
    c.stderr_error = c.trials > 1 ? std::sqrt(var / static_cast<double>(c.trials - 1) /
                                              static_cast<double>(c.trials))
                                  : 0.0;
    cells.push_back(c);
  }
  return cells;
}

std::size_t queries_to_reach(const std::vector<Fig1Cell>& cells, const std::string& method,
                             double margin, double target) {
  std::size_t best = 0;
  for (const auto& c : cells) {
    if (c.method != method || c.margin != margin || c.mean_error > target) continue;
    if (best == 0 || c.n_queries < best) best = c.n_queries;
  }
  return best;
}

}  // namespace hitl
