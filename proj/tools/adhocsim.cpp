// adhocsim: run scenarios, compute the min-max oracle, derive parameters.
//
// Exit codes: 0 ok, 1 usage or I/O error, 2 invalid config, 3 good nodes not
// connected, 4 instance too large or no feasible parameters.
//
// ADHOCSIM_LOG sets verbosity (trace, debug, info, warn, error, off).

#include "adhoc/scenario.hpp"

#include "CLI11.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace adhoc;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("adhocsim");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%^[%l]%$ %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("ADHOCSIM_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

std::string pair_name(NodePair p) { return std::to_string(p.first) + "-" + std::to_string(p.second); }

std::string set_name(const std::vector<std::size_t>& d) {
  std::string out = "{";
  for (std::size_t k = 0; k < d.size(); ++k) out += (k ? "," : "") + std::to_string(d[k]);
  return out + "}";
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, const std::string& out_dir,
            const std::string& adversary, std::optional<int> max_iterations) {
  Scenario s = load_scenario(path);
  if (seed) {
    s.seed = *seed;
    spdlog::debug("seed overridden to {}", *seed);
  }
  if (!adversary.empty()) {
    s.adversary = adversary;
    s.validate();
  }
  spdlog::info("running {} (n = {}, {} catalogue entries, adversary {})", s.name, s.n, s.model.size(), s.adversary);
  EngineOptions opt;
  opt.max_iterations = max_iterations;
  const RunResult r = run_scenario(s, opt);
  const Metrics& m = r.metrics;

  std::filesystem::create_directories(out_dir);
  const auto metrics_path = std::filesystem::path(out_dir) / "metrics.json";
  const auto trace_path = std::filesystem::path(out_dir) / "trace.jsonl";
  std::ofstream(metrics_path) << m.to_json() << "\n";
  std::ofstream(trace_path) << r.trace_jsonl();
  spdlog::info("wrote {} and {} ({} trace records)", metrics_path.string(), trace_path.string(), r.trace.size());

  std::cout << "scenario        " << m.scenario << " (" << m.adversary << ", seed " << m.seed << ")\n";
  std::cout << "links           " << m.links_final.size() << " of " << m.links_decided.size() << " kept\n";
  std::cout << "iterations      " << m.params.n_iter << ", " << m.prune_history.size() << " with prunes\n";
  std::cout << "feasible set    " << m.feasible_initial.size() << " -> " << m.feasible_final.size() << "\n";
  std::cout << "overhead        " << m.overhead_fraction << "\n";
  std::cout << "utility         " << m.utility_long_run << " (LP on final set " << m.lp_final << ")\n";
  for (const auto& [pair, w] : s.utility.weights)
    std::cout << "throughput " << pair_name(pair) << "  " << m.throughput(pair.first - 1, pair.second - 1) << "\n";
  return 0;
}

int cmd_oracle(const std::string& path, std::size_t budget) {
  const Scenario s = load_scenario(path);
  const auto jammable = jammable_entries(s.model, s.bad);
  spdlog::info("{} jammable entries, {} disable sets", jammable.size(), 1ull << std::min<std::size_t>(jammable.size(), 63));
  const MinMaxResult r = minmax_oracle(s.model, s.good(), jammable, s.utility, budget);
  std::cout << "disable set\tmax utility\n";
  for (const auto& [d, v] : r.per_set) std::cout << set_name(d) << "\t" << v << "\n";
  std::cout << "min-max " << r.value << " at " << set_name(r.argmin) << "\n";
  return 0;
}

int cmd_params(int n, double a_max, double u0, int k_r, double eps, double ceiling) {
  if (n < 2) throw std::invalid_argument("--n must be at least 2");
  if (!(a_max >= 1)) throw std::invalid_argument("--a-max must be at least 1");
  const double k_delay = 2 * a_max;
  const OverheadConstants c = OverheadConstants::defaults(n, a_max, k_delay);
  const ProtocolParams p = select_parameters(n, a_max, u0, k_r, eps, c, ceiling);
  const ParamResiduals r = parameter_residuals(p, n, a_max, u0, c);
  std::cout << "n_iter      " << p.n_iter << "\n";
  std::cout << "dead_time   " << p.dead_time << "\n";
  std::cout << "data_time   " << p.data_time << "\n";
  std::cout << "eps_a       " << p.eps_a << "\n";
  std::cout << "t_life      " << p.t_life << "\n";
  std::cout << "eps_l eps_d " << p.eps_l << " " << p.eps_d << "\n";
  std::cout << "residual iterations  " << r.iterations << "\n";
  std::cout << "residual data_share  " << r.data_share << "\n";
  std::cout << "residual lifetime    " << r.lifetime << "\n";
  std::cout << "residual dead_time   " << r.dead_time << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Byzantine-resilient ad hoc network simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "simulate a scenario and write metrics.json and trace.jsonl");
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "adhocsim-out";
  std::string adversary;
  std::optional<int> max_iterations;
  run->add_option("config", config, "scenario file")->required();
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--adversary", adversary, "override the adversary strategy");
  run->add_option("--max-iterations", max_iterations, "simulate at most this many iterations");

  auto* oracle = app.add_subcommand("oracle", "min-max utility by brute force over disable sets");
  std::size_t budget = 1u << 12;
  oracle->add_option("config", config, "scenario file")->required();
  oracle->add_option("--budget", budget, "largest number of disable sets to enumerate");

  auto* params = app.add_subcommand("params", "derive protocol parameters and print the inequality residuals");
  int n = 0, k_r = 1;
  double a_max = 1, u0 = 0, eps = 0.25, ceiling = 1e300;
  params->add_option("--n", n, "number of nodes")->required();
  params->add_option("--a-max", a_max, "clock skew bound")->required();
  params->add_option("--u0", u0, "power-on spread")->required();
  params->add_option("--kr", k_r, "distinct claimed rate vectors")->required();
  params->add_option("--eps", eps, "target utility loss")->required();
  params->add_option("--ceiling", ceiling, "largest lifetime to try");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(config, seed, out_dir, adversary, max_iterations);
    if (*oracle) return cmd_oracle(config, budget);
    if (*params) return cmd_params(n, a_max, u0, k_r, eps, ceiling);
  } catch (const ConfigInvalid& e) {
    spdlog::error("invalid config: {}", e.what());
    std::cerr << "config error in field '" << e.field() << "': " << e.what() << "\n";
    return 2;
  } catch (const AssumptionCViolated& e) {
    std::cerr << "good nodes are not connected: " << e.what() << "\n";
    return 3;
  } catch (const TooLarge& e) {
    std::cerr << "too large: " << e.what() << "\n";
    return 4;
  } catch (const NoFeasibleParams& e) {
    std::cerr << "no feasible parameters: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
