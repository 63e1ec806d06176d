// hybridevo command-line front end.
//
//   hybridevo run <config> [--output-dir DIR] [--resume]
//   hybridevo bench table1 [--repeats R]
//   hybridevo worker --queue DIR [--poll-ms N]
//   hybridevo config --dump-defaults

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "hybridevo/bench.hpp"
#include "hybridevo/config.hpp"
#include "hybridevo/hybrid.hpp"
#include "hybridevo/parallel.hpp"
#include "hybridevo/problems.hpp"

namespace fs = std::filesystem;
using namespace hybridevo;

namespace {

std::atomic<bool> g_terminate{false};

extern "C" void on_signal(int) { g_terminate.store(true); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int cmd_run(const fs::path& config_path, const std::string& out_override, bool resume) {
  RunConfig cfg = load_config(config_path);
  if (const char* env = std::getenv("HYBRIDEVO_SEED")) {
    const auto s = try_parse_int<std::uint64_t>(env);
    if (!s) throw ConfigError("HYBRIDEVO_SEED", std::string("expected a nonnegative integer, got '") + env + "'");
    cfg.seed = *s;
  }
  if (!out_override.empty()) cfg.output_dir = out_override;

  OptimizationPlan plan = cfg.plan();
  fs::create_directories(cfg.output_dir);

  std::unique_ptr<BatchEvaluator> evaluator;
  if (cfg.backend == Backend::kPool) {
    evaluator = std::make_unique<PoolEvaluator>(plan.objective, cfg.workers);
  } else {
    FileQueueEvaluator::Options qo{cfg.queue.poll, cfg.queue.timeout, cfg.queue.local_workers};
    evaluator = std::make_unique<FileQueueEvaluator>(cfg.queue.dir, qo, plan.objective);
  }

  RunOptions opts;
  opts.history_path = cfg.output_dir / "history.csv";
  opts.checkpoint_path = cfg.checkpoint;
  opts.checkpoint_every = cfg.checkpoint_every;

  const auto t0 = std::chrono::steady_clock::now();
  const bool restoring = resume && cfg.checkpoint && fs::exists(*cfg.checkpoint);
  HybridRunner runner = restoring ? HybridRunner::restore(plan, *evaluator, *cfg.checkpoint)
                                  : HybridRunner(plan, *evaluator);
  if (restoring) std::cerr << "resuming from " << cfg.checkpoint->string() << "\n";
  runner.run(opts);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto& best = runner.best();
  {
    std::ostringstream os;
    os << "dimension=" << best.x.size() << "\n";
    for (double v : best.x.span()) os << format_real(v) << "\n";
    filequeue::write_atomic(cfg.output_dir / "best.csv", os.str());
  }
  std::ostringstream sum;
  sum << "objective: " << plan.objective.id() << "\n"
      << "seed: " << plan.seed << "\n"
      << "stages:\n";
  for (const auto& s : runner.stages())
    sum << "  " << s.name << ": " << s.evaluations << " evaluations, stage best " << format_real(s.best) << "\n";
  sum << "final best: " << format_real(*best.value) << "\n"
      << "evaluations: " << runner.history().size() << "\n"
      << "simulations: " << runner.history().size() * plan.objective.simulations_per_call() << "\n"
      << "wall time: " << fmt("%.3f", wall) << " s" << (restoring ? " (resumed run, this process only)" : "")
      << "\n";
  filequeue::write_atomic(cfg.output_dir / "summary.txt", sum.str());
  std::cout << sum.str();
  return 0;
}

int cmd_bench(const std::string& suite, std::size_t repeats) {
  if (suite != "table1") {
    std::cerr << "error: unknown bench suite '" << suite << "' (expected table1)\n";
    return 2;
  }
  std::printf("Rastrigin best cost over %zu seeded repeats (seeds 1..%zu)\n", repeats, repeats);
  std::printf("%-4s %-5s %-6s %-4s %14s %14s %14s\n", "d", "pop", "iters", "alg", "median", "IQR", "reference");
  for (const auto& c : run_table1(repeats)) {
    std::printf("%-4zu %-5zu %-6zu %-4s %14.6g %14.6g %14.6g\n", c.row.dimension, c.row.population,
                c.row.iterations, std::string(to_string(c.engine)).c_str(), median(c.costs), iqr(c.costs),
                c.reference());
  }
  return 0;
}

int cmd_worker(const fs::path& queue, std::size_t poll_ms) {
  if (!fs::is_directory(queue)) {
    std::cerr << "error: queue directory " << queue << " does not exist\n";
    return 1;
  }
  filequeue::create_layout(queue);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  ObjectiveRegistry registry(objective_from_id);
  std::mutex log_mu;
  WorkerOptions wo;
  wo.poll = std::chrono::milliseconds(poll_ms);
  wo.log = [&](const std::string& msg) {
    std::lock_guard lock(log_mu);
    std::cerr << "worker: " << msg << std::endl;
  };
  std::cerr << "worker: watching " << queue.string() << std::endl;

  std::exception_ptr failure;
  std::jthread t([&](std::stop_token st) {
    try {
      filequeue_worker(queue, registry, st, wo);
    } catch (...) {
      failure = std::current_exception();
      g_terminate.store(true);
    }
  });
  while (!g_terminate.load()) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  t.request_stop();
  t.join();
  if (failure) std::rethrow_exception(failure);
  std::cerr << "worker: stopped" << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybridevo: GA / PSO / CMA-ES hybrid optimization"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "execute an optimization plan from a config file");
  std::string config_path, out_dir;
  bool resume = false;
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--output-dir", out_dir, "override run.output_dir");
  run->add_flag("--resume", resume, "continue from run.checkpoint when it exists");

  auto* bench = app.add_subcommand("bench", "Rastrigin dimensionality benchmark");
  std::string suite;
  std::size_t repeats = 10;
  bench->add_option("suite", suite, "benchmark suite (table1)")->required();
  bench->add_option("--repeats", repeats, "seeded repeats per cell")->check(CLI::PositiveNumber);

  auto* worker = app.add_subcommand("worker", "process file-queue jobs until SIGINT/SIGTERM");
  std::string queue;
  std::size_t poll_ms = 100;
  worker->add_option("--queue", queue, "queue directory")->required();
  worker->add_option("--poll-ms", poll_ms, "idle poll interval")->check(CLI::PositiveNumber);

  auto* config = app.add_subcommand("config", "configuration helpers");
  bool dump = false;
  config->add_flag("--dump-defaults", dump, "print the complete default config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, out_dir, resume);
    if (*bench) return cmd_bench(suite, repeats);
    if (*worker) return cmd_worker(queue, poll_ms);
    if (*config) {
      if (!dump) {
        std::cerr << "error: config needs --dump-defaults\n";
        return 2;
      }
      std::cout << dump_config(RunConfig::defaults());
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
