// Batch evaluation backends.
//
// Pool: jobs fan out over worker threads in-process; results are merged in
// job-id order, so the output never depends on completion order.
//
// File queue: a shared directory with pending/, running/ and done/. The
// orchestrator drops `job_<id>.task` files into pending/; any number of
// workers (threads or separate processes, possibly on other hosts sharing the
// filesystem) claim a task by renaming it into running/, evaluate it and
// publish `job_<id>.result` or `job_<id>.error` into done/. The rename is the
// only mutual-exclusion primitive.
//
// File formats (text, newline-terminated):
//   .task    line 1: objective id; line 2: comma-separated control values
//   .result  one line: the objective value
//   .error   one line: the failure message
// Reals are written with 17 significant digits so values round-trip exactly.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "hybridevo/core.hpp"
#include "hybridevo/objectives.hpp"

namespace hybridevo {

namespace fs = std::filesystem;

struct EvalJob {
  std::uint64_t job_id = 0;
  ControlVector x;
  std::string objective_id;

  friend bool operator==(const EvalJob&, const EvalJob&) = default;
};

struct EvalResult {
  std::uint64_t job_id = 0;
  double value = 0.0;
  std::chrono::nanoseconds wall_time{0};  // zero when the backend cannot observe it
};

/// A job failed; carries the offending id.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(std::uint64_t job_id, const std::string& message)
      : std::runtime_error("job " + std::to_string(job_id) + ": " + message), job_id_(job_id) {}
  std::uint64_t job_id() const { return job_id_; }

 private:
  std::uint64_t job_id_;
};

/// Evaluates every job and returns results ordered by job id. The lowest
/// failing job id is reported when several jobs fail.
inline std::vector<EvalResult> evaluate_batch(std::span<const EvalJob> jobs, const Objective& objective,
                                              std::size_t workers) {
  if (workers < 1) throw std::invalid_argument("evaluate_batch: workers must be >= 1");
  std::vector<EvalResult> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());

  auto run_one = [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (jobs[i].objective_id != objective.id())
        throw std::invalid_argument("objective '" + jobs[i].objective_id +
                                    "' does not match evaluator objective '" + objective.id() + "'");
      results[i].value = objective(jobs[i].x);
    } catch (...) {
      errors[i] = std::current_exception();
    }
    results[i].job_id = jobs[i].job_id;
    results[i].wall_time = std::chrono::steady_clock::now() - t0;
  };

  const std::size_t n_threads = std::min(workers, jobs.size());
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) run_one(i);
      });
  }

  std::optional<std::size_t> failed;
  for (std::size_t i = 0; i < jobs.size(); ++i)
    if (errors[i] && (!failed || jobs[i].job_id < jobs[*failed].job_id)) failed = i;
  if (failed) {
    try {
      std::rethrow_exception(errors[*failed]);
    } catch (const std::exception& e) {
      throw EvaluationError(jobs[*failed].job_id, e.what());
    }
  }

  std::sort(results.begin(), results.end(),
            [](const EvalResult& a, const EvalResult& b) { return a.job_id < b.job_id; });
  for (std::size_t i = 1; i < results.size(); ++i)
    if (results[i].job_id == results[i - 1].job_id)
      throw std::invalid_argument("evaluate_batch: duplicate job id " + std::to_string(results[i].job_id));
  return results;
}

/// Backend contract used by the hybrid orchestrator.
class BatchEvaluator {
 public:
  virtual ~BatchEvaluator() = default;
  virtual std::vector<EvalResult> evaluate(std::span<const EvalJob> jobs) = 0;
};

class PoolEvaluator final : public BatchEvaluator {
 public:
  PoolEvaluator(Objective objective, std::size_t workers)
      : objective_(std::move(objective)), workers_(workers) {
    if (workers_ < 1) throw std::invalid_argument("pool evaluator: workers must be >= 1");
  }
  std::vector<EvalResult> evaluate(std::span<const EvalJob> jobs) override {
    return evaluate_batch(jobs, objective_, workers_);
  }

 private:
  Objective objective_;
  std::size_t workers_;
};

// ---------------------------------------------------------------------------
// File queue

namespace filequeue {

inline fs::path pending_dir(const fs::path& root) { return root / "pending"; }
inline fs::path running_dir(const fs::path& root) { return root / "running"; }
inline fs::path done_dir(const fs::path& root) { return root / "done"; }

inline std::string job_stem(std::uint64_t id) { return "job_" + std::to_string(id); }

/// Creates root/{pending,running,done}.
inline void create_layout(const fs::path& root) {
  fs::create_directories(pending_dir(root));
  fs::create_directories(running_dir(root));
  fs::create_directories(done_dir(root));
}

inline bool has_layout(const fs::path& root) {
  return fs::is_directory(pending_dir(root)) && fs::is_directory(running_dir(root)) &&
         fs::is_directory(done_dir(root));
}

/// Parses `job_<id><suffix>`; nullopt for anything else.
inline std::optional<std::uint64_t> parse_job_name(std::string_view name, std::string_view suffix) {
  if (!name.starts_with("job_") || !name.ends_with(suffix)) return std::nullopt;
  name.remove_prefix(4);
  name.remove_suffix(suffix.size());
  if (name.empty() || name.find_first_not_of("0123456789") != std::string_view::npos) return std::nullopt;
  return try_parse_int<std::uint64_t>(name);
}

inline std::string render_task(const EvalJob& job) {
  if (job.objective_id.empty() || job.objective_id.find_first_of("\r\n") != std::string::npos)
    throw std::invalid_argument("task: objective id must be a nonempty single line");
  std::string out = job.objective_id + "\n";
  for (std::size_t i = 0; i < job.x.size(); ++i) {
    if (i) out += ',';
    out += format_real(job.x[i]);
  }
  out += '\n';
  return out;
}

inline EvalJob parse_task(std::uint64_t job_id, std::string_view text) {
  const auto nl = text.find('\n');
  if (nl == std::string_view::npos) throw std::runtime_error("task: missing control line");
  EvalJob job;
  job.job_id = job_id;
  job.objective_id = std::string(trim(text.substr(0, nl)));
  if (job.objective_id.empty()) throw std::runtime_error("task: empty objective id");
  std::string_view rest = text.substr(nl + 1);
  const auto nl2 = rest.find('\n');
  const auto values_line = trim(rest.substr(0, nl2));
  if (nl2 != std::string_view::npos && !trim(rest.substr(nl2 + 1)).empty())
    throw std::runtime_error("task: trailing content after control line");
  if (values_line.empty()) throw std::runtime_error("task: empty control line");
  std::vector<double> x;
  for (auto tok : split(values_line, ',')) {
    const auto v = try_parse_real(tok);
    if (!v) throw std::runtime_error("task: bad control value '" + std::string(tok) + "'");
    x.push_back(*v);
  }
  job.x = ControlVector(std::move(x));
  return job;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Writes via a dot-prefixed temporary in the same directory, then renames.
inline void write_atomic(const fs::path& target, std::string_view content) {
  static std::atomic<std::uint64_t> counter{0};
  const auto tmp = target.parent_path() /
                   ("." + target.filename().string() + ".tmp" + std::to_string(counter.fetch_add(1)) +
                    "_" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << content;
    os.flush();
    if (!os) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cannot publish " + target.string());
  }
}

inline bool job_known(const fs::path& root, std::uint64_t id) {
  const auto stem = job_stem(id);
  return fs::exists(pending_dir(root) / (stem + ".task")) ||
         fs::exists(running_dir(root) / (stem + ".task")) ||
         fs::exists(done_dir(root) / (stem + ".result")) ||
         fs::exists(done_dir(root) / (stem + ".error"));
}

}  // namespace filequeue

/// Publishes one task file per job into pending/. Fails before writing
/// anything if an id repeats within the batch or is already in the queue.
inline std::vector<fs::path> filequeue_submit(const fs::path& root, std::span<const EvalJob> jobs) {
  if (!filequeue::has_layout(root))
    throw std::runtime_error("file queue: " + root.string() + " lacks pending/, running/, done/");
  std::vector<std::uint64_t> ids;
  for (const auto& j : jobs) ids.push_back(j.job_id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw std::invalid_argument("file queue: duplicate job id within batch");
  for (auto id : ids)
    if (filequeue::job_known(root, id))
      throw std::invalid_argument("file queue: job " + std::to_string(id) + " already submitted");

  std::vector<fs::path> out;
  for (const auto& j : jobs) {
    const auto path = filequeue::pending_dir(root) / (filequeue::job_stem(j.job_id) + ".task");
    filequeue::write_atomic(path, filequeue::render_task(j));
    out.push_back(path);
  }
  return out;
}

/// Resolves objective ids for queue workers: explicit registrations first,
/// then an optional factory whose results are cached.
class ObjectiveRegistry {
 public:
  using Factory = std::function<std::optional<Objective>(const std::string&)>;

  ObjectiveRegistry() = default;
  explicit ObjectiveRegistry(Factory factory) : factory_(std::move(factory)) {}

  void add(Objective o) {
    std::lock_guard lock(mu_);
    objectives_.insert_or_assign(o.id(), o);
  }

  std::optional<Objective> find(const std::string& id) {
    std::lock_guard lock(mu_);
    if (auto it = objectives_.find(id); it != objectives_.end()) return it->second;
    if (!factory_) return std::nullopt;
    auto made = factory_(id);
    if (made) objectives_.insert_or_assign(id, *made);
    return made;
  }

 private:
  std::mutex mu_;
  std::map<std::string, Objective> objectives_;
  Factory factory_;
};

struct WorkerOptions {
  std::chrono::milliseconds poll{100};
  std::function<void(const std::string&)> log;  // one message per processed job
};

/// Claims and processes at most one pending job. Returns the processed id.
inline std::optional<std::uint64_t> filequeue_process_one(const fs::path& root,
                                                          ObjectiveRegistry& registry,
                                                          const WorkerOptions& opts = {}) {
  std::vector<std::pair<std::uint64_t, fs::path>> candidates;
  std::error_code ec;
  for (fs::directory_iterator it(filequeue::pending_dir(root), ec), end; !ec && it != end; it.increment(ec)) {
    const auto name = it->path().filename().string();
    if (auto id = filequeue::parse_job_name(name, ".task")) candidates.emplace_back(*id, it->path());
  }
  std::sort(candidates.begin(), candidates.end());

  for (const auto& [id, path] : candidates) {
    const auto stem = filequeue::job_stem(id);
    const auto claimed = filequeue::running_dir(root) / (stem + ".task");
    std::error_code rename_ec;
    fs::rename(path, claimed, rename_ec);
    if (rename_ec) continue;  // another worker won the claim

    std::string outcome_suffix = ".result";
    std::string content;
    try {
      const EvalJob job = filequeue::parse_task(id, filequeue::read_file(claimed));
      auto objective = registry.find(job.objective_id);
      if (!objective) throw std::runtime_error("unknown objective id '" + job.objective_id + "'");
      content = format_real((*objective)(job.x)) + "\n";
    } catch (const std::exception& e) {
      outcome_suffix = ".error";
      std::string msg = e.what();
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      std::replace(msg.begin(), msg.end(), '\r', ' ');
      content = msg + "\n";
    }
    filequeue::write_atomic(filequeue::done_dir(root) / (stem + outcome_suffix), content);
    fs::remove(claimed, ec);
    if (opts.log) opts.log(stem + (outcome_suffix == ".result" ? " done" : " failed: " + content.substr(0, content.size() - 1)));
    return id;
  }
  return std::nullopt;
}

/// Processes jobs until stop is requested, sleeping `poll` when idle.
inline void filequeue_worker(const fs::path& root, ObjectiveRegistry& registry, std::stop_token stop,
                             const WorkerOptions& opts = {}) {
  if (!filequeue::has_layout(root))
    throw std::runtime_error("file queue: " + root.string() + " lacks pending/, running/, done/");
  while (!stop.stop_requested()) {
    if (!filequeue_process_one(root, registry, opts)) std::this_thread::sleep_for(opts.poll);
  }
}

/// Waits for every expected id; returns results ordered by job id and removes
/// the consumed result files.
inline std::vector<EvalResult> filequeue_collect(const fs::path& root, std::span<const std::uint64_t> ids,
                                                 std::chrono::milliseconds timeout,
                                                 std::chrono::milliseconds poll = std::chrono::milliseconds(100)) {
  std::vector<std::uint64_t> missing(ids.begin(), ids.end());
  std::sort(missing.begin(), missing.end());
  std::map<std::uint64_t, double> found;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  const auto done = filequeue::done_dir(root);

  while (true) {
    std::vector<std::uint64_t> still;
    for (auto id : missing) {
      const auto stem = filequeue::job_stem(id);
      if (fs::exists(done / (stem + ".error"))) {
        std::string msg = filequeue::read_file(done / (stem + ".error"));
        throw EvaluationError(id, std::string(trim(msg)));
      }
      const auto result = done / (stem + ".result");
      if (fs::exists(result)) {
        const auto text = filequeue::read_file(result);
        const auto v = try_parse_real(text);
        if (!v || text.empty() || text.back() != '\n' || trim(text).find('\n') != std::string_view::npos)
          throw EvaluationError(id, "malformed result file");
        found[id] = require_finite(*v, "result for " + stem);
      } else {
        still.push_back(id);
      }
    }
    missing = std::move(still);
    if (missing.empty()) break;
    if (std::chrono::steady_clock::now() >= deadline) {
      std::string list;
      for (auto id : missing) list += (list.empty() ? "" : ", ") + std::to_string(id);
      throw std::runtime_error("file queue: timed out waiting for job(s) " + list);
    }
    std::this_thread::sleep_for(poll);
  }

  std::vector<EvalResult> out;
  for (const auto& [id, v] : found) {
    out.push_back({id, v, std::chrono::nanoseconds{0}});
    std::error_code ec;
    fs::remove(done / (filequeue::job_stem(id) + ".result"), ec);
  }
  return out;
}

/// File-queue backend for the orchestrator. Optionally hosts in-process
/// worker threads; external `worker --queue` processes may join as well.
class FileQueueEvaluator final : public BatchEvaluator {
 public:
  struct Options {
    std::chrono::milliseconds poll{100};
    std::chrono::milliseconds timeout{std::chrono::minutes(10)};
    std::size_t local_workers = 0;
  };

  FileQueueEvaluator(fs::path root, Options opts, std::optional<Objective> local_objective = std::nullopt)
      : root_(std::move(root)), opts_(opts) {
    filequeue::create_layout(root_);
    if (opts_.local_workers > 0) {
      if (!local_objective) throw std::invalid_argument("file queue: local workers need an objective");
      registry_.add(*local_objective);
      for (std::size_t k = 0; k < opts_.local_workers; ++k)
        workers_.emplace_back([this](std::stop_token st) {
          filequeue_worker(root_, registry_, st, WorkerOptions{opts_.poll, {}});
        });
    }
  }

  ~FileQueueEvaluator() override {
    for (auto& w : workers_) w.request_stop();
  }

  FileQueueEvaluator(const FileQueueEvaluator&) = delete;
  FileQueueEvaluator& operator=(const FileQueueEvaluator&) = delete;

  std::vector<EvalResult> evaluate(std::span<const EvalJob> jobs) override {
    filequeue_submit(root_, jobs);
    std::vector<std::uint64_t> ids;
    for (const auto& j : jobs) ids.push_back(j.job_id);
    return filequeue_collect(root_, ids, opts_.timeout, opts_.poll);
  }

  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  Options opts_;
  ObjectiveRegistry registry_;
  std::vector<std::jthread> workers_;
};

}  // namespace hybridevo
