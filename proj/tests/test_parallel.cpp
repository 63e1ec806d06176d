#include <gtest/gtest.h>

#include <atomic>
#include <set>
#include <thread>

#include "hybridevo/hybrid.hpp"
#include "hybridevo/parallel.hpp"
#include "hybridevo/problems.hpp"
#include "test_util.hpp"

using namespace hybridevo;
using namespace std::chrono_literals;

namespace {

std::vector<EvalJob> rastrigin_jobs(const Objective& f, std::size_t n, std::uint64_t first_id = 1) {
  RngStream rng(17);
  std::vector<EvalJob> jobs;
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> x(f.dimension());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(f.bounds().lower(i), f.bounds().upper(i));
    jobs.push_back({first_id + k, ControlVector(std::move(x)), f.id()});
  }
  return jobs;
}

std::vector<double> values(const std::vector<EvalResult>& rs) {
  std::vector<double> v;
  for (const auto& r : rs) v.push_back(r.value);
  return v;
}

std::size_t count_files(const std::filesystem::path& dir, const std::string& suffix) {
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().string().ends_with(suffix)) ++n;
  return n;
}

}  // namespace

TEST(EvaluateBatch, WorkerCountDoesNotChangeValues) {
  const auto f = make_rastrigin(5);
  const auto jobs = rastrigin_jobs(f, 40);
  const auto one = evaluate_batch(jobs, f, 1);
  const auto eight = evaluate_batch(jobs, f, 8);
  EXPECT_EQ(values(one), values(eight));
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    EXPECT_EQ(one[k].job_id, jobs[k].job_id);
    EXPECT_EQ(one[k].value, -rastrigin_cost(jobs[k].x.span()));
  }
}

TEST(EvaluateBatch, EmptyBatch) {
  const auto f = make_rastrigin(2);
  EXPECT_TRUE(evaluate_batch({}, f, 4).empty());
}

TEST(EvaluateBatch, ResultsOrderedById) {
  const auto f = make_rastrigin(2);
  auto jobs = rastrigin_jobs(f, 20);
  std::reverse(jobs.begin(), jobs.end());
  const auto rs = evaluate_batch(jobs, f, 4);
  for (std::size_t k = 0; k < rs.size(); ++k) EXPECT_EQ(rs[k].job_id, k + 1);
}

TEST(EvaluateBatch, FailureNamesLowestFailingJob) {
  const Objective f("picky", Bounds::uniform(1, -10, 10), [](std::span<const double> x) {
    if (x[0] > 0) throw std::runtime_error("boom");
    return x[0];
  });
  std::vector<EvalJob> jobs;
  for (int k = 1; k <= 30; ++k) jobs.push_back({std::uint64_t(k), ControlVector{k % 7 == 0 ? 1.0 : -1.0}, "picky"});
  for (std::size_t w : {1u, 4u}) {
    try {
      evaluate_batch(jobs, f, w);
      FAIL();
    } catch (const EvaluationError& e) {
      EXPECT_EQ(e.job_id(), 7u);
      EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
    }
  }
}

TEST(EvaluateBatch, RejectsForeignObjectiveAndZeroWorkers) {
  const auto f = make_rastrigin(2);
  auto jobs = rastrigin_jobs(f, 3);
  EXPECT_THROW(evaluate_batch(jobs, f, 0), std::invalid_argument);
  jobs[1].objective_id = "sphere;d=2;bound=10";
  EXPECT_THROW(evaluate_batch(jobs, f, 2), EvaluationError);
}

TEST(EvaluateBatch, ThroughputScalesSmoke) {
  const Objective slow("slow", Bounds::uniform(1, 0, 1), [](std::span<const double> x) {
    std::this_thread::sleep_for(20ms);
    return x[0];
  });
  std::vector<EvalJob> jobs;
  for (int k = 1; k <= 16; ++k) jobs.push_back({std::uint64_t(k), ControlVector{0.5}, "slow"});
  const auto t0 = std::chrono::steady_clock::now();
  evaluate_batch(jobs, slow, 4);
  const auto dt = std::chrono::steady_clock::now() - t0;
  EXPECT_LT(dt, (16 / 4 + 1) * 20ms * 1.5);
}

// ---------------------------------------------------------------------------
// File queue

TEST(FileQueue, TaskRoundTrip) {
  const auto f = make_rastrigin(4);
  for (const auto& j : rastrigin_jobs(f, 10)) {
    const auto text = filequeue::render_task(j);
    EXPECT_EQ(text.back(), '\n');
    EXPECT_EQ(filequeue::parse_task(j.job_id, text), j);
  }
}

TEST(FileQueue, SubmitWritesOneFilePerJobAndRejectsDuplicates) {
  testutil::TempDir q("fq");
  filequeue::create_layout(q.path());
  const auto f = make_rastrigin(2);
  const auto jobs = rastrigin_jobs(f, 3);
  filequeue_submit(q.path(), jobs);
  for (int k = 1; k <= 3; ++k)
    EXPECT_TRUE(std::filesystem::exists(q / ("pending/job_" + std::to_string(k) + ".task")));
  EXPECT_EQ(count_files(q / "pending", ""), 3u);
  EXPECT_THROW(filequeue_submit(q.path(), std::vector<EvalJob>{jobs[1]}), std::invalid_argument);
  const auto more = rastrigin_jobs(f, 2, 10);
  EXPECT_THROW(filequeue_submit(q.path(), std::vector<EvalJob>{more[0], more[0]}), std::invalid_argument);
  EXPECT_FALSE(std::filesystem::exists(q / "pending/job_10.task"));
}

TEST(FileQueue, SubmitNeedsLayout) {
  testutil::TempDir q("fq");
  const auto f = make_rastrigin(2);
  EXPECT_ANY_THROW(filequeue_submit(q.path(), rastrigin_jobs(f, 1)));
}

TEST(FileQueue, OneJobOneWorkerMatchesDirectCall) {
  testutil::TempDir q("fq");
  filequeue::create_layout(q.path());
  const auto f = make_rastrigin(3);
  const auto jobs = rastrigin_jobs(f, 1, 5);
  filequeue_submit(q.path(), jobs);
  ObjectiveRegistry reg;
  reg.add(f);
  EXPECT_EQ(filequeue_process_one(q.path(), reg), 5u);
  EXPECT_FALSE(filequeue_process_one(q.path(), reg).has_value());
  const auto text = testutil::slurp(q / "done/job_5.result");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
  EXPECT_EQ(parse_real(text), f(jobs[0].x));
  EXPECT_EQ(count_files(q / "running", ""), 0u);
  const std::vector<std::uint64_t> ids{5};
  const auto rs = filequeue_collect(q.path(), ids, 1s, 1ms);
  ASSERT_EQ(rs.size(), 1u);
  EXPECT_EQ(rs[0].value, f(jobs[0].x));
  EXPECT_FALSE(std::filesystem::exists(q / "done/job_5.result"));
}

TEST(FileQueue, UnknownObjectiveAndMalformedTaskWriteErrorsAndQueueContinues) {
  testutil::TempDir q("fq");
  filequeue::create_layout(q.path());
  const auto f = make_rastrigin(2);
  testutil::spit(q / "pending/job_1.task", "not an id\n1,2\n");
  testutil::spit(q / "pending/job_2.task", "garbage without newline");
  testutil::spit(q / "pending/job_3.task", f.id() + "\n1,abc\n");
  filequeue_submit(q.path(), rastrigin_jobs(f, 1, 4));
  ObjectiveRegistry reg(objective_from_id);
  for (int k = 0; k < 4; ++k) EXPECT_TRUE(filequeue_process_one(q.path(), reg).has_value());
  EXPECT_TRUE(std::filesystem::exists(q / "done/job_1.error"));
  EXPECT_TRUE(std::filesystem::exists(q / "done/job_2.error"));
  EXPECT_TRUE(std::filesystem::exists(q / "done/job_3.error"));
  EXPECT_TRUE(std::filesystem::exists(q / "done/job_4.result"));
  EXPECT_NE(testutil::slurp(q / "done/job_1.error").find("unknown objective"), std::string::npos);

  const std::vector<std::uint64_t> ids{1, 4};
  try {
    filequeue_collect(q.path(), ids, 1s, 1ms);
    FAIL();
  } catch (const EvaluationError& e) {
    EXPECT_EQ(e.job_id(), 1u);
  }
}

TEST(FileQueue, IgnoresStrayFiles) {
  testutil::TempDir q("fq");
  filequeue::create_layout(q.path());
  testutil::spit(q / "pending/readme.txt", "x");
  testutil::spit(q / "pending/job_x.task", "x");
  ObjectiveRegistry reg(objective_from_id);
  EXPECT_FALSE(filequeue_process_one(q.path(), reg).has_value());
}

TEST(FileQueue, TwoWorkersRacingOnOneJobProduceOneResult) {
  const auto f = make_rastrigin(2);
  for (int trial = 0; trial < 20; ++trial) {
    testutil::TempDir q("race");
    filequeue::create_layout(q.path());
    filequeue_submit(q.path(), rastrigin_jobs(f, 1));
    ObjectiveRegistry reg;
    reg.add(f);
    std::atomic<int> processed{0};
    std::atomic<bool> go{false};
    auto worker = [&] {
      while (!go.load()) {
      }
      if (filequeue_process_one(q.path(), reg)) ++processed;
    };
    std::thread a(worker), b(worker);
    go = true;
    a.join();
    b.join();
    EXPECT_EQ(processed.load(), 1);
    EXPECT_EQ(count_files(q / "done", ".result"), 1u);
  }
}

TEST(FileQueue, ConcurrentWorkersLoseAndDuplicateNothing) {
  testutil::TempDir q("many");
  filequeue::create_layout(q.path());
  const auto f = make_rastrigin(3);
  const auto jobs = rastrigin_jobs(f, 200);
  filequeue_submit(q.path(), jobs);
  ObjectiveRegistry reg;
  reg.add(f);
  std::mutex mu;
  std::multiset<std::string> seen;
  WorkerOptions wo{1ms, [&](const std::string& m) {
                     std::lock_guard lock(mu);
                     seen.insert(m);
                   }};
  {
    std::vector<std::jthread> ws;
    for (int k = 0; k < 4; ++k) ws.emplace_back([&](std::stop_token st) { filequeue_worker(q.path(), reg, st, wo); });
    std::vector<std::uint64_t> ids;
    for (const auto& j : jobs) ids.push_back(j.job_id);
    const auto rs = filequeue_collect(q.path(), ids, 30s, 1ms);
    ASSERT_EQ(rs.size(), 200u);
    for (std::size_t k = 0; k < rs.size(); ++k) {
      EXPECT_EQ(rs[k].job_id, k + 1);
      EXPECT_EQ(rs[k].value, f(jobs[k].x));
    }
  }
  EXPECT_EQ(seen.size(), 200u);
  EXPECT_EQ(std::set<std::string>(seen.begin(), seen.end()).size(), 200u);
}

TEST(FileQueue, CollectOrdersOutOfOrderArrivals) {
  testutil::TempDir q("order");
  filequeue::create_layout(q.path());
  std::jthread writer([&] {
    for (int id : {3, 1, 2}) {
      std::this_thread::sleep_for(5ms);
      filequeue::write_atomic(q / ("done/job_" + std::to_string(id) + ".result"), std::to_string(id * 10) + "\n");
    }
  });
  const std::vector<std::uint64_t> ids{2, 3, 1};
  const auto rs = filequeue_collect(q.path(), ids, 5s, 1ms);
  ASSERT_EQ(rs.size(), 3u);
  EXPECT_EQ(rs[0].job_id, 1u);
  EXPECT_EQ(rs[0].value, 10.0);
  EXPECT_EQ(rs[2].value, 30.0);
}

TEST(FileQueue, TimeoutNamesMissingIds) {
  testutil::TempDir q("timeout");
  filequeue::create_layout(q.path());
  filequeue::write_atomic(q / "done/job_1.result", "1.5\n");
  const std::vector<std::uint64_t> ids{1, 2};
  try {
    filequeue_collect(q.path(), ids, 30ms, 5ms);
    FAIL();
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("timed out"), std::string::npos);
    EXPECT_NE(msg.find('2'), std::string::npos);
  }
}

TEST(FileQueue, RegistryRebuildsObjectivesFromIds) {
  ProblemSpec p;
  p.kind = ProblemKind::kProxyNpv;
  p.n_realizations = 3;
  const auto direct = p.build();
  ObjectiveRegistry reg(objective_from_id);
  const auto rebuilt = reg.find(direct.id());
  ASSERT_TRUE(rebuilt.has_value());
  const std::vector<double> x(72, 200.0);
  std::vector<double> mid;
  for (std::size_t i = 0; i < 72; ++i) mid.push_back(i < 44 ? 170.0 : 230.0);
  EXPECT_EQ((*rebuilt)(mid), direct(mid));
  EXPECT_FALSE(reg.find("nonsense;d=2").has_value());
}

// ---------------------------------------------------------------------------
// End-to-end determinism across backends

TEST(Determinism, HistoryIndependentOfWorkersAndBackend) {
  ProblemSpec p;
  p.kind = ProblemKind::kProxyWcf;
  const auto obj = p.build();
  const OptimizationPlan plan{{{EngineKind::kGa, 4, 12}, {EngineKind::kCmaes, 3, 12}}, obj, 11, {}};
  std::string reference;
  for (std::size_t w : {1u, 4u, 8u}) {
    PoolEvaluator e(obj, w);
    const auto csv = run(plan, e).to_csv();
    if (reference.empty()) reference = csv;
    EXPECT_EQ(csv, reference) << "workers " << w;
  }
  testutil::TempDir q("det");
  FileQueueEvaluator fq(q.path(), {1ms, 30s, 3}, obj);
  EXPECT_EQ(run(plan, fq).to_csv(), reference);
}
