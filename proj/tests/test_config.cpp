#include <gtest/gtest.h>

#include <filesystem>

#include "hybridevo/config.hpp"

using namespace hybridevo;

namespace {

std::string error_key(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.key().empty() ? std::string("<") + e.what() + ">" : e.key();
  }
  return "<no error>";
}

}  // namespace

TEST(Config, DefaultsDumpRoundTrips) {
  const auto text = dump_config(RunConfig::defaults());
  const auto back = parse_config(text);
  EXPECT_EQ(dump_config(back), text);
  EXPECT_NE(text.find("econ.discount = 0.08\n"), std::string::npos);
  EXPECT_NE(text.find("econ.oil_price = 40\n"), std::string::npos);
  EXPECT_NE(text.find("econ.water_prod_cost = -4\n"), std::string::npos);
  EXPECT_NE(text.find("econ.water_inj_cost = -2\n"), std::string::npos);
  EXPECT_NE(text.find("ensemble.n_realizations = 10\n"), std::string::npos);
  EXPECT_NE(text.find("run.population = 40\n"), std::string::npos);
  EXPECT_NE(text.find("queue.poll_ms = 100\n"), std::string::npos);
}

TEST(Config, DefaultPlanIsHundredPlusFifty) {
  const auto cfg = parse_config(dump_config(RunConfig::defaults()));
  ASSERT_EQ(cfg.stages.size(), 2u);
  EXPECT_EQ(cfg.stages[0].engine, EngineKind::kGa);
  EXPECT_EQ(cfg.stages[0].generations, 100u);
  EXPECT_EQ(cfg.stages[1].engine, EngineKind::kCmaes);
  EXPECT_EQ(cfg.stages[1].generations, 50u);
  const auto plan = cfg.plan();
  EXPECT_EQ(plan.budget(), 6000u);
  EXPECT_EQ(plan.simulation_budget(), 60000u);
  EXPECT_EQ(plan.objective.dimension(), 72u);
}

TEST(Config, EmptyTextGivesDefaults) {
  EXPECT_EQ(dump_config(parse_config("")), dump_config(RunConfig::defaults()));
  EXPECT_EQ(dump_config(parse_config("# only a comment\n\n")), dump_config(RunConfig::defaults()));
}

TEST(Config, StageKeysReplaceDefaultPlan) {
  const auto cfg = parse_config("run.population = 20\nstage.1.engine = pso\nstage.1.generations = 7\n");
  ASSERT_EQ(cfg.stages.size(), 1u);
  EXPECT_EQ(cfg.stages[0].engine, EngineKind::kPso);
  EXPECT_EQ(cfg.stages[0].population_size, 20u);
  EXPECT_EQ(cfg.plan().budget(), 140u);
}

TEST(Config, RastriginProblem) {
  const auto cfg = parse_config("problem.kind = rastrigin  # inline comment\nproblem.dimension=2\n");
  const auto plan = cfg.plan();
  EXPECT_EQ(plan.objective.dimension(), 2u);
  EXPECT_EQ(plan.objective.id(), "rastrigin;d=2;bound=5.1200000000000001");
}

TEST(Config, ListAndScalarWellIndices) {
  const auto cfg = parse_config("proxy.producers = 2\nproxy.injectors = 1\nproxy.pi = 10, 20\nproxy.ii = 5\n");
  EXPECT_EQ(cfg.problem.base.pi, (std::vector<double>{10, 20}));
  EXPECT_EQ(cfg.problem.base.ii, (std::vector<double>{5}));
  EXPECT_EQ(cfg.plan().objective.dimension(), 12u);
  EXPECT_EQ(error_key("proxy.pi = 1,2,3\n"), "proxy.pi");
}

TEST(Config, OptionalEngineKeys) {
  const auto cfg = parse_config("ga.mutation_prob_per_gene = 0.2\npso.inertia_final = 0.4\ncmaes.lambda = 40\n");
  EXPECT_EQ(cfg.engines.ga.mutation_prob_per_gene, 0.2);
  EXPECT_EQ(cfg.engines.pso.inertia_final, 0.4);
  EXPECT_EQ(cfg.engines.cmaes.lambda, 40u);
}

TEST(Config, DiagnosticsNameTheKey) {
  EXPECT_EQ(error_key("ga.mutaton_sigma = 0.1\n"), "ga.mutaton_sigma");
  EXPECT_EQ(error_key("run.seed = 1\nrun.seed = 2\n"), "run.seed");
  EXPECT_EQ(error_key("run.seed = -3\n"), "run.seed");
  EXPECT_EQ(error_key("run.seed = \n"), "run.seed");
  EXPECT_EQ(error_key("econ.discount = abc\n"), "econ.discount");
  EXPECT_EQ(error_key("econ.discount = nan\n"), "econ.discount");
  EXPECT_EQ(error_key("run.backend = mpi\n"), "run.backend");
  EXPECT_EQ(error_key("stage.1.engine = de\nstage.1.generations = 3\n"), "stage.1.engine");
  EXPECT_EQ(error_key("stage.1.engine = ga\n"), "stage.1.generations");
  EXPECT_EQ(error_key("stage.1.generations = 0\nstage.1.engine = ga\n"), "stage.1.generations");
  EXPECT_EQ(error_key("stage.1.engine = ga\nstage.1.generations = 2\nstage.3.engine = ga\nstage.3.generations = 2\n"),
            "stage.3.engine");
  EXPECT_EQ(error_key("run.workers = 0\n"), "run.workers");
  EXPECT_EQ(error_key("cmaes.lambda = many\n"), "cmaes.lambda");
  EXPECT_EQ(error_key("ga.crossover_prob = 2\n"), "ga");
  EXPECT_EQ(error_key("ensemble.spread = 1\n"), "ensemble.spread");
  EXPECT_EQ(error_key("proxy.ct_vp = -1\n"), "proxy.ct_vp");
  EXPECT_EQ(error_key("proxy.producers = 0\n"), "proxy.producers");
  EXPECT_EQ(error_key("proxy.inj_bhp_min = 300\n"), "proxy.inj_bhp_min");
  EXPECT_EQ(error_key("problem.kind = ackley\n"), "problem.kind");
}

TEST(Config, MalformedLinesNeverCrash) {
  for (const char* bad : {"=3\n", "just words\n", "a.b.c\n", "problem.kind = ackley\n", "\x01\x02=\xff\n",
                          "problem.dimension = 99999999999999999999999\n", "proxy.pi = ,,,\n"}) {
    EXPECT_THROW(parse_config(bad), ConfigError) << bad;
  }
}

TEST(Config, HybridPresetKeysFromDocs) {
  const auto cfg = parse_config("stage.1.engine=ga\nstage.1.generations=100\nstage.2.engine=cmaes\nstage.2.generations=50\n");
  EXPECT_EQ(cfg.plan().budget(), 6000u);
}

TEST(Config, ShippedConfigsLoad) {
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(HYBRIDEVO_CONFIG_DIR)) {
    if (e.path().extension() != ".cfg") continue;
    ++n;
    EXPECT_NO_THROW(load_config(e.path().string()).plan()) << e.path();
  }
  EXPECT_GE(n, 5u);
}
