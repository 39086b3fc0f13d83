#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "epibound/divergences.hpp"
#include "epibound/errors.hpp"
#include "epibound/oracle.hpp"
#include "epibound/serialization.hpp"

using namespace epibound;

namespace {

FOD cat(std::vector<double> p) { return FOD::categorical(std::move(p)); }

TaskDistribution two_task() {
  return TaskDistribution::finite({{cat({0.3, 0.7}), 0.5}, {cat({0.5, 0.5}), 0.5}});
}

OracleInstance manual(TaskDistribution source, TaskDistribution target, FOD predictor, std::vector<FOD> members) {
  const std::size_t m = predictor.outcomes();
  return OracleInstance{.outcomes = m,
                        .source = std::move(source),
                        .target = std::move(target),
                        .model = ModelClass::explicit_members(std::move(members)),
                        .predictor = std::move(predictor)};
}

}  // namespace

TEST(Oracle, GeneratorSmoke) {
  OracleConfig cfg;
  cfg.min_outcomes = cfg.max_outcomes = 2;
  const auto inst = generate_instance(1, cfg);
  EXPECT_EQ(inst.outcomes, 2u);
  EXPECT_TRUE(inst.source.is_finite());
  EXPECT_TRUE(inst.model.find(inst.predictor));
  EXPECT_EQ(inst.predictor.outcomes(), 2u);
  const auto again = generate_instance(1, cfg);
  EXPECT_EQ(dump(instance_to_json(inst, 0.1)), dump(instance_to_json(again, 0.1)));
}

TEST(Oracle, GeneratorConstraints) {
  for (std::uint64_t s = 0; s < 500; ++s) {
    OracleConfig dist;
    dist.constraint = InstanceConstraint::distribution_neighborhood;
    dist.epsilon = 0.05;
    const auto d = generate_instance(s, dist);
    EXPECT_LE(task_distribution_tv(d.source, d.target), 0.05);

    OracleConfig tn;
    tn.constraint = InstanceConstraint::task_neighborhood;
    const auto t = generate_instance(s, tn);
    EXPECT_LE(task_neighborhood_radius(t.source, t.target), *t.epsilon + 1e-12);

    OracleConfig ns;
    ns.constraint = InstanceConstraint::no_shift;
    const auto n = generate_instance(s, ns);
    EXPECT_TRUE(approx_equal(n.source, n.target));

    OracleConfig pl;
    pl.constraint = InstanceConstraint::perfect_learning;
    const auto p = generate_instance(s, pl);
    EXPECT_LE(tv_exact(p.predictor, barycenter(p.source)), 1e-12);
  }
  OracleConfig bad;
  bad.max_outcomes = 13;
  EXPECT_THROW(generate_instance(0, bad), GenerationFailure);
}

TEST(Oracle, Lemma1TwoTaskInstance) {
  const FOD bary = cat({0.4, 0.6});
  const auto inst = manual(two_task(), two_task(), bary, {bary, cat({0.9, 0.1})});
  const auto c = verify_statement(inst, Statement::lemma1, 0.15);
  ASSERT_FALSE(c.skipped) << c.skip_reason;
  EXPECT_EQ(c.exceedance, 0.0);
  EXPECT_NEAR(c.slack, 0.4444444444444444, 1e-12);
  EXPECT_FALSE(c.violated);
}

TEST(Oracle, MarginAboveOneNeverExceeded) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto inst = generate_instance(s);
    BoundInputs in = bound_inputs(inst, 1.0);
    in.allow_unbounded_tasks = true;
    const auto r = evaluate_bound(Statement::thm1, in);
    EXPECT_EQ(exact_exceedance(inst, r), 0.0);
  }
}

TEST(Oracle, Thm2ExceedanceAtLeastThm1) {
  std::size_t compared = 0;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const auto inst = generate_instance(derive_seed(3, s));
    for (double a : {0.05, 0.2}) {
      const auto c1 = verify_statement(inst, Statement::thm1, a);
      const auto c2 = verify_statement(inst, Statement::thm2, a);
      if (c1.skipped || c2.skipped) continue;
      EXPECT_LE(c2.report.margin, c1.report.margin + 1e-12);
      EXPECT_GE(c2.exceedance, c1.exceedance);
      ++compared;
    }
  }
  EXPECT_GT(compared, 100u);
}

TEST(Oracle, LoosenessExamples) {
  const FOD q = cat({0.4, 0.6});
  EXPECT_EQ(looseness(manual(TaskDistribution::point_mass(q), TaskDistribution::point_mass(q), q, {q})), 0.0);
  const auto worked = manual(two_task(), TaskDistribution::point_mass(cat({0.6, 0.4})), cat({0.25, 0.75}),
                             {cat({0, 1}), cat({0.25, 0.75}), cat({0.5, 0.5}), cat({0.75, 0.25}), cat({1, 0})});
  EXPECT_NEAR(looseness(worked), -0.10, 1e-12);
}

TEST(Oracle, LoosenessLargestForCollinearPredictor) {
  // Source barycenter b = (0.5, 0.5), target point mass t = (0.9, 0.1),
  // predictors p(s) = (s, 1 - s) with best member b. Looseness is
  // |s - 0.9| - |s - 0.5| - 0.4: zero (the largest value) when b lies between
  // p and t, strictly negative once p moves past b toward t.
  const FOD b = cat({0.5, 0.5});
  const auto target = TaskDistribution::point_mass(cat({0.9, 0.1}));
  for (int k = 0; k <= 100; ++k) {
    const double s = k / 100.0;
    const FOD p = cat({s, 1 - s});
    const double l = looseness(manual(TaskDistribution::point_mass(b), target, p, {b, p}));
    EXPECT_NEAR(l, std::abs(s - 0.9) - std::abs(s - 0.5) - 0.4, 1e-12);
    if (k <= 50) {
      EXPECT_NEAR(l, 0.0, 1e-12);
    } else {
      EXPECT_LT(l, -1e-3);
    }
  }
}

TEST(Oracle, FlagsSupOverEventsCounterexample) {
  // Four equally likely tasks (1-t)u + t e_k: each sits at TV 0.75 t from
  // the barycenter u, while the largest event variance is t^2 / 4.
  const double t = 0.4;
  std::vector<WeightedTask> tasks;
  for (int k = 0; k < 4; ++k) {
    std::vector<double> p(4, (1 - t) / 4);
    p[k] += t;
    tasks.push_back({cat(p), 0.25});
  }
  const auto src = TaskDistribution::finite(tasks);
  const FOD u = cat({0.25, 0.25, 0.25, 0.25});
  const auto inst = manual(src, src, u, {u});
  const double alpha = 0.75 * t;
  const auto c = verify_statement(inst, Statement::lemma1, alpha);
  ASSERT_FALSE(c.skipped) << c.skip_reason;
  EXPECT_NEAR(c.report.delta, (t * t / 4) / (alpha * alpha), 1e-12);
  EXPECT_EQ(c.exceedance, 1.0);
  EXPECT_TRUE(c.violated);
}

TEST(Oracle, DecompositionInequalities) {
  std::size_t checks = 0;
  for (std::uint64_t s = 0; s < 3000; ++s) {
    OracleConfig cfg;
    cfg.constraint = static_cast<InstanceConstraint>(s % 5);
    cfg.bayesian = (s / 5) % 2;
    const auto inst = generate_instance(derive_seed(12, s), cfg);
    for (const auto& l : check_lemmas(inst)) {
      EXPECT_GE(l.slack, -1e-10) << l.name << " seed " << inst.seed;
      ++checks;
    }
  }
  EXPECT_GT(checks, 9000u);
}

TEST(Oracle, TransferFamiliesAreMonotone) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto inst = generate_instance(derive_seed(5, s));
    const auto pos = transfer_family(inst, s, TransferGeometry::positive);
    const auto neg = transfer_family(inst, s, TransferGeometry::negative);
    EXPECT_EQ(pos.errors.size(), 101u);
    EXPECT_EQ(pos.violations, 0u);
    EXPECT_EQ(neg.violations, 0u);
    EXPECT_GT(pos.errors.front(), pos.errors.back());
    EXPECT_LT(neg.errors.front(), neg.errors.back());
  }
}

TEST(Oracle, RunIsIndependentOfThreadCount) {
  OracleRunConfig cfg;
  cfg.instances = 40;
  cfg.transfer_instances = 5;
  cfg.threads = 1;
  const std::string serial = dump(to_json(run_oracle(cfg)));
  cfg.threads = 4;
  const std::string parallel = dump(to_json(run_oracle(cfg)));
  EXPECT_EQ(serial, parallel);
}

TEST(Oracle, StatsRecordWorstViolation) {
  CheckStats s;
  s.record(0.2, false, 1, 0.1);
  s.record(-0.3, true, 7, 0.25);
  CheckStats o;
  o.record(-0.1, true, 9, 0.05);
  s.merge(o);
  EXPECT_EQ(s.trials, 3u);
  EXPECT_EQ(s.violations, 2u);
  EXPECT_EQ(s.worst_seed, 7u);
  EXPECT_NEAR(s.worst_excess, 0.3, 1e-15);
  EXPECT_NEAR(s.min_slack, -0.3, 1e-15);
  EXPECT_NEAR(s.max_slack, 0.2, 1e-15);
}
