#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "epibound/bounds.hpp"
#include "epibound/divergences.hpp"
#include "epibound/errors.hpp"
#include "epibound/oracle.hpp"

using namespace epibound;

namespace {

FOD cat(std::vector<double> p) { return FOD::categorical(std::move(p)); }

ModelClass binary_grid() { return ModelClass::grid(CategoricalGrid{2, 4}); }

TaskDistribution two_task() {
  return TaskDistribution::finite({{cat({0.3, 0.7}), 0.5}, {cat({0.5, 0.5}), 0.5}});
}

// Worked binary instance: grid model, predictor cat[.25,.75], source the
// two-task example (barycenter cat[.4,.6]), target point mass cat[.6,.4].
BoundInputs worked(double alpha = 0.15) {
  BoundInputs in{binary_grid(), cat({0.25, 0.75}), two_task(), TaskDistribution::point_mass(cat({0.6, 0.4}))};
  in.alpha = alpha;
  return in;
}

}  // namespace

TEST(ModelClass, GridEnumeration) {
  const auto g = binary_grid();
  ASSERT_EQ(g.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(g.member(i).mass(0), 0.25 * i, 1e-15);
  EXPECT_EQ(ModelClass::grid(CategoricalGrid{3, 2}).size(), 6u);
  EXPECT_EQ(g.find(cat({0.5, 0.5})), std::optional<std::size_t>(2));
  EXPECT_FALSE(g.find(cat({0.4, 0.6})));
  const auto gg = ModelClass::grid(GaussianGrid{-1.0, 1.0, 0.5, 1.0, 2.0, 0.5});
  EXPECT_EQ(gg.size(), 15u);
  EXPECT_NEAR(gg.member(1).as_gaussian()->mean, -0.5, 1e-15);
  EXPECT_THROW(ModelClass::explicit_members({}), InvalidModelClass);
  EXPECT_THROW(ModelClass::explicit_members({cat({1, 0}), cat({1, 0, 0})}), InvalidModelClass);
}

TEST(Bounds, BestApproximationExamples) {
  const auto b = best_approximation(binary_grid(), cat({0.4, 0.6}));
  EXPECT_NEAR(b.member.mass(0), 0.5, 1e-15);
  EXPECT_NEAR(b.bias, 0.1, 1e-15);
  const auto exact = best_approximation(binary_grid(), cat({0.25, 0.75}));
  EXPECT_EQ(exact.bias, 0.0);
  const auto forced = best_approximation(ModelClass::explicit_members({cat({0, 1})}), cat({1, 0}));
  EXPECT_EQ(forced.bias, 1.0);
  // Ties go to the lowest index: 0.375 is equidistant from 0.25 and 0.5.
  EXPECT_EQ(best_approximation(binary_grid(), cat({0.375, 0.625})).index, 1u);
}

TEST(Bounds, TermExamples) {
  EXPECT_EQ(convergence_gap(cat({0.5, 0.5}), cat({0.5, 0.5})), 0.0);
  EXPECT_NEAR(convergence_gap(cat({0.25, 0.75}), cat({0.5, 0.5})), 0.25, 1e-15);
  EXPECT_NEAR(convergence_gap(FOD::gaussian(0, 1), FOD::gaussian(0.5, 1)), 2 * normal_cdf(0.25) - 1, 1e-15);
  EXPECT_NEAR(2 * normal_cdf(0.25) - 1, 0.1974, 1e-4);

  EXPECT_EQ(distribution_shift(two_task(), two_task()), 0.0);
  EXPECT_NEAR(distribution_shift(two_task(), TaskDistribution::point_mass(cat({0.6, 0.4}))), 0.2, 1e-15);
  EXPECT_EQ(distribution_shift(TaskDistribution::point_mass(cat({1, 0})), TaskDistribution::point_mass(cat({0, 1}))),
            1.0);

  EXPECT_NEAR(distribution_shift_learner(cat({0.5, 0.5}), cat({0.6, 0.4}), 0.1), 0.0, 1e-15);
  EXPECT_EQ(distribution_shift_learner(cat({0.5, 0.5}), cat({0.5, 0.5}), 0.0), 0.0);
  EXPECT_NEAR(distribution_shift_learner(cat({0.5, 0.5}), cat({0.55, 0.45}), 0.1), -0.05, 1e-15);

  EXPECT_EQ(epistemic_error(cat({0.6, 0.4}), cat({0.6, 0.4})), 0.0);
  EXPECT_NEAR(epistemic_error(cat({0.25, 0.75}), cat({0.6, 0.4})), 0.35, 1e-15);
  EXPECT_LE(0.35, 0.01 + 0.1 + 0.25 + 0.2);

  EXPECT_NEAR(chebyshev_delta(two_task(), 0.15), 0.01 / 0.0225, 1e-12);
  EXPECT_EQ(chebyshev_delta(TaskDistribution::point_mass(cat({0.3, 0.7})), 0.2), 0.0);
  EXPECT_NEAR(chebyshev_delta(two_task(), 0.05), 4.0, 1e-12);
  EXPECT_THROW(chebyshev_delta(two_task(), 0.0), InvalidArgument);
}

TEST(Bounds, TaskDistributionDistances) {
  const auto a = two_task();
  const auto b = TaskDistribution::finite({{cat({0.3, 0.7}), 0.8}, {cat({0.5, 0.5}), 0.2}});
  EXPECT_NEAR(task_distribution_tv(a, b), 0.3, 1e-15);
  EXPECT_NEAR(task_neighborhood_radius(a, TaskDistribution::point_mass(cat({0.6, 0.4}))), 0.1, 1e-15);
  EXPECT_EQ(task_neighborhood_radius(a, b), 0.0);
}

TEST(Bounds, Thm1WorkedInstance) {
  const auto r = evaluate_bound(Statement::thm1, worked());
  EXPECT_NEAR(r.B, 0.1, 1e-15);
  EXPECT_NEAR(r.C, 0.25, 1e-15);
  EXPECT_NEAR(r.D, 0.2, 1e-15);
  EXPECT_NEAR(r.margin, 0.70, 1e-12);
  EXPECT_EQ(r.delta, 0.0);
  EXPECT_NEAR(evaluate_bound(Statement::cor_l1, worked()).margin, 1.40, 1e-12);
}

TEST(Bounds, Lemma1NoShift) {
  BoundInputs in{binary_grid(), cat({0.4, 0.6}), two_task(), two_task()};
  in.model = ModelClass::explicit_members({cat({0.4, 0.6}), cat({0.1, 0.9})});
  in.alpha = 0.15;
  const auto r = evaluate_bound(Statement::lemma1, in);
  EXPECT_NEAR(r.margin, 0.15, 1e-15);
  EXPECT_NEAR(r.delta, 0.4444444444444444, 1e-12);
}

TEST(Bounds, PreconditionsAreChecked) {
  // Shift present.
  EXPECT_THROW(evaluate_bound(Statement::lemma2, worked()), PreconditionViolated);
  // Predictor outside the model class.
  auto in = worked();
  in.predictor = cat({0.3, 0.7});
  try {
    evaluate_bound(Statement::thm1, in);
    FAIL();
  } catch (const PreconditionViolated& e) {
    EXPECT_EQ(e.which(), Assumption::predictor_in_model);
  }
  // Neighborhood statements need epsilon and the bounds.
  EXPECT_THROW(evaluate_bound(Statement::cor_eps, worked()), PreconditionViolated);
  // Target not second-order bounded.
  auto deg = worked();
  deg.target = TaskDistribution::point_mass(cat({1, 0}));
  EXPECT_THROW(evaluate_bound(Statement::thm1, deg), PreconditionViolated);
  deg.allow_unbounded_tasks = true;
  EXPECT_NO_THROW(evaluate_bound(Statement::thm1, deg));
  EXPECT_THROW(evaluate_bound(Statement::thm1, worked(0.0)), InvalidArgument);
}

TEST(Bounds, NeighborhoodStatements) {
  BoundInputs in = worked(0.2);
  in.target = TaskDistribution::finite({{cat({0.35, 0.65}), 0.5}, {cat({0.5, 0.5}), 0.5}});
  in.epsilon = 0.05;
  const auto r = evaluate_bound(Statement::cor_eps, in);
  const double bS = 0.3, bT = 0.5;
  EXPECT_NEAR(r.delta, (1 - bT) / (bS * 0.04) * (0.01 + std::pow(0.2 + 0.05, 2)), 1e-12);
  EXPECT_NEAR(r.margin, 0.2 + r.B + r.C + r.D, 1e-12);
  in.epsilon = 0.01;
  EXPECT_THROW(evaluate_bound(Statement::cor_eps, in), PreconditionViolated);

  BoundInputs d = worked(0.2);
  d.target = TaskDistribution::finite({{cat({0.3, 0.7}), 0.6}, {cat({0.5, 0.5}), 0.4}});
  d.epsilon = 0.1;
  const auto rd = evaluate_bound(Statement::cor_eps_dist, d);
  EXPECT_NEAR(rd.delta, (1 - 0.4) / (0.3 * 0.04) * (0.01 + 0.01), 1e-12);
  d.epsilon = 0.05;
  EXPECT_THROW(evaluate_bound(Statement::cor_eps_dist, d), PreconditionViolated);
}

TEST(BoundProperties, MarginReDerivableAndDeltaMonotone) {
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    for (auto c : {InstanceConstraint::none, InstanceConstraint::task_neighborhood,
                   InstanceConstraint::distribution_neighborhood}) {
      OracleConfig cfg;
      cfg.constraint = c;
      cfg.bayesian = seed % 2;
      const auto inst = generate_instance(derive_seed(seed, static_cast<int>(c)), cfg);
      for (Statement s : kAllStatements) {
        double prev = INFINITY;
        for (double alpha : {0.05, 0.1, 0.2, 0.4}) {
          BoundReport r;
          try {
            r = evaluate_bound(s, bound_inputs(inst, alpha));
          } catch (const PreconditionViolated&) {
            break;
          }
          ++checked;
          EXPECT_NEAR(recompute_margin(r), r.margin, 1e-12);
          if (r.delta > 0) {
            EXPECT_LT(r.delta, prev);
          }
          prev = r.delta;
        }
      }
    }
  }
  EXPECT_GT(checked, 5000u);
}

TEST(BoundProperties, CorEpsDeltaNondecreasingInEpsilon) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    OracleConfig cfg;
    cfg.constraint = InstanceConstraint::task_neighborhood;
    const auto inst = generate_instance(seed, cfg);
    auto in = bound_inputs(inst, 0.2);
    double prev = -1.0;
    for (double grow : {0.0, 0.05, 0.1, 0.3}) {
      in.epsilon = *inst.epsilon + grow;
      const auto r = evaluate_bound(Statement::cor_eps, in);
      EXPECT_GE(r.delta, prev);
      prev = r.delta;
    }
  }
}

TEST(BoundProperties, LearnerShiftNeverExceedsShift) {
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const auto inst = generate_instance(derive_seed(99, seed));
    BoundInputs in = bound_inputs(inst, 0.1);
    in.allow_unbounded_tasks = true;
    const auto r1 = evaluate_bound(Statement::thm1, in);
    const auto r2 = evaluate_bound(Statement::thm2, in);
    EXPECT_GE(r1.D - r1.D_learner, -1e-10);
    EXPECT_LE(r2.margin, r1.margin + 1e-12);
  }
}

TEST(Bounds, StatementNames) {
  for (Statement s : kAllStatements) EXPECT_EQ(statement_from_string(to_string(s)), s);
  EXPECT_THROW(statement_from_string("thm9"), InvalidArgument);
}
