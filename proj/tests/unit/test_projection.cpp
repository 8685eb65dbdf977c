#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include "fixtures.hpp"
#include "wproj/error.hpp"
#include "wproj/projection.hpp"

namespace wproj {
namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::Config;
}

GramSystem gram_of(Eigen::MatrixXd g) {
  GramSystem s;
  s.matrix = std::move(g);
  return s;
}

Eigen::MatrixXd random_psd(Rng& rng, Index j, Index rank) {
  const Matrix a = standard_normal(rng, j, rank);
  return a * a.transpose();
}

std::vector<DiscreteMeasure> random_controls(Rng& rng, int j, Index n, Index d) {
  std::vector<DiscreteMeasure> out;
  for (int k = 0; k < j; ++k) {
    Matrix x = standard_normal(rng, n, d);
    x.array() += 2.0 * rng.normal();
    out.push_back(from_samples(x));
  }
  return out;
}

TEST(AssembleGram, Examples) {
  const auto p0 = std::make_shared<const DiscreteMeasure>(from_samples(Matrix::Zero(1, 2)));
  Matrix e1(1, 2), e2(1, 2);
  e1 << 1, 0;
  e2 << 0, 1;
  const std::vector<TangentField> orthogonal{field_from_map(p0, e1), field_from_map(p0, e2)};
  EXPECT_EQ(assemble_gram(orthogonal, p0->weights(), 1.0).matrix, Eigen::MatrixXd::Identity(2, 2));
  const std::vector<TangentField> same{field_from_map(p0, e1), field_from_map(p0, e1)};
  EXPECT_EQ(assemble_gram(same, p0->weights(), 1.0).matrix, Eigen::MatrixXd::Ones(2, 2));
}

TEST(AssembleGram, MatchesTripleLoop) {
  Rng rng(1);
  const auto p0 = std::make_shared<const DiscreteMeasure>(testing::random_weighted_measure(rng, 25, 3));
  std::vector<TangentField> fields;
  for (int j = 0; j < 4; ++j) fields.push_back(field_from_map(p0, 5.0 * standard_normal(rng, 25, 3)));
  const auto gram = assemble_gram(fields, p0->weights());
  EXPECT_GT(gram.scale, 0.0);
  EXPECT_LE(gram.scale, 1.0);
  for (int j = 0; j < 4; ++j) {
    for (int k = 0; k < 4; ++k) {
      double expected = 0.0;
      for (Index i = 0; i < 25; ++i) {
        for (Index c = 0; c < 3; ++c) {
          expected += p0->weights()[i] * fields[j].displacement(i, c) * fields[k].displacement(i, c);
        }
      }
      EXPECT_NEAR(gram.matrix(j, k), gram.scale * gram.scale * expected, 1e-12 * (1.0 + std::abs(expected)));
      EXPECT_EQ(gram.matrix(j, k), gram.matrix(k, j));
    }
  }
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram.matrix).eigenvalues().minCoeff(), -1e-12);
}

TEST(SimplexQp, IdentityGivesBarycentre) {
  const auto r = solve_simplex_qp(gram_of(Eigen::MatrixXd::Identity(2, 2)));
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.lambda[0], 0.5, 1e-12);
  EXPECT_NEAR(r.lambda[1], 0.5, 1e-12);
  EXPECT_NEAR(r.objective, 0.5, 1e-12);
  EXPECT_TRUE(r.unique);
}

TEST(SimplexQp, ZeroRowPicksThatVertex) {
  Eigen::MatrixXd g(2, 2);
  g << 0, 0, 0, 1;
  const auto r = solve_simplex_qp(gram_of(g));
  EXPECT_NEAR(r.lambda[0], 1.0, 1e-12);
  EXPECT_NEAR(r.lambda[1], 0.0, 1e-12);
  EXPECT_NEAR(r.objective, 0.0, 1e-12);
}

TEST(SimplexQp, SingleControl) {
  const auto r = solve_simplex_qp(gram_of(Eigen::MatrixXd::Constant(1, 1, 3.0)));
  EXPECT_EQ(r.lambda[0], 1.0);
  EXPECT_NEAR(r.objective, 3.0, 1e-15);
}

TEST(SimplexQp, MatchesGridSearch) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Index j = 2 + static_cast<Index>(trial % 2);
    const Eigen::MatrixXd g = random_psd(rng, j, 1 + static_cast<Index>(rng.below(3)));
    const auto r = solve_simplex_qp(gram_of(g));
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.lambda.sum(), 1.0, 1e-12);
    EXPECT_GE(r.lambda.minCoeff(), 0.0);
    const double grid = testing::grid_search_min(g, 1e-3);
    EXPECT_LE(r.objective, grid + 1e-12);
    EXPECT_GE(r.objective, grid - 1e-4 * std::max(1.0, g.trace()));
  }
}

TEST(SimplexQp, KktConditions) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Index j = 2 + static_cast<Index>(rng.below(12));
    const Eigen::MatrixXd g = random_psd(rng, j, 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(j) + 2)));
    const auto r = solve_simplex_qp(gram_of(g));
    ASSERT_TRUE(r.converged);
    const Vector grad = g * r.lambda;
    const double nu = r.lambda.dot(grad);
    const double tol = 1e-7 * g.trace();
    for (Index k = 0; k < j; ++k) {
      EXPECT_GE(grad[k], nu - tol);  // no descent vertex
      if (r.lambda[k] > 1e-9) {
        EXPECT_NEAR(grad[k], nu, tol);  // complementary slackness
      }
    }
    EXPECT_LE(r.kkt_gap, 1e-9 * g.trace() + 1e-15);
  }
}

TEST(SimplexQp, DuplicatedControlsAreNotUnique) {
  Rng rng(4);
  Eigen::MatrixXd a = standard_normal(rng, 3, 3);
  a.row(2) = a.row(1);
  // Controls 1 and 2 coincide; the QP optimum spreads along that edge.
  Eigen::MatrixXd b = a;
  b.row(0).array() += 10.0;
  b.row(1) = -0.5 * a.row(1);
  b.row(2) = b.row(1);
  const Eigen::MatrixXd g = b * b.transpose();
  const auto r = solve_simplex_qp(gram_of(g));
  EXPECT_FALSE(r.unique);
  const auto distinct = solve_simplex_qp(gram_of(Eigen::MatrixXd::Identity(3, 3)));
  EXPECT_TRUE(distinct.unique);
}

TEST(SimplexQp, Deterministic) {
  Rng rng(5);
  const Eigen::MatrixXd g = random_psd(rng, 8, 3);
  const auto a = solve_simplex_qp(gram_of(g));
  const auto b = solve_simplex_qp(gram_of(g));
  EXPECT_EQ(a.lambda, b.lambda);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Project, VariationalInequalityHolds) {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p0 = testing::random_uniform_measure(rng, 40, 2);
    const auto controls = random_controls(rng, 4, 35, 2);
    const auto r = project(p0, controls);
    ASSERT_TRUE(r.converged);
    const double tol = 1e-7 * r.gram.trace() / (r.gram.scale * r.gram.scale);
    const auto vi = variational_inequality_check(p0, r.fields, r.lambda, tol);
    EXPECT_TRUE(vi.pass) << vi.max_slack;
    // Perturbing the weights off the optimum breaks the inequality somewhere
    // unless the perturbation stays on a flat optimal face.
    Vector moved = r.lambda;
    const Index worst = [&] {
      Index k = 0;
      r.lambda.maxCoeff(&k);
      return k;
    }();
    const Index other = (worst + 1) % 4;
    const double shift = 0.5 * moved[worst];
    moved[worst] -= shift;
    moved[other] += shift;
    const auto qp_moved = moved.dot(r.gram.matrix * moved);
    if (qp_moved > r.lambda.dot(r.gram.matrix * r.lambda) + 1e-6 * r.gram.trace()) {
      EXPECT_FALSE(variational_inequality_check(p0, r.fields, moved, tol).pass);
    }
  }
}

TEST(Project, SelfReplication) {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    auto controls = random_controls(rng, 3, 30, 2);
    const std::size_t k = rng.below(3);
    const DiscreteMeasure p0 = controls[k];
    const auto r = project(p0, controls);
    EXPECT_GE(r.lambda[static_cast<Index>(k)], 1.0 - 1e-6);
    EXPECT_LE(r.objective, 1e-6);
    EXPECT_LE(solve_exact(p0, r.projected).cost, 1e-12);
  }
}

TEST(Project, ScalingInvariance) {
  Rng rng(8);
  const auto p0 = testing::random_uniform_measure(rng, 30, 2);
  const auto controls = random_controls(rng, 3, 25, 2);
  const auto base = project(p0, controls);
  for (double c : {1e-3, 1e3}) {
    std::vector<DiscreteMeasure> scaled;
    for (const auto& m : controls) scaled.push_back(with_support(m, c * m.support()));
    const auto r = project(with_support(p0, c * p0.support()), scaled);
    EXPECT_LE((r.lambda - base.lambda).cwiseAbs().maxCoeff(), 1e-6) << c;
    EXPECT_NEAR(r.objective, c * base.objective, 1e-6 * c * base.objective);
  }
}

TEST(Project, PermutationEquivariance) {
  Rng rng(9);
  const auto p0 = testing::random_uniform_measure(rng, 30, 2);
  const auto controls = random_controls(rng, 4, 25, 2);
  const auto base = project(p0, controls);
  std::vector<int> order{2, 0, 3, 1};
  std::vector<DiscreteMeasure> permuted;
  for (int k : order) permuted.push_back(controls[static_cast<std::size_t>(k)]);
  const auto r = project(p0, permuted);
  for (std::size_t k = 0; k < order.size(); ++k) {
    EXPECT_NEAR(r.lambda[static_cast<Index>(k)], base.lambda[order[k]], 1e-9);
  }
}

TEST(Project, SingleControlGetsEverything) {
  Rng rng(10);
  const auto p0 = testing::random_uniform_measure(rng, 20, 2);
  const auto controls = random_controls(rng, 1, 20, 2);
  const auto r = project(p0, controls);
  EXPECT_EQ(r.lambda[0], 1.0);
  EXPECT_NEAR(r.per_control_w2[0], w2_exact(p0, controls[0]), 1e-9);
}

TEST(Project, ResultFields) {
  Rng rng(11);
  const auto p0 = testing::random_uniform_measure(rng, 20, 2);
  const auto controls = random_controls(rng, 3, 18, 2);
  ProjectOptions o;
  o.keep_plans = true;
  o.threads = 2;
  const auto r = project(p0, controls, o);
  EXPECT_EQ(r.n0, 20);
  EXPECT_EQ(r.controls, 3);
  EXPECT_EQ(r.plans.size(), 3u);
  ASSERT_EQ(r.plan_summaries.size(), 3u);
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(r.plan_summaries[j].cost, r.plans[j].cost, 1e-15);
    EXPECT_NEAR(std::sqrt(r.plans[j].cost), r.per_control_w2[j], 1e-12);
  }
  EXPECT_EQ(r.projected.weights(), p0.weights());
  const Matrix v = combined_displacement(r.fields, r.lambda);
  EXPECT_NEAR(r.objective, std::sqrt(l2_inner(p0.weights(), v, v)), 1e-9 * (1.0 + r.objective));
  // Thread count does not change the answer.
  ProjectOptions serial;
  EXPECT_EQ(project(p0, controls, serial).lambda, r.lambda);
}

TEST(Project, EntropicSolver) {
  Rng rng(12);
  const auto p0 = testing::random_uniform_measure(rng, 30, 2);
  const auto controls = random_controls(rng, 3, 30, 2);
  ProjectOptions o;
  o.solver = SolverKind::Entropic;
  o.entropic.epsilon = 0.2;
  o.entropic.tol = 1e-6;
  o.entropic.max_iter = 100000;
  const auto r = project(p0, controls, o);
  const auto exact = project(p0, controls);
  EXPECT_TRUE(r.converged);
  EXPECT_LE((r.lambda - exact.lambda).cwiseAbs().maxCoeff(), 0.05);
  for (const auto& s : r.plan_summaries) EXPECT_EQ(s.epsilon, 0.2);
}

TEST(Project, Errors) {
  Rng rng(13);
  const auto p0 = testing::random_uniform_measure(rng, 5, 2);
  EXPECT_EQ(code_of([&] { project(p0, std::span<const DiscreteMeasure>{}); }), ErrorCode::EmptyInput);
  const std::vector<DiscreteMeasure> wrong_dim{testing::random_uniform_measure(rng, 5, 3)};
  EXPECT_EQ(code_of([&] { project(p0, wrong_dim); }), ErrorCode::DimensionMismatch);
  ProjectOptions tiny;
  tiny.exact.size_budget = 4;
  const std::vector<DiscreteMeasure> controls{testing::random_uniform_measure(rng, 5, 2)};
  EXPECT_EQ(code_of([&] { project(p0, controls, tiny); }), ErrorCode::PartialFailure);
}

}  // namespace
}  // namespace wproj
