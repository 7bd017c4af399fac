// Copyright 2026 The dynident Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"

namespace dynident {
namespace {

using testing::mtm;
using testing::psm;

struct Case {
  RobotModel model;
  ParameterLayout layout;
  BaseReduction red;
  GroundTruth truth;
  FourierTrajectory traj;
  JointLog log;
};

// Exact accelerations, no filtering: the regression is consistent.
Case make_case(const RobotModel& model, std::uint64_t seed, double rate = 50.0) {
  Case c{model, make_layout(model), {}, {}, {}, {}};
  c.red = base_reduction(c.model, c.layout, 1000, 1);
  c.truth = sample_feasible_parameters(c.model, c.layout, seed);
  c.traj = testing::gentle_trajectory(c.model, seed, 0.1, 6);
  c.log = testing::exact_log(c.model, c.layout, c.truth.delta, c.traj, 5.0, 15.0, rate);
  return c;
}

TEST(Weights, InverseRange) {
  Vector omega(6);
  omega << -2, 1, 2, 3, 0, 2;  // joint 1 spans [-2, 2], joint 2 spans [1, 3]
  const Vector w = joint_weights(omega, 2);
  EXPECT_DOUBLE_EQ(w(0), 0.25);
  EXPECT_DOUBLE_EQ(w(1), 0.5);
}

TEST(Weights, ConstantChannelNamesTheMotor) {
  const RobotModel& m = mtm();
  Vector omega = Vector::LinSpaced(21, 0.0, 1.0);
  omega.conservativeResize(7 * 3);
  for (int k = 0; k < 3; ++k) omega(k * 7 + 4) = 0.7;
  try {
    joint_weights(omega, 7, &m);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(m.coupling.motors[4]), std::string::npos) << e.what();
  }
}

TEST(StackProblem, ShapesAndConsistency) {
  const Case c = make_case(mtm(), 3, 20.0);
  const IdentificationProblem p = stack_problem(c.model, c.layout, {c.log});
  EXPECT_EQ(p.joints, 7);
  EXPECT_EQ(p.samples(), c.log.size());
  EXPECT_EQ(p.W.rows(), 7 * c.log.size());
  EXPECT_EQ(p.W.cols(), c.layout.size());
  EXPECT_EQ(p.weights.size(), 7);
  // omega already has the cable torque removed.
  EXPECT_LE((p.W * c.truth.delta - p.omega).cwiseAbs().maxCoeff(), 1e-9 * p.omega.cwiseAbs().maxCoeff());
}

TEST(StackProblem, UnprocessedLogIsRejected) {
  Case c = make_case(testing::pendulum(true), 1, 20.0);
  c.log.ddq.resize(0, 0);
  EXPECT_THROW(stack_problem(c.model, c.layout, {c.log}), ValidationError);
}

TEST(OlsBase, RecoversBaseParametersFromExactData) {
  for (const RobotModel* m : {&mtm(), &psm()}) {
    const Case c = make_case(*m, 5);
    const IdentificationProblem p = stack_problem(c.model, c.layout, {c.log});
    const BaseEstimate est = solve_ols_base(p, c.red);
    const Vector truth_b = c.red.base_parameters(c.truth.delta);
    EXPECT_LE((est.delta_b - truth_b).norm(), 1e-8 * truth_b.norm()) << m->name;
    EXPECT_LE(est.residual, 1e-16 * p.omega.squaredNorm()) << m->name;
  }
}

TEST(OlsBase, IdentityRegressorReturnsData) {
  BaseReduction red;
  red.parameter_count = 3;
  red.independent = {0, 1, 2};
  red.regrouping = Matrix::Zero(3, 0);
  IdentificationProblem p;
  p.joints = 1;
  p.W = Matrix::Identity(3, 3);
  p.omega = Vector::LinSpaced(3, -1.0, 2.0);
  p.weights = Vector::Ones(1);
  EXPECT_LE((solve_ols_base(p, red).delta_b - p.omega).norm(), 1e-14);
}

TEST(OlsBase, DuplicatedRowsGiveSameEstimate) {
  const Case c = make_case(testing::pendulum(true), 2);
  const IdentificationProblem p = stack_problem(c.model, c.layout, {c.log});
  const IdentificationProblem p2 = stack_problem(c.model, c.layout, {c.log, c.log});
  EXPECT_LE((solve_ols_base(p, c.red).delta_b - solve_ols_base(p2, c.red).delta_b).norm(), 1e-10);
}

TEST(OlsBase, EmptyOrDegenerateProblemsAreErrors) {
  const Case c = make_case(testing::pendulum(true), 2);
  IdentificationProblem empty;
  empty.joints = 1;
  empty.W.resize(0, c.layout.size());
  EXPECT_THROW(solve_ols_base(empty, c.red), ValidationError);
  IdentificationProblem p = stack_problem(c.model, c.layout, {c.log});
  p.W.col(c.red.independent[0]).setZero();
  EXPECT_THROW(solve_ols_base(p, c.red), NumericError);
}

TEST(OlsBase, JointWeightingIsScaleEquivariant) {
  // Scaling one joint's equations by a constant changes its weight by the
  // inverse, so the weighted problem and its solution are unchanged.
  const Case c = make_case(psm(), 7, 20.0);
  IdentificationProblem p = stack_problem(c.model, c.layout, {c.log});
  std::mt19937_64 rng(1);
  p.omega += 0.01 * testing::random_vector(rng, p.omega.size()) * p.omega.cwiseAbs().maxCoeff();
  p.weights = joint_weights(p.omega, p.joints);
  const Vector a = solve_ols_base(p, c.red).delta_b;
  IdentificationProblem q = p;
  for (Eigen::Index r = 2; r < q.W.rows(); r += q.joints) {
    q.W.row(r) *= 40.0;
    q.omega(r) *= 40.0;
  }
  q.weights = joint_weights(q.omega, q.joints);
  EXPECT_NEAR(q.weights(2), p.weights(2) / 40.0, 1e-12 * p.weights(2));
  EXPECT_LE((solve_ols_base(q, c.red).delta_b - a).norm(), 1e-8 * a.norm());
}

TEST(Feasible, SolutionSatisfiesConstraints) {
  const Case c = make_case(mtm(), 11);
  IdentificationProblem p = stack_problem(c.model, c.layout, {c.log});
  std::mt19937_64 rng(2);
  for (Eigen::Index r = 0; r < p.omega.size(); ++r) {
    p.omega(r) += 0.02 * std::normal_distribution<double>(0.0, 1.0)(rng) / p.weights(r % p.joints);
  }
  const IdentifiedParameters id = solve_feasible(p, c.model, c.layout);
  EXPECT_GE(id.margins.worst(), -1e-9);
  for (double v : id.margins.pseudo_inertia) EXPECT_GE(v, 0.0);
  const double ols = solve_ols_base(p, c.red).residual;
  EXPECT_GE(id.residual, ols * (1.0 - 1e-9));
  EXPECT_LE(id.gap, 1e-7);
  ASSERT_EQ(id.standard.size(), c.model.joints.size());
  for (std::size_t j = 0; j < c.model.joints.size(); ++j) {
    if (c.layout.inertial[j] >= 0) {
      ASSERT_TRUE(id.standard[j].has_value()) << c.model.joints[j].name;
      EXPECT_GT(id.standard[j]->mass, 0.0);
    }
  }
}

TEST(Feasible, ExactFeasibleDataIsFitClosely) {
  const Case c = make_case(psm(), 13);
  const IdentificationProblem p = stack_problem(c.model, c.layout, {c.log});
  const IdentifiedParameters id = solve_feasible(p, c.model, c.layout);
  const PredictionError e = relative_prediction_error(c.model, c.layout, id.delta, c.log);
  EXPECT_LE(e.overall, 0.1);
  EXPECT_GE(id.margins.worst(), -1e-9);
}

TEST(Feasible, NegativeCoulombIsProjected) {
  const RobotModel m = testing::friction_joint();
  const ParameterLayout layout = make_layout(m);
  Vector truth(3);
  truth << 0.02, -0.01, 0.003;  // Fv, Fc, Fo
  FourierTrajectory traj = zero_trajectory(1, 0.2, 2);
  traj.a(0, 0) = 0.1 * traj.omega();
  traj.b(0, 1) = 0.05 * traj.omega();
  const JointLog log = testing::exact_log(m, layout, truth, traj, 5.0, 15.0, 50.0);
  const IdentificationProblem p = stack_problem(m, layout, {log});
  const IdentifiedParameters id = solve_feasible(p, m, layout);
  EXPECT_GE(id.delta(layout.coulomb[0]), -1e-9);
  EXPECT_LE(id.delta(layout.coulomb[0]), 1e-4);
  EXPECT_GT(id.residual, 0.0);
}

TEST(Feasible, BoundsAreHonouredOrRejected) {
  const Case c = make_case(testing::pendulum(true), 4);
  const IdentificationProblem p = stack_problem(c.model, c.layout, {c.log});
  FeasibleOptions opt;
  opt.bounds.resize(c.layout.size());
  const int mass = c.layout.inertial[0] + 9;
  opt.bounds[mass].lower = 2.0;
  opt.bounds[mass].upper = 1.0;
  EXPECT_THROW(solve_feasible(p, c.model, c.layout, opt), NumericError);
  opt.bounds[mass].upper.reset();
  opt.bounds[mass].lower = 0.5;
  opt.bounds[mass].upper = 0.6;
  const IdentifiedParameters id = solve_feasible(p, c.model, c.layout, opt);
  EXPECT_GE(id.delta(mass), 0.5 - 1e-9);
  EXPECT_LE(id.delta(mass), 0.6 + 1e-9);
  FeasibleOptions bad;
  bad.bounds.resize(c.layout.size());
  bad.bounds[c.layout.inertial[0]].lower = 0.0;  // an inertia entry
  EXPECT_THROW(solve_feasible(p, c.model, c.layout, bad), ValidationError);
}

TEST(Feasible, EmptyProblemIsRejected) {
  const RobotModel m = testing::pendulum(true);
  const ParameterLayout layout = make_layout(m);
  IdentificationProblem p;
  p.joints = 1;
  p.W.resize(0, layout.size());
  EXPECT_THROW(solve_feasible(p, m, layout), ValidationError);
}

TEST(RecoverStandard, KnownLink) {
  LinkInertial link;
  link.mass = 2.0;
  link.com = Vec3(0.1, -0.2, 0.05);
  link.inertia_com = Vec3(0.01, 0.02, 0.025).asDiagonal();
  const Vector10 d = to_barycentric(link);
  // Parallel axis on the xx entry: 0.01 + 2 (0.04 + 0.0025).
  EXPECT_NEAR(d(0), 0.01 + 2.0 * (0.04 + 0.0025), 1e-15);
  EXPECT_NEAR(d(1), -2.0 * 0.1 * -0.2, 1e-15);
  EXPECT_NEAR(d(6), 0.2, 1e-15);
  const auto back = recover_standard(d);
  ASSERT_TRUE(back.has_value());
  EXPECT_NEAR(back->mass, 2.0, 1e-15);
  EXPECT_LE((back->com - link.com).norm(), 1e-15);
  EXPECT_LE((back->inertia_com - link.inertia_com).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_FALSE(recover_standard(Vector10::Zero()).has_value());
}

TEST(RecoverStandard, RandomFeasibleLinksRoundTrip) {
  std::mt19937_64 rng(9);
  const Box3 hull{Vec3(-0.2, -0.2, -0.2), Vec3(0.2, 0.2, 0.2)};
  for (int k = 0; k < 200; ++k) {
    const Vector10 d = random_link(hull, TruthRanges{}, rng, "x");
    const auto st = recover_standard(d);
    ASSERT_TRUE(st.has_value());
    EXPECT_LE((to_barycentric(*st) - d).cwiseAbs().maxCoeff(), 1e-12);
    // Positive pseudo-inertia: principal moments obey the triangle inequality.
    const Vec3 lam = Eigen::SelfAdjointEigenSolver<Mat3>(st->inertia_com).eigenvalues();
    EXPECT_GT(lam(0), 0.0);
    EXPECT_LE(lam(2), lam(0) + lam(1) + 1e-12);
    EXPECT_GT(min_eigenvalue(pseudo_inertia(d)), 0.0);
  }
}

TEST(CableFit, RecoversPolynomialAndCancelsFriction) {
  const Vector q = Vector::LinSpaced(200, -1.0, 1.0);
  const std::vector<double> coeffs{0.01, -0.02, 0.005, 0.003, 0.0, -0.001, 0.0, 0.0004};
  Vector p(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    double acc = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * q(i) + *it;
    p(i) = acc;
  }
  const double fc = 0.03;
  const CableSpec spec = fit_cable_polynomial(q, Vector(p.array() + fc), Vector(p.array() - fc));
  ASSERT_EQ(spec.coefficients.size(), 8u);
  for (int k = 0; k < 8; ++k) EXPECT_NEAR(spec.coefficients[k], coeffs[k], 1e-12) << k;
}

TEST(CableFit, RejectsTooFewSamplesOrMismatch) {
  const Vector q = Vector::LinSpaced(7, -1.0, 1.0);
  EXPECT_THROW(fit_cable_polynomial(q, q, q, 7), ValidationError);
  const Vector q8 = Vector::LinSpaced(8, -1.0, 1.0);
  EXPECT_NO_THROW(fit_cable_polynomial(q8, q8, q8, 7));
  EXPECT_THROW(fit_cable_polynomial(q8, q, q8, 7), ValidationError);
}

TEST(PredictionError, ZeroAndHundredPercent) {
  const Case c = make_case(psm(), 17, 20.0);
  const PredictionError exact = relative_prediction_error(c.model, c.layout, c.truth.delta, c.log);
  EXPECT_LE(exact.overall, 1e-9);
  EXPECT_LE(exact.per_joint.maxCoeff(), 1e-9);
  const PredictionError none = relative_prediction_error(c.model, c.layout, Vector::Zero(c.layout.size()), c.log);
  EXPECT_NEAR(none.overall, 100.0, 1e-12);
  for (int j = 0; j < 7; ++j) EXPECT_NEAR(none.per_joint(j), 100.0, 1e-12);
  EXPECT_EQ(none.measured.rows(), c.log.size());
}

TEST(PredictionError, ZeroChannelIsAnError) {
  Case c = make_case(testing::pendulum(true), 3, 20.0);
  c.log.tau.setZero();
  EXPECT_THROW(relative_prediction_error(c.model, c.layout, c.truth.delta, c.log), ValidationError);
}

TEST(ParameterFile, StandardRoundTrip) {
  const RobotModel& m = mtm();
  const ParameterLayout layout = make_layout(m);
  const GroundTruth truth = sample_feasible_parameters(m, layout, 21);
  const Json doc = Json::parse(parameters_to_json(m, layout, truth.delta).dump());
  EXPECT_EQ(parameters_from_json(m, layout, doc), truth.delta);
  EXPECT_EQ(doc.at("schema"), "dynident.parameters/1");
  EXPECT_EQ(doc.at("links").size(), 9u);  // every inertial link of the MTM
}

TEST(ParameterFile, BaseFileExpandsToSamePredictions) {
  const Case c = make_case(psm(), 23, 20.0);
  const BaseReduction red = base_reduction(c.model, c.layout, 500, 4);
  const Vector db = red.base_parameters(c.truth.delta);
  const Json doc = Json::parse(base_to_json(c.model, c.layout, red, db, 500, 4).dump());
  EXPECT_FALSE(doc.contains("parameters"));
  const Vector delta = parameters_from_json(c.model, c.layout, doc);
  const PredictionError e = relative_prediction_error(c.model, c.layout, delta, c.log);
  EXPECT_LE(e.overall, 1e-8);
}

TEST(ParameterFile, UnknownOrMissingNamesAreParseErrors) {
  const RobotModel m = testing::pendulum(true);
  const ParameterLayout layout = make_layout(m);
  Json doc = parameters_to_json(m, layout, Vector::Ones(layout.size()));
  doc["parameters"]["9.m"] = 1.0;
  EXPECT_THROW(parameters_from_json(m, layout, doc), ParseError);
  doc = parameters_to_json(m, layout, Vector::Ones(layout.size()));
  doc["parameters"].erase("1.m");
  EXPECT_THROW(parameters_from_json(m, layout, doc), ParseError);
  EXPECT_THROW(parameters_from_json(m, layout, Json::array()), ParseError);
  EXPECT_THROW(load_parameters(m, layout, "/nonexistent/params.json"), ParseError);
}

}  // namespace
}  // namespace dynident
