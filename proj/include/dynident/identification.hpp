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

// Parameter identification from processed torque logs.
//
//   stack_problem        W, omega = tau - cable torque, per-joint weights
//   solve_ols_base       weighted least squares on the base parameters
//   solve_feasible       weighted least squares on the full standard vector
//                        subject to pseudo-inertia LMIs, COM hulls and sign
//                        constraints (log-barrier interior point)
//
// plus cable polynomial fitting and prediction error.

#ifndef DYNIDENT_IDENTIFICATION_HPP_
#define DYNIDENT_IDENTIFICATION_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "dynident/common.hpp"
#include "dynident/model.hpp"
#include "dynident/parameters.hpp"
#include "dynident/regressor.hpp"
#include "dynident/signals.hpp"

namespace dynident {

struct IdentificationProblem {
  Matrix W;        // S * n_m rows, sample-major
  Vector omega;    // measured motor torque minus cable torque
  Vector weights;  // per motor joint, 1 / (max - min) of omega
  int joints = 0;

  Eigen::Index samples() const { return joints > 0 ? W.rows() / joints : 0; }
  // Weight of every stacked row.
  Vector row_weights() const {
    Vector w(W.rows());
    for (Eigen::Index r = 0; r < W.rows(); ++r) w(r) = weights(r % joints);
    return w;
  }
};

inline Vector joint_weights(const Vector& omega, int joints, const RobotModel* model = nullptr) {
  Vector w(joints);
  const Eigen::Index s = omega.size() / joints;
  for (int j = 0; j < joints; ++j) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (Eigen::Index k = 0; k < s; ++k) {
      lo = std::min(lo, omega(k * joints + j));
      hi = std::max(hi, omega(k * joints + j));
    }
    const double range = hi - lo;
    if (!(range > 0.0) || !std::isfinite(range)) {
      const std::string name = model ? model->coupling.motors[j] : "joint " + std::to_string(j + 1);
      throw ValidationError("torque channel of " + name + " is constant; cannot weight it");
    }
    w(j) = 1.0 / range;
  }
  return w;
}

// Stacks processed logs (ddq filled in) into one problem.
inline IdentificationProblem stack_problem(const RobotModel& model, const ParameterLayout& layout,
                                           const std::vector<JointLog>& logs) {
  const int nm = model.motor_count();
  Eigen::Index total = 0;
  for (const auto& log : logs) {
    if (log.joints() != nm) {
      throw ValidationError("log has " + std::to_string(log.joints()) + " joints, model has " + std::to_string(nm) + " motors");
    }
    if (log.ddq.rows() != log.size()) throw ValidationError("log is not processed (no accelerations)");
    total += log.size();
  }
  IdentificationProblem p;
  p.joints = nm;
  p.W.resize(total * nm, layout.size());
  p.omega.resize(total * nm);
  Eigen::Index base = 0;
  for (const auto& log : logs) {
    parallel_for(static_cast<std::size_t>(log.size()), [&](std::size_t i) {
      const auto r = static_cast<Eigen::Index>(i);
      const Vector q = log.q.row(r).transpose();
      const Eigen::Index row = (base + r) * nm;
      p.W.middleRows(row, nm) = full_regressor(model, layout, q, log.dq.row(r).transpose(), log.ddq.row(r).transpose());
      p.omega.segment(row, nm) = log.tau.row(r).transpose() - cable_torque(model, q);
    });
    base += log.size();
  }
  if (total > 0) p.weights = joint_weights(p.omega, nm, &model);
  return p;
}

inline double weighted_residual(const IdentificationProblem& p, const Vector& delta) {
  return (p.row_weights().asDiagonal() * (p.W * delta - p.omega)).squaredNorm();
}

struct BaseEstimate {
  Vector delta_b;
  double residual = 0.0;  // weighted squared residual
};

inline BaseEstimate solve_ols_base(const IdentificationProblem& p, const BaseReduction& reduction) {
  if (p.W.rows() == 0) throw ValidationError("identification problem has no rows");
  const Vector rw = p.row_weights();
  const Matrix A = rw.asDiagonal() * reduction.base_regressor(p.W);
  const Vector y = rw.asDiagonal() * p.omega;
  Eigen::ColPivHouseholderQR<Matrix> qr(A);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < A.cols()) {
    throw NumericError("base regressor is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                       std::to_string(A.cols()) + "); the data does not excite every base parameter");
  }
  BaseEstimate est;
  est.delta_b = qr.solve(y);
  est.residual = (A * est.delta_b - y).squaredNorm();
  return est;
}

struct Bound {
  std::optional<double> lower, upper;
};

struct FeasibleOptions {
  double epsilon = 1e-9;      // D_k - epsilon I must be positive definite
  double gap_tolerance = 1e-7;  // on the normalized objective
  double ridge = 1e-9;        // relative Tikhonov term for directions the data leaves free
  int max_newton = 200;       // per centering step
  int max_outer = 60;
  std::vector<Bound> bounds;  // per parameter; only mass and joint scalars honoured
};

struct FeasibilityMargins {
  std::vector<double> pseudo_inertia;  // min eigenvalue of D_k per inertial link
  std::vector<double> hull;            // min COM-hull slack per inertial link
  double friction = std::numeric_limits<double>::infinity();
  double motor_inertia = std::numeric_limits<double>::infinity();
  double stiffness = std::numeric_limits<double>::infinity();
  double bounds = std::numeric_limits<double>::infinity();

  double worst() const {
    double w = std::min({friction, motor_inertia, stiffness, bounds});
    for (double v : pseudo_inertia) w = std::min(w, v);
    for (double v : hull) w = std::min(w, v);
    return w;
  }
};

struct IdentifiedParameters {
  Vector delta;
  std::vector<std::optional<LinkInertial>> standard;  // per joint; nullopt when no link or mass below floor
  double residual = 0.0;
  FeasibilityMargins margins;
  int iterations = 0;
  double gap = 0.0;
};

inline FeasibilityMargins feasibility_margins(const RobotModel& model, const ParameterLayout& layout,
                                              const Vector& delta, const std::vector<Bound>& bounds = {}) {
  FeasibilityMargins m;
  for (std::size_t j = 0; j < model.joints.size(); ++j) {
    if (layout.inertial[j] >= 0) {
      const Vector10 d = link_block(layout, delta, static_cast<int>(j));
      m.pseudo_inertia.push_back(min_eigenvalue(pseudo_inertia(d)));
      const auto& hull = model.resolved[j].com_hull;
      double slack = std::numeric_limits<double>::infinity();
      for (int k = 0; k < 3; ++k) {
        slack = std::min(slack, d(6 + k) - d(9) * hull.lower(k));
        slack = std::min(slack, d(9) * hull.upper(k) - d(6 + k));
      }
      m.hull.push_back(slack);
    }
    if (layout.viscous[j] >= 0) {
      m.friction = std::min({m.friction, delta(layout.viscous[j]), delta(layout.coulomb[j])});
    }
    if (layout.motor_inertia[j] >= 0) m.motor_inertia = std::min(m.motor_inertia, delta(layout.motor_inertia[j]));
    if (layout.stiffness[j] >= 0) m.stiffness = std::min(m.stiffness, delta(layout.stiffness[j]));
  }
  for (std::size_t i = 0; i < bounds.size() && i < static_cast<std::size_t>(delta.size()); ++i) {
    if (bounds[i].lower) m.bounds = std::min(m.bounds, delta(static_cast<Eigen::Index>(i)) - *bounds[i].lower);
    if (bounds[i].upper) m.bounds = std::min(m.bounds, *bounds[i].upper - delta(static_cast<Eigen::Index>(i)));
  }
  return m;
}

namespace ipm {

// D(d) = sum_i d_i B_i for the pseudo-inertia map.
inline std::array<Mat4, 10> pseudo_inertia_basis() {
  std::array<Mat4, 10> B;
  for (int i = 0; i < 10; ++i) {
    Vector10 e = Vector10::Zero();
    e(i) = 1.0;
    B[i] = pseudo_inertia(e);
  }
  return B;
}

// Linear inequality a^T delta + c > 0 on a sparse support.
struct Linear {
  std::vector<std::pair<int, double>> a;
  double c = 0.0;
  double eval(const Vector& x) const {
    double v = c;
    for (const auto& [i, w] : a) v += w * x(i);
    return v;
  }
};

struct Barrier {
  std::vector<int> links;  // inertial block start per LMI
  std::vector<Linear> linear;
  double epsilon = 1e-9;
  std::array<Mat4, 10> basis = pseudo_inertia_basis();

  int count() const { return static_cast<int>(links.size()) * 4 + static_cast<int>(linear.size()); }

  bool strictly_feasible(const Vector& x) const {
    for (const auto& l : linear) {
      if (!(l.eval(x) > 0.0)) return false;
    }
    for (int start : links) {
      Eigen::LLT<Mat4> llt(pseudo_inertia(x.segment<10>(start)) - epsilon * Mat4::Identity());
      if (llt.info() != Eigen::Success) return false;
    }
    return true;
  }

  // phi(x) = -sum log(slack) - sum log det(D - eps I); infinity outside.
  double value(const Vector& x) const {
    double phi = 0.0;
    for (const auto& l : linear) {
      const double s = l.eval(x);
      if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
      phi -= std::log(s);
    }
    for (int start : links) {
      Eigen::LLT<Mat4> llt(pseudo_inertia(x.segment<10>(start)) - epsilon * Mat4::Identity());
      if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
      const Mat4 L = llt.matrixL();
      double ld = 0.0;
      for (int i = 0; i < 4; ++i) {
        if (!(L(i, i) > 0.0)) return std::numeric_limits<double>::infinity();
        ld += 2.0 * std::log(L(i, i));
      }
      phi -= ld;
    }
    return phi;
  }

  void add_derivatives(const Vector& x, Vector& g, Matrix& H) const {
    for (const auto& l : linear) {
      const double s = l.eval(x);
      for (const auto& [i, wi] : l.a) {
        g(i) -= wi / s;
        for (const auto& [j, wj] : l.a) H(i, j) += wi * wj / (s * s);
      }
    }
    for (int start : links) {
      const Mat4 D = pseudo_inertia(x.segment<10>(start)) - epsilon * Mat4::Identity();
      const Mat4 Di = D.inverse();
      std::array<Mat4, 10> P;
      for (int i = 0; i < 10; ++i) P[i] = Di * basis[i];
      for (int i = 0; i < 10; ++i) {
        g(start + i) -= P[i].trace();
        for (int j = 0; j <= i; ++j) {
          const double h = (P[i] * P[j]).trace();
          H(start + i, start + j) += h;
          if (j != i) H(start + j, start + i) += h;
        }
      }
    }
  }
};

}  // namespace ipm

// Strictly feasible starting point: unit mass (or mid-bounds) at the hull
// centre with a small isotropic inertia, unit joint scalars.
inline Vector feasible_start(const RobotModel& model, const ParameterLayout& layout, const std::vector<Bound>& bounds) {
  Vector x = Vector::Zero(layout.size());
  auto pick = [&](int idx, double fallback) {
    if (idx < static_cast<int>(bounds.size())) {
      const auto& b = bounds[idx];
      if (b.lower && b.upper) return 0.5 * (*b.lower + *b.upper);
      if (b.lower) return std::max(fallback, *b.lower + 1.0);
      if (b.upper) return std::min(fallback, *b.upper - 1.0);
    }
    return fallback;
  };
  for (std::size_t j = 0; j < model.joints.size(); ++j) {
    if (layout.inertial[j] >= 0) {
      const int start = layout.inertial[j];
      const auto& hull = model.resolved[j].com_hull;
      LinkInertial link;
      link.mass = pick(start + 9, 1.0);
      link.com = 0.5 * (hull.lower + hull.upper);
      const double size = (hull.upper - hull.lower).minCoeff();
      link.inertia_com = 0.01 * link.mass * size * size * Mat3::Identity();
      x.segment<10>(start) = to_barycentric(link);
    }
    if (layout.viscous[j] >= 0) {
      x(layout.viscous[j]) = pick(layout.viscous[j], 1.0);
      x(layout.coulomb[j]) = pick(layout.coulomb[j], 1.0);
      x(layout.offset[j]) = pick(layout.offset[j], 0.0);
    }
    if (layout.motor_inertia[j] >= 0) x(layout.motor_inertia[j]) = pick(layout.motor_inertia[j], 1.0);
    if (layout.stiffness[j] >= 0) x(layout.stiffness[j]) = pick(layout.stiffness[j], 1.0);
  }
  return x;
}

inline bool boundable(const ParameterLayout& layout, int i) {
  const auto k = layout.entries[i].kind;
  return k == ParamKind::kMass || static_cast<int>(k) >= static_cast<int>(ParamKind::kViscous);
}

inline IdentifiedParameters solve_feasible(const IdentificationProblem& p, const RobotModel& model,
                                           const ParameterLayout& layout, const FeasibleOptions& options = {}) {
  if (p.W.rows() == 0) throw ValidationError("identification problem has no rows");
  const int n = layout.size();
  if (p.W.cols() != n) throw ValidationError("problem width does not match the model parameters");
  for (std::size_t i = 0; i < options.bounds.size(); ++i) {
    const auto& b = options.bounds[i];
    if (b.lower && b.upper && !(*b.lower < *b.upper)) {
      throw NumericError("infeasible: bounds on " + param_name(model, layout, static_cast<int>(i)) + " are contradictory");
    }
    if ((b.lower || b.upper) && !boundable(layout, static_cast<int>(i))) {
      throw ValidationError("bounds are only supported on masses and joint parameters, not " +
                            param_name(model, layout, static_cast<int>(i)));
    }
  }

  // Normalized quadratic: f(x) = (|A x - y|^2 + ridge) / |y|^2.
  const Vector rw = p.row_weights();
  const Matrix A = rw.asDiagonal() * p.W;
  const Vector y = rw.asDiagonal() * p.omega;
  const double yy = std::max(y.squaredNorm(), std::numeric_limits<double>::min());
  Matrix Q = A.transpose() * A / yy;
  const Vector c = A.transpose() * y / yy;
  const double dmax = Q.diagonal().maxCoeff();
  for (int i = 0; i < n; ++i) Q(i, i) += options.ridge * std::max(Q(i, i), 1e-6 * dmax);
  auto objective = [&](const Vector& x) { return x.dot(Q * x) - 2.0 * c.dot(x) + 1.0; };

  ipm::Barrier barrier;
  barrier.epsilon = options.epsilon;
  for (std::size_t j = 0; j < model.joints.size(); ++j) {
    if (layout.inertial[j] >= 0) {
      const int s = layout.inertial[j];
      barrier.links.push_back(s);
      const auto& hull = model.resolved[j].com_hull;
      for (int k = 0; k < 3; ++k) {
        barrier.linear.push_back({{{s + 6 + k, 1.0}, {s + 9, -hull.lower(k)}}, 0.0});
        barrier.linear.push_back({{{s + 6 + k, -1.0}, {s + 9, hull.upper(k)}}, 0.0});
      }
    }
    if (layout.viscous[j] >= 0) {
      barrier.linear.push_back({{{layout.viscous[j], 1.0}}, 0.0});
      barrier.linear.push_back({{{layout.coulomb[j], 1.0}}, 0.0});
    }
    if (layout.motor_inertia[j] >= 0) barrier.linear.push_back({{{layout.motor_inertia[j], 1.0}}, 0.0});
    if (layout.stiffness[j] >= 0) barrier.linear.push_back({{{layout.stiffness[j], 1.0}}, 0.0});
  }
  for (std::size_t i = 0; i < options.bounds.size(); ++i) {
    const int idx = static_cast<int>(i);
    if (options.bounds[i].lower) barrier.linear.push_back({{{idx, 1.0}}, -*options.bounds[i].lower});
    if (options.bounds[i].upper) barrier.linear.push_back({{{idx, -1.0}}, *options.bounds[i].upper});
  }

  Vector x = feasible_start(model, layout, options.bounds);
  if (!barrier.strictly_feasible(x)) throw NumericError("infeasible: no strictly feasible starting point for the constraints");

  const double m = std::max(1, barrier.count());
  double t = std::max(1.0, m / std::max(objective(x), 1e-12));
  IdentifiedParameters out;
  bool converged = false;
  for (int outer = 0; outer < options.max_outer; ++outer) {
    auto merit = [&](const Vector& v) { return t * objective(v) + barrier.value(v); };
    for (int it = 0; it < options.max_newton; ++it) {
      Vector g = t * 2.0 * (Q * x - c);
      Matrix H = t * 2.0 * Q;
      barrier.add_derivatives(x, g, H);
      Eigen::LDLT<Matrix> ldlt(H);
      Vector dx = -ldlt.solve(g);
      if (!dx.allFinite()) throw NumericError("interior-point Newton system is singular");
      const double decrement = -g.dot(dx);
      ++out.iterations;
      if (decrement / 2.0 <= 1e-10) break;
      const double f0 = merit(x);
      double step = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 80; ++ls) {
        const Vector xn = x + step * dx;
        const double fn = merit(xn);
        if (std::isfinite(fn) && fn <= f0 - 0.25 * step * decrement) {
          x = xn;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
    }
    out.gap = m / t;
    if (out.gap < options.gap_tolerance) {
      converged = true;
      break;
    }
    t *= 20.0;
  }
  if (!converged) {
    throw NumericError("feasible solve did not reach gap tolerance " + std::to_string(options.gap_tolerance) +
                       " (gap " + std::to_string(out.gap) + ")");
  }
  out.delta = x;
  out.residual = weighted_residual(p, x);
  out.margins = feasibility_margins(model, layout, x, options.bounds);
  for (std::size_t j = 0; j < model.joints.size(); ++j) {
    if (layout.inertial[j] >= 0) out.standard.push_back(recover_standard(link_block(layout, x, static_cast<int>(j))));
    else out.standard.push_back(std::nullopt);
  }
  return out;
}

// Least-squares polynomial of the given degree through (x, y).
inline std::vector<double> fit_polynomial(const Vector& x, const Vector& y, int degree) {
  Matrix V(x.size(), degree + 1);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double p = 1.0;
    for (int k = 0; k <= degree; ++k) {
      V(i, k) = p;
      p *= x(i);
    }
  }
  const Vector c = V.colPivHouseholderQr().solve(y);
  return {c.data(), c.data() + c.size()};
}

// Cable torque from constant-velocity sweeps in both directions: fits
// p+ and p- and averages them so the velocity-odd friction cancels.
inline CableSpec fit_cable_polynomial(const Vector& q, const Vector& tau_plus, const Vector& tau_minus, int degree = 7) {
  if (degree < 0) throw ValidationError("degree must be non-negative");
  if (tau_plus.size() != q.size() || tau_minus.size() != q.size()) {
    throw ValidationError("cable fit: sample arrays differ in length");
  }
  if (q.size() < degree + 1) {
    throw ValidationError("cable fit: " + std::to_string(q.size()) + " samples cannot determine a degree " +
                          std::to_string(degree) + " polynomial");
  }
  const auto plus = fit_polynomial(q, tau_plus, degree);
  const auto minus = fit_polynomial(q, tau_minus, degree);
  CableSpec spec;
  spec.degree = degree;
  for (int k = 0; k <= degree; ++k) spec.coefficients.push_back(0.5 * (plus[k] + minus[k]));
  return spec;
}

struct PredictionError {
  Vector per_joint;  // percent
  double overall = 0.0;  // percent
  Matrix measured, predicted;  // samples x joints, omega and W delta
};

inline PredictionError relative_prediction_error(const RobotModel& model, const ParameterLayout& layout,
                                                 const Vector& delta, const JointLog& processed) {
  std::vector<JointLog> logs{processed};
  const int nm = model.motor_count();
  IdentificationProblem p;
  {
    // Stack without weights: a constant channel is legal here.
    Eigen::Index total = processed.size();
    if (processed.ddq.rows() != total) throw ValidationError("log is not processed (no accelerations)");
    if (processed.joints() != nm) throw ValidationError("log does not match the model's motor count");
    p.W.resize(total * nm, layout.size());
    p.omega.resize(total * nm);
    parallel_for(static_cast<std::size_t>(total), [&](std::size_t i) {
      const auto r = static_cast<Eigen::Index>(i);
      const Vector q = processed.q.row(r).transpose();
      p.W.middleRows(r * nm, nm) = full_regressor(model, layout, q, processed.dq.row(r).transpose(), processed.ddq.row(r).transpose());
      p.omega.segment(r * nm, nm) = processed.tau.row(r).transpose() - cable_torque(model, q);
    });
  }
  const Vector pred = p.W * delta;
  PredictionError e;
  const Eigen::Index s = processed.size();
  e.measured = Eigen::Map<const Matrix>(p.omega.data(), nm, s).transpose();
  e.predicted = Eigen::Map<const Matrix>(pred.data(), nm, s).transpose();
  e.per_joint.resize(nm);
  for (int j = 0; j < nm; ++j) {
    const double norm = e.measured.col(j).norm();
    if (!(norm > 0.0)) throw ValidationError("measured torque of " + model.coupling.motors[j] + " is identically zero");
    e.per_joint(j) = 100.0 * (e.measured.col(j) - e.predicted.col(j)).norm() / norm;
  }
  e.overall = 100.0 * (p.omega - pred).norm() / p.omega.norm();
  return e;
}

// Parameter files. "parameters" holds the standard vector by name; base-only
// results carry "base" instead, with the reduction that defines it.
inline Json parameters_to_json(const RobotModel& model, const ParameterLayout& layout, const Vector& delta) {
  Json doc;
  doc["schema"] = "dynident.parameters/1";
  doc["model"] = model.name;
  Json params = Json::object();
  for (int i = 0; i < layout.size(); ++i) params[param_name(model, layout, i)] = delta(i);
  doc["parameters"] = params;
  Json links = Json::array();
  Json joints = Json::array();
  for (std::size_t j = 0; j < model.joints.size(); ++j) {
    const int jj = static_cast<int>(j);
    if (layout.inertial[j] >= 0) {
      const Vector10 d = link_block(layout, delta, jj);
      Json link{{"joint", model.joints[j].name},
                {"m", d(9)},
                {"l", {d(6), d(7), d(8)}},
                {"L", {d(0), d(1), d(2), d(3), d(4), d(5)}}};
      if (const auto st = recover_standard(d)) {
        const Mat3& I = st->inertia_com;
        link["r"] = {st->com.x(), st->com.y(), st->com.z()};
        link["I"] = {I(0, 0), I(0, 1), I(0, 2), I(1, 1), I(1, 2), I(2, 2)};
      } else {
        link["r"] = nullptr;
        link["I"] = nullptr;
      }
      links.push_back(link);
    }
    Json joint{{"joint", model.joints[j].name}};
    bool any = false;
    auto put = [&](const char* key, int idx) {
      if (idx >= 0) {
        joint[key] = delta(idx);
        any = true;
      }
    };
    put("Fv", layout.viscous[j]);
    put("Fc", layout.coulomb[j]);
    put("Fo", layout.offset[j]);
    put("Im", layout.motor_inertia[j]);
    put("Ks", layout.stiffness[j]);
    if (any) joints.push_back(joint);
  }
  doc["links"] = links;
  doc["joints"] = joints;
  return doc;
}

inline Json margins_to_json(const FeasibilityMargins& m) {
  auto finite = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
  return Json{{"pseudo_inertia", m.pseudo_inertia}, {"hull", m.hull},       {"friction", finite(m.friction)},
              {"motor_inertia", finite(m.motor_inertia)}, {"stiffness", finite(m.stiffness)},
              {"bounds", finite(m.bounds)}, {"worst", finite(m.worst())}};
}

inline Json base_to_json(const RobotModel& model, const ParameterLayout& layout, const BaseReduction& red,
                         const Vector& delta_b, int reduction_samples, std::uint64_t reduction_seed) {
  Json doc;
  doc["schema"] = "dynident.parameters/1";
  doc["model"] = model.name;
  Json base = Json::array();
  for (int i = 0; i < red.base_count(); ++i) {
    base.push_back({{"name", param_name(model, layout, red.independent[i])}, {"value", delta_b(i)}});
  }
  doc["base"] = base;
  doc["reduction"] = {{"samples", reduction_samples}, {"seed", reduction_seed}};
  return doc;
}

// Standard vector from a parameter file. Base-only files are expanded with
// zero dependent part, which predicts the same torques.
inline Vector parameters_from_json(const RobotModel& model, const ParameterLayout& layout, const Json& doc) {
  if (!doc.is_object()) throw ParseError("parameter file: expected an object");
  Vector delta = Vector::Zero(layout.size());
  if (doc.contains("parameters")) {
    const Json& p = doc.at("parameters");
    for (int i = 0; i < layout.size(); ++i) {
      const std::string name = param_name(model, layout, i);
      if (!p.contains(name) || !p.at(name).is_number()) throw ParseError("parameter file: missing number for " + name);
      delta(i) = p.at(name).get<double>();
    }
    for (const auto& [key, _] : p.items()) {
      bool known = false;
      for (int i = 0; i < layout.size() && !known; ++i) known = param_name(model, layout, i) == key;
      if (!known) throw ParseError("parameter file: '" + key + "' is not a parameter of model " + model.name);
    }
    return delta;
  }
  if (doc.contains("base")) {
    const auto& r = doc.at("reduction");
    const BaseReduction red = base_reduction(model, layout, r.at("samples").get<int>(), r.at("seed").get<std::uint64_t>());
    const Json& b = doc.at("base");
    if (!b.is_array() || static_cast<int>(b.size()) != red.base_count()) {
      throw ParseError("parameter file: base vector does not match the model's reduction");
    }
    Vector db(red.base_count());
    for (int i = 0; i < red.base_count(); ++i) {
      if (b[i].at("name").get<std::string>() != param_name(model, layout, red.independent[i])) {
        throw ParseError("parameter file: base parameter " + std::to_string(i) + " does not match the reduction");
      }
      db(i) = b[i].at("value").get<double>();
    }
    return red.expand(db);
  }
  throw ParseError("parameter file: needs 'parameters' or 'base'");
}

inline Vector load_parameters(const RobotModel& model, const ParameterLayout& layout, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open parameter file '" + path + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError("parameter file '" + path + "': " + e.what());
  }
  return parameters_from_json(model, layout, doc);
}

}  // namespace dynident

#endif  // DYNIDENT_IDENTIFICATION_HPP_
