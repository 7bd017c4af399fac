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
#include <sstream>

#include "test_util.hpp"

namespace dynident {
namespace {

constexpr double kFs = 200.0;

Vector sampled(Eigen::Index n, const std::function<double(double)>& f) {
  Vector x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = f(static_cast<double>(i) / kFs);
  return x;
}

// Least-squares a sin + b cos over the middle half; returns (amplitude, phase).
std::pair<double, double> fit_sine(const Vector& x, double w) {
  const Eigen::Index n = x.size(), lo = n / 4, m = n / 2;
  Matrix A(m, 2);
  Vector y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double t = static_cast<double>(lo + i) / kFs;
    A(i, 0) = std::sin(w * t);
    A(i, 1) = std::cos(w * t);
    y(i) = x(lo + i);
  }
  const Vector c = A.colPivHouseholderQr().solve(y);
  return {std::hypot(c(0), c(1)), std::atan2(c(1), c(0))};
}

TEST(Butterworth, ConstantPassesUnchanged) {
  const Vector x = Vector::Constant(1000, 2.5);
  const Vector y = butterworth_zero_phase(x, kFs, 1.8, 6);
  EXPECT_LE((y - x).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Butterworth, PassbandKeepsAmplitudeAndPhase) {
  const double cutoff = 1.8, w = 2 * kPi * cutoff / 10.0;
  const Vector x = sampled(8000, [&](double t) { return std::sin(w * t); });
  const auto [amp, phase] = fit_sine(butterworth_zero_phase(x, kFs, cutoff, 6), w);
  EXPECT_NEAR(amp, 1.0, 5e-3);
  EXPECT_NEAR(phase, 0.0, 1e-3);
}

TEST(Butterworth, StopbandIsAttenuated) {
  const double cutoff = 1.8, w = 2 * kPi * 4.0 * cutoff;
  const Vector x = sampled(8000, [&](double t) { return std::sin(w * t); });
  const auto [amp, phase] = fit_sine(butterworth_zero_phase(x, kFs, cutoff, 6), w);
  (void)phase;
  EXPECT_LE(20.0 * std::log10(amp), -40.0);
}

TEST(Butterworth, CutoffIsHalfPowerPerPass) {
  // Two passes of |H(fc)| = 1/sqrt(2).
  const double cutoff = 5.4, w = 2 * kPi * cutoff;
  const Vector x = sampled(8000, [&](double t) { return std::sin(w * t); });
  const auto [amp, phase] = fit_sine(butterworth_zero_phase(x, kFs, cutoff, 6), w);
  (void)phase;
  EXPECT_NEAR(amp, 0.5, 5e-3);
}

TEST(Butterworth, CommutesWithTimeReversal) {
  std::mt19937_64 rng(1);
  const Vector x = testing::random_vector(rng, 5000);
  const Vector a = butterworth_zero_phase(Vector(x.reverse()), kFs, 1.8, 6).reverse();
  const Vector b = butterworth_zero_phase(x, kFs, 1.8, 6);
  // The end conditions differ between the passes; away from them the two
  // cascades are the same LTI operator.
  EXPECT_LE((a - b).segment(2000, 1000).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Butterworth, NearlyIdempotentOnPassband) {
  const Vector x = sampled(6000, [](double t) { return std::sin(0.5 * t) + 0.3 * std::cos(1.1 * t); });
  const Vector once = butterworth_zero_phase(x, kFs, 1.8, 6);
  const Vector twice = butterworth_zero_phase(once, kFs, 1.8, 6);
  EXPECT_LE((twice - once).norm(), 0.01 * once.norm());
}

TEST(Butterworth, RejectsBadArguments) {
  const Vector x = Vector::Zero(100);
  EXPECT_THROW(butterworth_zero_phase(x, kFs, 150.0, 6), ValidationError);
  EXPECT_THROW(butterworth_zero_phase(x, kFs, 1.8, 0), ValidationError);
  EXPECT_THROW(butterworth_zero_phase(Vector(Vector::Zero(filter_padding(6))), kFs, 1.8, 6), ValidationError);
}

TEST(Differentiate, ExactOnPolynomialsUpToTwo) {
  const Vector lin = sampled(50, [](double t) { return 3.0 * t - 1.0; });
  EXPECT_LE((differentiate(lin, kFs).array() - 3.0).abs().maxCoeff(), 1e-10);
  const Vector quad = sampled(50, [](double t) { return 2.0 * t * t; });
  const Vector d = differentiate(quad, kFs);
  for (Eigen::Index i = 0; i < d.size(); ++i) EXPECT_NEAR(d(i), 4.0 * static_cast<double>(i) / kFs, 1e-9);
}

TEST(Differentiate, SineErrorWithinTruncationBound) {
  const double w = 2 * kPi * 3.0;
  const Vector x = sampled(400, [&](double t) { return std::sin(w * t); });
  const Vector d = differentiate(x, kFs);
  const double bound = w * w * w / (6.0 * kFs * kFs);
  for (Eigen::Index i = 1; i + 1 < d.size(); ++i) {
    EXPECT_LE(std::abs(d(i) - w * std::cos(w * static_cast<double>(i) / kFs)), bound * 1.0001);
  }
}

TEST(Differentiate, UndoesCumulativeSum) {
  std::mt19937_64 rng(2);
  const Vector v = testing::random_vector(rng, 300);
  Vector x(v.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) x(i) = acc += v(i) / kFs;
  const Vector d = differentiate(x, kFs);
  // Central differences average neighbouring increments.
  for (Eigen::Index i = 1; i + 1 < v.size(); ++i) EXPECT_NEAR(d(i), 0.5 * (v(i) + v(i + 1)), 1e-12);
}

JointLog small_log(Eigen::Index n, int joints, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  JointLog log;
  log.t = Vector::LinSpaced(n, 0.0, static_cast<double>(n - 1) / kFs);
  log.q = Matrix::NullaryExpr(n, joints, [&] { return std::uniform_real_distribution<double>(-1, 1)(rng); });
  log.dq = Matrix::NullaryExpr(n, joints, [&] { return std::uniform_real_distribution<double>(-1, 1)(rng); });
  log.tau = Matrix::NullaryExpr(n, joints, [&] { return std::uniform_real_distribution<double>(-1, 1)(rng) * 1e-3; });
  return log;
}

TEST(LogCsv, RoundTripIsBitExact) {
  const JointLog log = small_log(40, 3, 3);
  std::stringstream ss;
  write_log_csv(log, ss);
  const JointLog back = read_log_csv(ss);
  EXPECT_EQ(back.t, log.t);
  EXPECT_EQ(back.q, log.q);
  EXPECT_EQ(back.dq, log.dq);
  EXPECT_EQ(back.tau, log.tau);
}

TEST(LogCsv, BadHeaderIsAParseError) {
  std::stringstream ss("time,q1,dq1,tau1\n0,0,0,0\n");
  EXPECT_THROW(read_log_csv(ss), ParseError);
  std::stringstream swapped("t,dq1,q1,tau1\n0,0,0,0\n");
  EXPECT_THROW(read_log_csv(swapped), ParseError);
  std::stringstream bad("t,q1,dq1,tau1\n0,0,x,0\n");
  EXPECT_THROW(read_log_csv(bad), ParseError);
}

TEST(LogCsv, NonUniformTimeIsRejected) {
  std::stringstream ss("t,q1,dq1,tau1\n0,0,0,0\n0.005,0,0,0\n0.011,0,0,0\n0.015,0,0,0\n");
  EXPECT_THROW(read_log_csv(ss), ValidationError);
  JointLog log = small_log(10, 2, 4);
  log.t(5) = log.t(4);
  EXPECT_THROW(check_log(log), ValidationError);
}

JointLog sine_log(double seconds, double w) {
  const auto n = static_cast<Eigen::Index>(seconds * kFs) + 1;
  JointLog log;
  log.t = Vector::LinSpaced(n, 0.0, static_cast<double>(n - 1) / kFs);
  log.q.resize(n, 2);
  log.dq.resize(n, 2);
  log.tau.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = log.t(i);
    log.q.row(i) << std::sin(w * t), 0.5 * std::cos(w * t);
    log.dq.row(i) << w * std::cos(w * t), -0.5 * w * std::sin(w * t);
    log.tau.row(i) << std::cos(w * t), 1.0;
  }
  return log;
}

TEST(ProcessLog, AccelerationAccurateInPassband) {
  const double w = 2 * kPi * 0.3;
  const JointLog raw = sine_log(40.0, w);
  const JointLog p = process_log(raw, FilterConfig{});
  Vector truth(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) truth(i) = -w * w * std::sin(w * p.t(i));
  // RMS over the middle of the kept window.
  const Eigen::Index lo = p.size() / 4, m = p.size() / 2;
  const double err = (p.ddq.col(0).segment(lo, m) - truth.segment(lo, m)).norm();
  EXPECT_LE(err, 0.01 * truth.segment(lo, m).norm());
}

TEST(ProcessLog, DropsRampAndTail) {
  const JointLog raw = sine_log(20.0, 1.0);
  const JointLog p = process_log(raw, FilterConfig{});
  EXPECT_NEAR(p.t(0), 5.0, 1e-12);
  EXPECT_NEAR(p.t(p.size() - 1), 19.0, 1e-9);
  EXPECT_EQ(p.ddq.rows(), p.size());
  FilterConfig keep;
  keep.tail_duration = 0.0;
  const JointLog all = process_log(raw, keep);
  EXPECT_NEAR(all.t(all.size() - 1), 20.0, 1e-9);
  EXPECT_EQ(all.size(), 3001);
}

TEST(ProcessLog, ShortLogIsRejected) {
  EXPECT_THROW(process_log(sine_log(4.0, 1.0), FilterConfig{}), ValidationError);
  EXPECT_THROW(process_log(sine_log(5.5, 1.0), FilterConfig{}), ValidationError);
  FilterConfig negative;
  negative.tail_duration = -1.0;
  EXPECT_THROW(process_log(sine_log(20.0, 1.0), negative), ValidationError);
}

TEST(ProcessLog, PsmCutoffAccepted) {
  FilterConfig cfg;
  cfg.cutoff = 5.4;
  const JointLog p = process_log(sine_log(12.0, 2.0), cfg);
  EXPECT_GT(p.size(), 0);
}

}  // namespace
}  // namespace dynident
