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

// Joint logs and the offline measurement pipeline: zero-phase Butterworth
// low-pass, second-order differentiation, ramp removal.

#ifndef DYNIDENT_SIGNALS_HPP_
#define DYNIDENT_SIGNALS_HPP_

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dynident/common.hpp"

namespace dynident {

// Uniformly sampled motor-space log; one row per sample.
struct JointLog {
  Vector t;
  Matrix q, dq, tau;
  Matrix ddq;  // empty until process_log fills it

  Eigen::Index size() const { return t.size(); }
  int joints() const { return static_cast<int>(q.cols()); }
  double rate() const {
    if (t.size() < 2) return 0.0;
    return static_cast<double>(t.size() - 1) / (t(t.size() - 1) - t(0));
  }
};

// Throws ValidationError unless lengths agree and time is strictly
// increasing with jitter <= 1e-6 of the nominal step.
inline void check_log(const JointLog& log) {
  const auto n = log.size();
  if (log.q.rows() != n || log.dq.rows() != n || log.tau.rows() != n) {
    throw ValidationError("log: channel lengths differ");
  }
  if (log.dq.cols() != log.q.cols() || log.tau.cols() != log.q.cols()) {
    throw ValidationError("log: channel widths differ");
  }
  if (n < 2) throw ValidationError("log: fewer than two samples");
  const double step = (log.t(n - 1) - log.t(0)) / static_cast<double>(n - 1);
  if (!(step > 0.0)) throw ValidationError("log: time must be strictly increasing");
  for (Eigen::Index i = 1; i < n; ++i) {
    const double dt = log.t(i) - log.t(i - 1);
    if (!(dt > 0.0)) throw ValidationError("log: time must be strictly increasing at row " + std::to_string(i));
    if (std::abs(log.t(i) - (log.t(0) + static_cast<double>(i) * step)) > 1e-6 * step) {
      throw ValidationError("log: non-uniform sampling at row " + std::to_string(i));
    }
  }
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_log_csv(const JointLog& log, std::ostream& out) {
  const int n = log.joints();
  out << 't';
  for (const char* p : {"q", "dq", "tau"}) {
    for (int i = 1; i <= n; ++i) out << ',' << p << i;
  }
  out << '\n';
  for (Eigen::Index r = 0; r < log.size(); ++r) {
    out << format_double(log.t(r));
    for (const Matrix* m : {&log.q, &log.dq, &log.tau}) {
      for (int c = 0; c < n; ++c) out << ',' << format_double((*m)(r, c));
    }
    out << '\n';
  }
}

inline void write_log_csv(const JointLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write log '" + path + "'");
  write_log_csv(log, out);
}

inline JointLog read_log_csv(std::istream& in, const std::string& name = "log") {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(name + ": empty file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 4 || (header.size() - 1) % 3 != 0 || header[0] != "t") {
    throw ParseError(name + ": header must be t,q1..qn,dq1..dqn,tau1..taun");
  }
  const int n = static_cast<int>((header.size() - 1) / 3);
  for (int i = 0; i < n; ++i) {
    const std::string k = std::to_string(i + 1);
    if (header[1 + i] != "q" + k || header[1 + n + i] != "dq" + k || header[1 + 2 * n + i] != "tau" + k) {
      throw ParseError(name + ": header must be t,q1..qn,dq1..dqn,tau1..taun");
    }
  }
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        throw ParseError(name + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
      row.push_back(v);
    }
    if (row.size() != header.size()) {
      throw ParseError(name + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) + " columns");
    }
    rows.push_back(std::move(row));
  }
  JointLog log;
  const auto s = static_cast<Eigen::Index>(rows.size());
  log.t.resize(s);
  log.q.resize(s, n);
  log.dq.resize(s, n);
  log.tau.resize(s, n);
  for (Eigen::Index r = 0; r < s; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    log.t(r) = row[0];
    for (int c = 0; c < n; ++c) {
      log.q(r, c) = row[1 + c];
      log.dq(r, c) = row[1 + n + c];
      log.tau(r, c) = row[1 + 2 * n + c];
    }
  }
  check_log(log);
  return log;
}

inline JointLog read_log_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open log '" + path + "'");
  return read_log_csv(in, path);
}

// One biquad (or first-order) section, direct form II transposed.
struct Section {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

// Digital Butterworth low-pass as cascaded sections, bilinear transform
// with frequency prewarping; unit gain at DC.
inline std::vector<Section> butterworth_lowpass(int order, double fs, double cutoff) {
  if (order < 1) throw ValidationError("filter order must be at least 1");
  if (!(cutoff > 0.0 && cutoff < fs / 2.0)) {
    throw ValidationError("cutoff must lie in (0, fs/2), got " + std::to_string(cutoff) + " Hz at fs " + std::to_string(fs) + " Hz");
  }
  const double k = 2.0 * fs;
  const double wa = k * std::tan(kPi * cutoff / fs);
  std::vector<Section> out;
  for (int i = 0; i < order / 2; ++i) {
    const double ang = kPi * (2.0 * i + order + 1) / (2.0 * order);
    const std::complex<double> p = wa * std::polar(1.0, ang);
    const std::complex<double> z = (k + p) / (k - p);
    Section s;
    s.a1 = -2.0 * z.real();
    s.a2 = std::norm(z);
    const double g = (1.0 + s.a1 + s.a2) / 4.0;
    s.b0 = g;
    s.b1 = 2.0 * g;
    s.b2 = g;
    out.push_back(s);
  }
  if (order % 2 == 1) {
    const double z = (k - wa) / (k + wa);
    Section s;
    s.a1 = -z;
    const double g = (1.0 - z) / 2.0;
    s.b0 = g;
    s.b1 = g;
    out.push_back(s);
  }
  return out;
}

// Runs the cascade over x in place. Each section starts in the steady state
// it would reach under a constant input equal to x[0].
inline void sos_filter(const std::vector<Section>& sections, std::vector<double>& x) {
  if (x.empty()) return;
  double level = x[0];
  for (const auto& s : sections) {
    // Steady state of DF2T for constant input u with output y = g u.
    const double g = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const double y = g * level;
    double z2 = s.b2 * level - s.a2 * y;
    double z1 = s.b1 * level - s.a1 * y + z2;
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
    level = y;
  }
}

inline int filter_padding(int order) { return 3 * (order + 1); }

inline std::vector<double> butterworth_zero_phase(const std::vector<double>& signal, double fs,
                                                  double cutoff, int order) {
  const auto sections = butterworth_lowpass(order, fs, cutoff);
  const int pad = filter_padding(order);
  const int n = static_cast<int>(signal.size());
  if (n <= pad) {
    throw ValidationError("signal too short for filtering: need more than " + std::to_string(pad) + " samples");
  }
  std::vector<double> ext;
  ext.reserve(static_cast<std::size_t>(n + 2 * pad));
  for (int i = pad; i >= 1; --i) ext.push_back(2.0 * signal[0] - signal[i]);
  ext.insert(ext.end(), signal.begin(), signal.end());
  for (int i = 1; i <= pad; ++i) ext.push_back(2.0 * signal[n - 1] - signal[n - 1 - i]);
  sos_filter(sections, ext);
  std::reverse(ext.begin(), ext.end());
  sos_filter(sections, ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + pad, ext.begin() + pad + n};
}

inline Vector butterworth_zero_phase(const Vector& signal, double fs, double cutoff, int order) {
  const std::vector<double> in(signal.data(), signal.data() + signal.size());
  const auto out = butterworth_zero_phase(in, fs, cutoff, order);
  return Eigen::Map<const Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

// Central differences inside, second-order one-sided stencils at the ends.
inline Vector differentiate(const Vector& x, double fs) {
  const auto n = x.size();
  if (n < 3) throw ValidationError("differentiate: need at least 3 samples");
  Vector d(n);
  const double h = 0.5 * fs;
  d(0) = (-3.0 * x(0) + 4.0 * x(1) - x(2)) * h;
  for (Eigen::Index i = 1; i + 1 < n; ++i) d(i) = (x(i + 1) - x(i - 1)) * h;
  d(n - 1) = (3.0 * x(n - 1) - 4.0 * x(n - 2) + x(n - 3)) * h;
  return d;
}

struct FilterConfig {
  double cutoff = 1.8;
  int order = 6;
  double ramp_duration = 5.0;
  // Dropped from the end: the backward pass starts there and its start-up
  // transient is not covered by the ramp. 0 keeps every sample.
  double tail_duration = 1.0;
};

inline Matrix filter_columns(const Matrix& m, double fs, double cutoff, int order) {
  Matrix out(m.rows(), m.cols());
  parallel_for(static_cast<std::size_t>(m.cols()), [&](std::size_t c) {
    const auto col = static_cast<Eigen::Index>(c);
    out.col(col) = butterworth_zero_phase(Vector(m.col(col)), fs, cutoff, order);
  });
  return out;
}

// Filters q, dq and tau, derives ddq from the filtered velocity (then
// filters it again) and drops the ramp-in samples.
inline JointLog process_log(const JointLog& log, const FilterConfig& config) {
  check_log(log);
  const double fs = log.rate();
  const double t0 = log.t(0);
  Eigen::Index first = 0;
  while (first < log.size() && log.t(first) - t0 < config.ramp_duration - 1e-9 / fs) ++first;
  if (first >= log.size()) {
    throw ValidationError("log (" + std::to_string(log.t(log.size() - 1) - t0) +
                          " s) is not longer than the ramp (" + std::to_string(config.ramp_duration) + " s)");
  }
  if (config.tail_duration < 0.0) throw ValidationError("tail duration must be non-negative");
  const double t_end = log.t(log.size() - 1);
  Eigen::Index last = log.size();
  while (last > first && t_end - log.t(last - 1) < config.tail_duration - 1e-9 / fs) --last;
  if (last <= first) {
    throw ValidationError("log (" + std::to_string(t_end - t0) + " s) is not longer than ramp plus tail (" +
                          std::to_string(config.ramp_duration + config.tail_duration) + " s)");
  }
  JointLog f;
  f.q = filter_columns(log.q, fs, config.cutoff, config.order);
  f.dq = filter_columns(log.dq, fs, config.cutoff, config.order);
  f.tau = filter_columns(log.tau, fs, config.cutoff, config.order);
  Matrix acc(log.size(), log.joints());
  for (int c = 0; c < log.joints(); ++c) acc.col(c) = differentiate(Vector(f.dq.col(c)), fs);
  f.ddq = filter_columns(acc, fs, config.cutoff, config.order);

  const Eigen::Index keep = last - first;
  JointLog out;
  out.t = log.t.segment(first, keep);
  out.q = f.q.middleRows(first, keep);
  out.dq = f.dq.middleRows(first, keep);
  out.tau = f.tau.middleRows(first, keep);
  out.ddq = f.ddq.middleRows(first, keep);
  return out;
}

}  // namespace dynident

#endif  // DYNIDENT_SIGNALS_HPP_
