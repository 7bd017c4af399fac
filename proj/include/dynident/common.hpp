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

#ifndef DYNIDENT_COMMON_HPP_
#define DYNIDENT_COMMON_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace dynident {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Vector10 = Eigen::Matrix<double, 10, 1>;

inline constexpr double kPi = 3.14159265358979323846;

// Malformed input text (JSON, CSV).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Well-formed input that violates a documented invariant. The message
// starts with the offending field path when one exists.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: singular system, solver non-convergence, infeasibility.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

inline double sign_of(double x) {
  if (x > 0.0) return 1.0;
  if (x < 0.0) return -1.0;
  return 0.0;
}

// Worker count used by the data-parallel loops. 0 means "not set": fall
// back to DYNIDENT_THREADS, then to the hardware concurrency.
inline unsigned& thread_count_override() {
  static unsigned value = 0;
  return value;
}

inline void set_thread_count(unsigned n) { thread_count_override() = n; }

inline unsigned thread_count() {
  if (thread_count_override() > 0) return thread_count_override();
  if (const char* env = std::getenv("DYNIDENT_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n). Each index is handled by exactly one worker,
// so callers writing to slot i get results independent of scheduling.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace dynident

#endif  // DYNIDENT_COMMON_HPP_
