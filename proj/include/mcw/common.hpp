#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcw {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Bad input: malformed model, flags out of range, precondition violated by the caller.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation ran but could not produce a trustworthy answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  void merge(const CompensatedSum& other) {
    add(other.sum_);
    add(other.comp_);
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Streaming log-sum-exp with a running maximum. Mergeable; order of merges
/// only affects the last few ulps.
class LogSumExp {
 public:
  void add(double log_term) {
    if (log_term == kNegInf) return;
    if (log_term <= max_) {
      acc_.add(std::exp(log_term - max_));
    } else {
      const double scale = std::exp(max_ - log_term);
      CompensatedSum rescaled;
      rescaled.add(acc_.value() * scale);
      rescaled.add(1.0);
      acc_ = rescaled;
      max_ = log_term;
    }
  }
  void merge(const LogSumExp& other) {
    if (other.max_ == kNegInf) return;
    if (max_ == kNegInf) {
      *this = other;
      return;
    }
    if (other.max_ <= max_) {
      acc_.add(other.acc_.value() * std::exp(other.max_ - max_));
    } else {
      CompensatedSum rescaled;
      rescaled.add(acc_.value() * std::exp(max_ - other.max_));
      rescaled.add(other.acc_.value());
      acc_ = rescaled;
      max_ = other.max_;
    }
  }
  double value() const {
    if (max_ == kNegInf) return kNegInf;
    return max_ + std::log(acc_.value());
  }

 private:
  double max_ = kNegInf;
  CompensatedSum acc_;
};

/// One side of a box; open ends exclude the endpoint.
struct Interval {
  double lo = -1.0;
  double hi = 1.0;
  bool lo_open = false;
  bool hi_open = false;

  bool contains(double v) const {
    const bool above = lo_open ? v > lo : v >= lo;
    const bool below = hi_open ? v < hi : v <= hi;
    return above && below;
  }
};

using Box = std::vector<Interval>;

bool box_contains(const Box& box, const Vec& x);
Box full_box(int K);
/// Parses "lo:hi" items; a leading '(' or trailing ')' marks an open end,
/// e.g. "(0:1]" or "-1:0)".
Box parse_box(const std::string& text, int K);

double log_sum_exp(std::span<const double> values);

/// Thread budget resolution: explicit value if positive, else MCW_THREADS, else hardware.
int resolve_threads(int requested);

/// Runs task(i) for i in [0, n_tasks) on at most `threads` workers. Tasks must
/// write to disjoint state; scheduling order is unspecified.
void parallel_for(std::size_t n_tasks, int threads,
                  const std::function<void(std::size_t)>& task);

/// Eigenvalues of a symmetric matrix in ascending order.
Vec symmetric_eigenvalues(const Mat& m);

std::string format_double(double v);

}  // namespace mcw
