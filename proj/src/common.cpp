#include "mcw/common.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace mcw {

bool box_contains(const Box& box, const Vec& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!box[static_cast<std::size_t>(i)].contains(x(i))) return false;
  }
  return true;
}

Box full_box(int K) { return Box(static_cast<std::size_t>(K), Interval{}); }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ValidationError("invalid number in box: '" + s + "'");
  }
  if (used != s.size()) throw ValidationError("invalid number in box: '" + s + "'");
  return v;
}

}  // namespace

Box parse_box(const std::string& text, int K) {
  Box box;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    Interval iv;
    if (!item.empty() && (item.front() == '(' || item.front() == '[')) {
      iv.lo_open = item.front() == '(';
      item.erase(0, 1);
    }
    if (!item.empty() && (item.back() == ')' || item.back() == ']')) {
      iv.hi_open = item.back() == ')';
      item.pop_back();
    }
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ValidationError("box item needs lo:hi, got '" + item + "'");
    iv.lo = parse_number(trim(item.substr(0, colon)));
    iv.hi = parse_number(trim(item.substr(colon + 1)));
    if (!(iv.lo <= iv.hi)) throw ValidationError("box item has lo > hi");
    box.push_back(iv);
  }
  if (static_cast<int>(box.size()) != K) {
    throw ValidationError("box has " + std::to_string(box.size()) + " intervals, expected " +
                          std::to_string(K));
  }
  return box;
}

double log_sum_exp(std::span<const double> values) {
  LogSumExp acc;
  for (double v : values) acc.add(v);
  return acc.value();
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MCW_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n_tasks, int threads,
                  const std::function<void(std::size_t)>& task) {
  const std::size_t workers =
      std::min<std::size_t>(n_tasks, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n_tasks; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n_tasks || failed.load()) return;
        try {
          task(i);
        } catch (...) {
          bool expected = false;
          if (failed.compare_exchange_strong(expected, true)) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

Vec symmetric_eigenvalues(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed");
  return es.eigenvalues();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace mcw
