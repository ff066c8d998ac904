#pragma once

#include <algorithm>
#include <cmath>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rcm {

inline int default_workers() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs fn(i) for i in [0, count) on up to `workers` threads. Tasks are
// claimed dynamically; callers write results into slot i, so reductions done
// afterwards in index order are schedule independent. The first exception
// thrown by any task is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::int64_t count, int workers, Fn&& fn) {
  if (count <= 0) return;
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::min<std::int64_t>(count, 1 << 16))));
  if (workers == 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (;;) {
      const std::int64_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  for (int w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

// Neumaier-compensated running sum.
class KahanSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Mean and standard error of a sample, compensated. Values are consumed in
// the given order, which callers keep fixed (realization index order).
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  double sd = 0.0;
  std::int64_t count = 0;
};

template <typename Range>
MeanSe mean_se(const Range& values) {
  MeanSe r;
  KahanSum s;
  for (double v : values) {
    s.add(v);
    ++r.count;
  }
  if (r.count == 0) return r;
  r.mean = s.value() / static_cast<double>(r.count);
  KahanSum q;
  for (double v : values) q.add((v - r.mean) * (v - r.mean));
  if (r.count > 1) {
    r.sd = std::sqrt(q.value() / static_cast<double>(r.count - 1));
    r.se = r.sd / std::sqrt(static_cast<double>(r.count));
  }
  return r;
}

}  // namespace rcm
