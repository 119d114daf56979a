#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

namespace crosspoint {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_key(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b + 0x632BE59BD9B4E019ULL));
}

// Counter-based generator: the stream for sample `index` depends only on
// (key, index), never on which worker draws it or in which order.
class CounterRng {
 public:
  CounterRng(std::uint64_t key, std::uint64_t index) : state_(derive_key(key, index)) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Callers write results
// into per-index slots, so the outcome never depends on the schedule.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  unsigned workers = std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// Streaming mean and covariance of a fixed-length vector statistic (Welford),
// mergeable in a fixed order (Chan et al.). Full covariance is kept for short
// statistics, only the diagonal for long ones.
class RunningStats {
 public:
  explicit RunningStats(std::size_t m = 0, bool full = true) : m_(m), full_(full), mean_(m, 0.0), m2_(full ? m * m : m, 0.0), delta_(m) {}

  std::size_t dim() const { return m_; }
  std::size_t count() const { return count_; }
  bool full() const { return full_; }

  void add(const double* x) {
    ++count_;
    const double inv = 1.0 / static_cast<double>(count_);
    for (std::size_t a = 0; a < m_; ++a) {
      delta_[a] = x[a] - mean_[a];
      mean_[a] += delta_[a] * inv;
    }
    if (full_) {
      for (std::size_t a = 0; a < m_; ++a) {
        const double da = delta_[a];
        double* row = &m2_[a * m_];
        for (std::size_t b = 0; b < m_; ++b) row[b] += da * (x[b] - mean_[b]);
      }
    } else {
      for (std::size_t a = 0; a < m_; ++a) m2_[a] += delta_[a] * (x[a] - mean_[a]);
    }
  }

  void merge(const RunningStats& o) {
    if (o.count_ == 0) return;
    if (count_ == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(count_), nb = static_cast<double>(o.count_);
    const double n = na + nb;
    std::vector<double> d(m_);
    for (std::size_t a = 0; a < m_; ++a) d[a] = o.mean_[a] - mean_[a];
    if (full_) {
      for (std::size_t a = 0; a < m_; ++a)
        for (std::size_t b = 0; b < m_; ++b) m2_[a * m_ + b] += o.m2_[a * m_ + b] + d[a] * d[b] * na * nb / n;
    } else {
      for (std::size_t a = 0; a < m_; ++a) m2_[a] += o.m2_[a] + d[a] * d[a] * na * nb / n;
    }
    for (std::size_t a = 0; a < m_; ++a) mean_[a] += d[a] * nb / n;
    count_ += o.count_;
  }

  double mean(std::size_t a) const { return mean_[a]; }

  // Covariance of the sample mean (sample covariance / count).
  double mean_cov(std::size_t a, std::size_t b) const {
    if (count_ < 2) return 0.0;
    const double denom = static_cast<double>(count_ - 1) * static_cast<double>(count_);
    if (full_) return m2_[a * m_ + b] / denom;
    return a == b ? m2_[a] / denom : 0.0;
  }

  double std_err(std::size_t a) const { return std::sqrt(std::max(0.0, mean_cov(a, a))); }

 private:
  std::size_t m_;
  bool full_;
  std::size_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
  std::vector<double> delta_;
};

// Monte-Carlo driver. Samples are split into fixed-size chunks; every chunk
// builds its own worker (scratch space) and statistics, and the chunks are
// merged in index order. `make_worker()` returns a callable
// worker(CounterRng&, double* out) that writes one statistic vector.
inline constexpr std::size_t kChunkSize = 2048;

template <class MakeWorker>
RunningStats monte_carlo(std::size_t m, std::size_t samples, std::uint64_t key, unsigned threads, MakeWorker&& make_worker, bool full = true) {
  const std::size_t chunks = (samples + kChunkSize - 1) / kChunkSize;
  std::vector<RunningStats> partial(chunks, RunningStats(m, full));
  parallel_for(chunks, threads, [&](std::size_t c) {
    auto worker = make_worker();
    std::vector<double> out(m);
    RunningStats st(m, full);
    const std::size_t lo = c * kChunkSize, hi = std::min(samples, lo + kChunkSize);
    for (std::size_t i = lo; i < hi; ++i) {
      CounterRng rng(key, i);
      worker(rng, out.data());
      st.add(out.data());
    }
    partial[c] = std::move(st);
  });
  RunningStats total(m, full);
  for (const auto& p : partial) total.merge(p);
  return total;
}

}  // namespace crosspoint
