#include "sjrp/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sjrp::parallel {

namespace {

thread_local bool tl_in_pool_region = false;

struct RegionGuard {
  RegionGuard() { tl_in_pool_region = true; }
  ~RegionGuard() { tl_in_pool_region = false; }
};

class Pool {
 public:
  static Pool& instance() {
    static Pool pool;
    return pool;
  }

  void set_threads(int n) {
    if (n < 1) n = 1;
    std::unique_lock<std::mutex> lk(m_);
    if (n == want_) return;
    shutdown_locked(lk);
    want_ = n;
    start_locked();
  }

  int threads() {
    std::lock_guard<std::mutex> lk(m_);
    return want_;
  }

  void run(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    // Nested calls (e.g. from inside a worker) run inline; the pool handles
    // one fork-join region at a time.
    if (tl_in_pool_region) {
      fn(0, n);
      return;
    }
    std::unique_lock<std::mutex> lk(m_);
    const int nw = want_;
    if (nw == 1 || n == 1) {
      lk.unlock();
      RegionGuard guard;
      fn(0, n);
      return;
    }
    job_ = &fn;
    job_n_ = n;
    job_workers_ = nw;
    pending_ = nw;
    error_ = nullptr;
    ++epoch_;
    cv_.notify_all();
    // The calling thread works too, as worker 0.
    const int64_t chunk = (n + nw - 1) / nw;
    lk.unlock();
    {
      RegionGuard guard;
      try {
        fn(0, std::min<int64_t>(chunk, n));
      } catch (...) {
        lk.lock();
        if (!error_) error_ = std::current_exception();
        lk.unlock();
      }
    }
    lk.lock();
    done_cv_.wait(lk, [&] { return pending_ == 1; });
    pending_ = 0;
    job_ = nullptr;
    if (error_) {
      auto err = error_;
      error_ = nullptr;
      lk.unlock();
      std::rethrow_exception(err);
    }
  }

 private:
  Pool() {
    want_ = static_cast<int>(std::thread::hardware_concurrency());
    if (want_ < 1) want_ = 1;
    std::unique_lock<std::mutex> lk(m_);
    start_locked();
  }

  ~Pool() {
    std::unique_lock<std::mutex> lk(m_);
    shutdown_locked(lk);
  }

  void start_locked() {
    stop_ = false;
    // Worker 0 is the caller; spawn want_-1 helpers.
    for (int w = 1; w < want_; ++w) {
      workers_.emplace_back([this, w] { worker_loop(w); });
    }
  }

  void shutdown_locked(std::unique_lock<std::mutex>& lk) {
    stop_ = true;
    ++epoch_;
    cv_.notify_all();
    auto ws = std::move(workers_);
    workers_.clear();
    lk.unlock();
    for (auto& t : ws) t.join();
    lk.lock();
  }

  void worker_loop(int id) {
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int64_t, int64_t)>* job = nullptr;
      int64_t n = 0;
      int nw = 0;
      {
        std::unique_lock<std::mutex> lk(m_);
        cv_.wait(lk, [&] { return stop_ || epoch_ != seen; });
        seen = epoch_;
        if (stop_) return;
        if (!job_ || id >= job_workers_) {
          continue;
        }
        job = job_;
        n = job_n_;
        nw = job_workers_;
      }
      const int64_t chunk = (n + nw - 1) / nw;
      const int64_t lo = std::min<int64_t>(chunk * id, n);
      const int64_t hi = std::min<int64_t>(lo + chunk, n);
      if (lo < hi) {
        RegionGuard guard;
        try {
          (*job)(lo, hi);
        } catch (...) {
          std::lock_guard<std::mutex> lk(m_);
          if (!error_) error_ = std::current_exception();
        }
      }
      {
        std::lock_guard<std::mutex> lk(m_);
        if (--pending_ == 1) done_cv_.notify_all();
      }
    }
  }

  std::mutex m_;
  std::condition_variable cv_, done_cv_;
  std::vector<std::thread> workers_;
  const std::function<void(int64_t, int64_t)>* job_ = nullptr;
  int64_t job_n_ = 0;
  int job_workers_ = 0;
  int pending_ = 0;
  std::exception_ptr error_;
  uint64_t epoch_ = 0;
  int want_ = 1;
  bool stop_ = false;
};

}  // namespace

void set_threads(int n) { Pool::instance().set_threads(n); }
int threads() { return Pool::instance().threads(); }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  Pool::instance().run(n, fn);
}

}  // namespace sjrp::parallel
