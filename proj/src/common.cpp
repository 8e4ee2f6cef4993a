#include "nnmf/common.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nnmf {

namespace {
std::atomic<int> g_threads{1};
thread_local bool t_in_worker = false;
}

void set_num_threads(int n) { g_threads.store(std::max(1, n)); }

int num_threads() { return g_threads.load(); }

namespace detail {

void run_parallel(Index begin, Index end, const void* ctx, void (*fn)(const void*, Index, Index)) {
  const Index total = end - begin;
  if (total <= 0) return;
  const Index workers = std::min<Index>(num_threads(), total);
  // Nested calls run inline on the calling worker.
  if (workers <= 1 || t_in_worker) {
    fn(ctx, begin, end);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const Index chunk = (total + workers - 1) / workers;
  for (Index w = 0; w < workers; ++w) {
    const Index lo = begin + w * chunk;
    const Index hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      t_in_worker = true;
      try {
        fn(ctx, lo, hi);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

Fnv1a& Fnv1a::add(std::string_view bytes) {
  for (unsigned char c : bytes) {
    state_ ^= c;
    state_ *= 1099511628211ull;
  }
  return *this;
}

Fnv1a& Fnv1a::add(std::uint64_t v) {
  for (int b = 0; b < 8; ++b) {
    state_ ^= (v >> (8 * b)) & 0xffu;
    state_ *= 1099511628211ull;
  }
  return *this;
}

Fnv1a& Fnv1a::add(double v) { return add(std::bit_cast<std::uint64_t>(v)); }

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("cannot format double");
  return std::string(buf, ptr);
}

}  // namespace nnmf
