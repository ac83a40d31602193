#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "catalog/error.hpp"
#include "catalog/types.hpp"

namespace catalog {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file then renames over the target, so readers
// see either the old or the new content.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

json read_json(const std::filesystem::path& path);

// Two-space indented, trailing newline, UTF-8 kept as-is.
std::string dump_json(const json& j);
void write_json(const std::filesystem::path& path, const json& j);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

// Transport retries: max_attempts total tries, delay doubling from base_delay.
struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{200};
};

template <typename F>
auto with_retries(const RetryPolicy& policy, F&& fn) -> decltype(fn()) {
  auto delay = policy.base_delay;
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const TransportError&) {
      if (attempt >= policy.max_attempts) throw;
    }
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    delay *= 2;
  }
}

// Runs fn(i) for i in [0, n) on at most `limit` threads. fn must not throw.
template <typename F>
void parallel_for(std::size_t n, std::size_t limit, F&& fn) {
  const std::size_t workers = std::min(n, std::max<std::size_t>(limit, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

}  // namespace catalog
