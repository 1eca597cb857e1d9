#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cyclesql {

/// Runs body(index, worker) for every index in [0, n) on `jobs` threads.
/// Indices are handed out in increasing order; the first exception thrown
/// stops further hand-outs and is rethrown after all workers finish.
template <typename Body>
void parallel_for(std::size_t n, int jobs, Body&& body) {
   const auto workers = static_cast<std::size_t>(std::clamp<long>(jobs, 1, static_cast<long>(std::max<std::size_t>(n, 1))));
   std::atomic<std::size_t> next{0};
   std::atomic<bool> stop{false};
   std::exception_ptr error;
   std::mutex error_mutex;
   auto run = [&](int worker) {
      for (std::size_t i = next++; i < n && !stop; i = next++) {
         try {
            body(i, worker);
         } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            stop = true;
         }
      }
   };
   if (workers == 1) {
      run(0);
   } else {
      std::vector<std::thread> threads;
      threads.reserve(workers);
      for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(run, static_cast<int>(w));
      for (auto& t : threads) t.join();
   }
   if (error) std::rethrow_exception(error);
}

} // namespace cyclesql
