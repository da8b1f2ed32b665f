#pragma once

#include <cstddef>
#include <functional>

namespace plk {

// Worker-thread cap for library kernels. Initialized from the PLK_THREADS
// environment variable on first use (unset or 0 = hardware concurrency).
unsigned thread_count();
void set_thread_count(unsigned n);  // 0 = hardware concurrency

// Runs body(begin, end) over contiguous chunks of [0, n). Each index is
// visited exactly once; callers write results per index so output never
// depends on the number of threads.
void parallel_for_chunks(std::size_t n,
                         const std::function<void(std::size_t, std::size_t)>& body,
                         std::size_t min_chunk = 256);

template <typename F>
void parallel_for(std::size_t n, F&& f, std::size_t min_chunk = 256) {
  parallel_for_chunks(
      n,
      [&f](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) f(i);
      },
      min_chunk);
}

}  // namespace plk
