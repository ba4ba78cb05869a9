#pragma once

#include <cstddef>
#include <cstdint>
#include <type_traits>

namespace nlx {

/// Slices smaller than this run on the calling thread.
inline constexpr std::size_t kParallelThreshold = 8192;

/// Sets the worker count for node loops (0 restores the runtime default).
void set_thread_count(int threads);
int thread_count();

/// Reads NLX_THREADS from the environment, if present, and applies it.
void configure_threads_from_env();

namespace detail {
using IndexFn = void (*)(void* ctx, std::size_t begin, std::size_t end);
void parallel_range(std::size_t n, void* ctx, IndexFn fn);
}  // namespace detail

/// Calls body(i) for i in [0, n). Every index is written by exactly one
/// worker, so results do not depend on the thread count.
template <typename Body>
void parallel_for(std::size_t n, Body&& body)
{
    if (n < kParallelThreshold) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    auto trampoline = [](void* ctx, std::size_t begin, std::size_t end) {
        auto& fn = *static_cast<std::remove_reference_t<Body>*>(ctx);
        for (std::size_t i = begin; i < end; ++i) {
            fn(i);
        }
    };
    detail::parallel_range(n, const_cast<void*>(static_cast<const void*>(&body)), trampoline);
}

}  // namespace nlx
