#include "nlx/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef NLX_HAVE_OPENMP
#include <omp.h>
#endif

namespace nlx {

namespace {
int g_threads = 0;
}

void set_thread_count(int threads)
{
    g_threads = threads > 0 ? threads : 0;
}

int thread_count()
{
#ifdef NLX_HAVE_OPENMP
    return g_threads > 0 ? g_threads : omp_get_max_threads();
#else
    return 1;
#endif
}

void configure_threads_from_env()
{
    if (const char* env = std::getenv("NLX_THREADS")) {
        try {
            set_thread_count(std::stoi(env));
        } catch (const std::exception&) {
            // unparsable values leave the default in place
        }
    }
}

namespace detail {

void parallel_range(std::size_t n, void* ctx, IndexFn fn)
{
#ifdef NLX_HAVE_OPENMP
    const int workers = thread_count();
    const std::size_t chunk = (n + static_cast<std::size_t>(workers) - 1) / static_cast<std::size_t>(workers);
#pragma omp parallel for schedule(static) num_threads(workers)
    for (int w = 0; w < workers; ++w) {
        const std::size_t begin = static_cast<std::size_t>(w) * chunk;
        const std::size_t end = begin + chunk < n ? begin + chunk : n;
        if (begin < end) {
            fn(ctx, begin, end);
        }
    }
#else
    fn(ctx, 0, n);
#endif
}

}  // namespace detail
}  // namespace nlx
