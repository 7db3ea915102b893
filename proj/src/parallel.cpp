#include "imbeval/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace imbeval {

void apply_thread_env() {
#ifdef _OPENMP
    const char* env = std::getenv("IMBEVAL_THREADS");
    if (!env) return;
    try {
        int n = std::stoi(env);
        if (n > 0) omp_set_num_threads(n);
    } catch (...) {
        // ignore unparsable values; OpenMP defaults apply
    }
#endif
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace imbeval
