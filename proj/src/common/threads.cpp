#include "fedperi/common/threads.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fedperi {

int configured_threads() {
  if (const char* env = std::getenv("FEDPERISIM_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
      // fall through to the runtime default
    }
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void apply_thread_limit() {
#ifdef _OPENMP
  omp_set_num_threads(configured_threads());
#endif
}

}  // namespace fedperi
