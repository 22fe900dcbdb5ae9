#pragma once

namespace fedperi {

// Thread cap from FEDPERISIM_THREADS, else the OpenMP default. Always >= 1.
int configured_threads();

// Applies configured_threads() to the OpenMP runtime.
void apply_thread_limit();

}  // namespace fedperi
