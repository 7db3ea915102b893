#pragma once

namespace imbeval {

// Applies the IMBEVAL_THREADS environment variable (when set and positive)
// to the OpenMP runtime. Safe to call when built without OpenMP.
void apply_thread_env();

int max_threads();

}  // namespace imbeval
