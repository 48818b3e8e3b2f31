#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace cfsim {

// Selects between the OpenMP kernels and their serial reference versions.
// Both produce identical (exact) results; the serial path exists for testing.
enum class Exec { serial, parallel };

// out[k] = fn(k) for k < count. Results land in index order whatever the
// schedule, so reductions over `out` are deterministic. The first exception
// thrown by any task is rethrown on the calling thread.
template <class T, class Fn>
std::vector<T> map_indexed(std::size_t count, Fn&& fn, Exec exec) {
  std::vector<T> out(count);
  if (exec == Exec::serial) {
    for (std::size_t k = 0; k < count; ++k) out[k] = fn(k);
    return out;
  }
  std::exception_ptr failure;
  const long long n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 4)
  for (long long k = 0; k < n; ++k) {
    try {
      out[static_cast<std::size_t>(k)] = fn(static_cast<std::size_t>(k));
    } catch (...) {
#pragma omp critical(cfsim_map_indexed)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace cfsim
