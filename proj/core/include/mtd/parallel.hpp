#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace mtd {

/// Worker count: MTD_NUM_WORKERS when set and positive, else the hardware
/// concurrency (at least 1).
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on up to `workers` threads, each taking a
/// strided share of the indices. Rethrows the first exception by index.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace mtd
