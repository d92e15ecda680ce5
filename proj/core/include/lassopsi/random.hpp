#pragma once

#include <cstdint>
#include <functional>
#include <random>

namespace lassopsi {

using Rng = std::mt19937_64;

/// Seed of the independent stream `stream` derived from `master`:
/// splitmix64(master + 0x9E3779B97F4A7C15 * (stream + 1)).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept;

/// Worker count: `requested` when positive, else $LASSOPSI_THREADS, else the
/// hardware concurrency.
int resolve_threads(int requested);

/// Runs body(i) for i in [0, count) on up to `threads` workers. Results must
/// be written to per-index slots so the outcome is scheduling independent.
/// The first exception thrown by any body is rethrown after all workers stop.
void parallel_for(int count, int threads, const std::function<void(int)>& body);

} // namespace lassopsi
