// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace dragon {

/// Process-wide cap on worker threads (the CLI `--threads` flag). 0 means
/// hardware concurrency.
void set_max_threads(int threads);
int max_threads();

/// Runs body(i) for i in [begin, end) on up to max_threads() workers.
/// Work items are claimed dynamically, so body must only write to
/// item-private state for results to be deterministic.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& body);

/// Like parallel_for, but also passes the worker slot in [0, max_threads()).
void parallel_for_worker(std::size_t begin, std::size_t end,
                         const std::function<void(std::size_t, int)>& body);

} // namespace dragon
