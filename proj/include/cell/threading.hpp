#pragma once

#include <cstddef>
#include <functional>

namespace cell::threading {

// Worker cap, initialized from the CELL_THREADS environment variable
// (default: hardware concurrency). Results are required to be identical
// for every cap value, so callers must only use for_chunks below.
int max_threads();
void set_max_threads(int n);

// Splits [0, n) into consecutive chunks of fixed size and runs
// fn(chunk_index, begin, end) for each, possibly on several threads.
// Chunk boundaries depend only on n and chunk_size, never on the thread
// count; callers merge per-chunk partial results in chunk order.
void for_chunks(std::size_t n, std::size_t chunk_size,
                const std::function<void(std::size_t, std::size_t,
                                         std::size_t)>& fn);

}  // namespace cell::threading
