#pragma once

#include <cstdint>
#include <functional>

namespace pafnucy {

// Caps the number of worker threads used by parallel_for. 0 restores the
// hardware default.
void set_max_threads(int n);
int max_threads();

// Runs fn(begin, end) over a partition of [0, n). Each index is handled by
// exactly one invocation and every invocation processes a contiguous range
// in order, so results must not depend on how the range is split. `work`
// estimates the total operation count; small jobs run inline.
void parallel_for(int64_t n, int64_t work,
                  const std::function<void(int64_t, int64_t)>& fn);

}  // namespace pafnucy
