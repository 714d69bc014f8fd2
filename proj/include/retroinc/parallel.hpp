#pragma once

#include <cstddef>
#include <functional>

namespace retroinc {

// Runs fn(0) .. fn(count-1) on up to `workers` threads. Tasks own disjoint
// output slots, so results do not depend on the schedule. workers <= 1 runs
// inline; the first exception thrown by any task is rethrown.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

int hardware_workers();

} // namespace retroinc
