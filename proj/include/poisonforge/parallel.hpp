#pragma once

namespace poisonforge {

// Worker count used by the OpenMP kernels. 1 selects the serial code path.
// Results are bit-identical for any thread count: every parallel loop ranges
// over independent output elements and keeps a fixed inner reduction order.
int num_threads();
void set_num_threads(int n);
int hardware_threads();

} // namespace poisonforge
