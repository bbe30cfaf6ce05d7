#pragma once

#include <cstdint>
#include <vector>

namespace deepcas {

// A scheduled set of subsystems: sorted, 1-based indices.
using Subset = std::vector<int>;
using ActionIndex = std::size_t;

// C(n, k); saturates at UINT64_MAX on overflow.
std::uint64_t binomial(int n, int k);

// Colexicographic unranking of M-subsets of {1..N}: rank = sum_j C(c_j, j+1)
// over the sorted 0-based elements c_0 < ... < c_{M-1}.
Subset action_to_subset(ActionIndex action, int N, int M);
ActionIndex subset_to_action(const Subset& subset, int N);

}  // namespace deepcas
