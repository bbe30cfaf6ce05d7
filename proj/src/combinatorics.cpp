#include "deepcas/combinatorics.hpp"

#include <limits>
#include <string>

#include "deepcas/errors.hpp"

namespace deepcas {

std::uint64_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) {
    const std::uint64_t num = static_cast<std::uint64_t>(n - k + i);
    // r * num / i is exact at every step; guard the multiplication.
    if (r > std::numeric_limits<std::uint64_t>::max() / num)
      return std::numeric_limits<std::uint64_t>::max();
    r = r * num / static_cast<std::uint64_t>(i);
  }
  return r;
}

Subset action_to_subset(ActionIndex action, int N, int M) {
  require(N >= 1 && M >= 1 && M <= N, "action_to_subset: need 1 <= M <= N");
  if (action >= binomial(N, M))
    throw ContractViolation("action_to_subset: index " + std::to_string(action) +
                            " out of range");
  Subset out(M);
  std::uint64_t rest = action;
  int upper = N - 1;
  for (int j = M - 1; j >= 0; --j) {
    int c = upper;
    while (binomial(c, j + 1) > rest) --c;
    rest -= binomial(c, j + 1);
    out[j] = c + 1;
    upper = c - 1;
  }
  return out;
}

ActionIndex subset_to_action(const Subset& subset, int N) {
  ActionIndex rank = 0;
  int prev = 0;
  for (std::size_t j = 0; j < subset.size(); ++j) {
    const int e = subset[j];
    if (e < 1 || e > N || e <= prev)
      throw ContractViolation("subset_to_action: elements must be increasing within 1..N");
    rank += binomial(e - 1, static_cast<int>(j) + 1);
    prev = e;
  }
  return rank;
}

}  // namespace deepcas
