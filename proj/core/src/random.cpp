#include "neurostrike/random.hpp"

#include <algorithm>
#include <numeric>

#include "neurostrike/error.hpp"

namespace neurostrike {

std::vector<int> sample_without_replacement(Rng& rng, int n, int k) {
    if (k < 0 || k > n) {
        throw RangeError("random", "k", "cannot draw " + std::to_string(k) + " of " + std::to_string(n));
    }
    std::vector<int> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < k; ++i) {
        const auto j = static_cast<std::size_t>(i) + rng.below(static_cast<std::uint64_t>(n - i));
        std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    }
    pool.resize(static_cast<std::size_t>(k));
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace neurostrike
