#pragma once

#include <cstdint>
#include <vector>

// Exact distance transforms on binary site grids (site = nonzero cell).
// Euclidean squared distances are exact integers (two-phase lower-envelope
// method); Chebyshev uses a two-pass 8-neighbour chamfer, which is exact for
// that metric. Both are verified against O(n^2) nearest-site search in the
// test suite.

namespace attnet::dist {

// Squared Euclidean distance from every cell to its nearest site.
// Throws std::invalid_argument if the grid contains no site.
std::vector<int64_t> euclidean_sq(const std::vector<uint8_t>& sites, int H, int W);

// Chebyshev (L-inf) distance from every cell to its nearest site.
std::vector<int32_t> chebyshev(const std::vector<uint8_t>& sites, int H, int W);

}  // namespace attnet::dist
