#pragma once

#include <cstdint>

namespace simarena {

// P[X >= wins] for X ~ Binomial(n, 1/2): sum_{i=wins}^{n} C(n, i) / 2^n.
// The sum is formed with exact integer binomials; the final division is
// correctly rounded for n <= 1000.
double binomial_upper_tail(std::int64_t wins, std::int64_t n);

}  // namespace simarena
