#include "simarena/stats.hpp"

#include <cmath>

#include <boost/multiprecision/cpp_int.hpp>

#include "simarena/error.hpp"

namespace simarena {

double binomial_upper_tail(std::int64_t wins, std::int64_t n) {
  using boost::multiprecision::cpp_int;
  if (n < 0 || wins < 0 || wins > n) throw DataError("binomial_upper_tail: need 0 <= wins <= n");
  if (wins == 0) return 1.0;

  // C(n, i) built incrementally from C(n, n) = 1 downwards.
  cpp_int term = 1;
  cpp_int sum = 0;
  for (std::int64_t i = n; i >= wins; --i) {
    sum += term;
    // C(n, i-1) = C(n, i) * i / (n - i + 1)
    term = term * i / (n - i + 1);
  }

  if (n <= 1000) {
    // sum < 2^1000 converts without overflow; ldexp by -n is exact.
    return std::ldexp(sum.convert_to<double>(), static_cast<int>(-n));
  }
  const auto bits = static_cast<std::int64_t>(msb(sum));
  const std::int64_t shift = bits > 62 ? bits - 62 : 0;
  const cpp_int top = sum >> static_cast<unsigned>(shift);
  return std::ldexp(top.convert_to<double>(), static_cast<int>(shift - n));
}

}  // namespace simarena
