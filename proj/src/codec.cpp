#include "ticert/codec.hpp"

#include <limits>
#include <string>

#include "ticert/error.hpp"

namespace ticert {

std::size_t TupleCodec::checked_power(std::size_t base, std::size_t n,
                                      std::size_t cap) {
  std::size_t result = 1;
  for (std::size_t k = 0; k < n; ++k) {
    if (base != 0 && result > cap / base) return 0;
    result *= base;
  }
  return result > cap ? 0 : result;
}

TupleCodec::TupleCodec(std::size_t base_size, std::size_t n)
    : base_size_(base_size), n_(n), size_(0), strides_(n) {
  if (base_size == 0 || n == 0) {
    fail("tensor", ErrorCode::InvalidArgument,
         "tuple codec needs a nonempty base and n >= 1");
  }
  size_ = checked_power(base_size, n, std::numeric_limits<std::size_t>::max());
  if (size_ == 0) {
    fail("tensor", ErrorCode::BudgetExceeded, "|E|^n overflows size_t");
  }
  std::size_t stride = 1;
  for (std::size_t k = n; k-- > 0;) {
    strides_[k] = stride;
    stride *= base_size;
  }
}

std::size_t TupleCodec::encode(std::span<const std::size_t> tuple) const {
  if (tuple.size() != n_) {
    fail("tensor", ErrorCode::DimensionMismatch,
         "tuple has " + std::to_string(tuple.size()) + " entries, expected " +
             std::to_string(n_));
  }
  std::size_t index = 0;
  for (std::size_t k = 0; k < n_; ++k) {
    if (tuple[k] >= base_size_) {
      fail("tensor", ErrorCode::IndexOutOfRange,
           "tuple entry " + std::to_string(tuple[k]) + " at position " +
               std::to_string(k) + " is not a state index");
    }
    index += tuple[k] * strides_[k];
  }
  return index;
}

std::vector<std::size_t> TupleCodec::decode(std::size_t index) const {
  if (index >= size_) {
    fail("tensor", ErrorCode::IndexOutOfRange,
         "flat index " + std::to_string(index) + " out of range");
  }
  std::vector<std::size_t> tuple(n_);
  for (std::size_t k = 0; k < n_; ++k) tuple[k] = coordinate(index, k);
  return tuple;
}

}  // namespace ticert
