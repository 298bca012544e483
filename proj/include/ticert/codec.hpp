#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ticert {

// Row-major codec between tuples in E^n and flat indices. The first
// coordinate is the most significant digit, so (x_1, ..., x_n) maps to
// sum_k x_k * |E|^(n-1-k).
class TupleCodec {
 public:
  TupleCodec(std::size_t base_size, std::size_t n);

  std::size_t base_size() const noexcept { return base_size_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t size() const noexcept { return size_; }

  // |E|^(n-1-k): the flat-index step for coordinate k.
  std::size_t stride(std::size_t k) const { return strides_[k]; }

  std::size_t encode(std::span<const std::size_t> tuple) const;
  std::vector<std::size_t> decode(std::size_t index) const;
  std::size_t coordinate(std::size_t index, std::size_t k) const {
    return (index / strides_[k]) % base_size_;
  }

  // Overflow-safe |E|^n, or 0 when it exceeds `cap`.
  static std::size_t checked_power(std::size_t base, std::size_t n,
                                   std::size_t cap);

 private:
  std::size_t base_size_;
  std::size_t n_;
  std::size_t size_;
  std::vector<std::size_t> strides_;
};

}  // namespace ticert
