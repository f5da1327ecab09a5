#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace seqcrf {

using Shape = std::vector<std::size_t>;

// Product of dimensions; the empty shape is a scalar of size 1.
std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major buffer with a shape.
template <typename S>
struct Array {
  Shape shape;
  std::vector<S> data;

  Array() = default;
  explicit Array(Shape s, S fill = S(0))
      : shape(std::move(s)), data(shape_size(shape), fill) {}
  Array(Shape s, std::vector<S> d);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::span<S> span() { return data; }
  std::span<const S> span() const { return data; }

  S& operator()(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  S operator()(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
};

extern template struct Array<float>;
extern template struct Array<double>;

}  // namespace seqcrf
