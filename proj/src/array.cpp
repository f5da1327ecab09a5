#include "seqcrf/array.hpp"

#include <stdexcept>

namespace seqcrf {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

template <typename S>
Array<S>::Array(Shape s, std::vector<S> d) : shape(std::move(s)), data(std::move(d)) {
  if (data.size() != shape_size(shape)) {
    throw std::invalid_argument("Array: " + std::to_string(data.size()) +
                                " values do not fill shape " + shape_string(shape));
  }
}

template struct Array<float>;
template struct Array<double>;

}  // namespace seqcrf
