#include "nstate/tensor.hpp"

namespace nstate {

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += " x ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t ravel(const Shape& shape, std::span<const std::size_t> index) {
  require(index.size() == shape.size(), "index rank mismatch");
  std::size_t off = 0;
  for (std::size_t a = 0; a < shape.size(); ++a) {
    require(index[a] < shape[a], "index out of range");
    off = off * shape[a] + index[a];
  }
  return off;
}

std::vector<std::size_t> unravel(const Shape& shape, std::size_t offset) {
  require(offset < shape_size(shape), "offset out of range");
  std::vector<std::size_t> idx(shape.size());
  for (std::size_t a = shape.size(); a-- > 0;) {
    idx[a] = offset % shape[a];
    offset /= shape[a];
  }
  return idx;
}

}  // namespace nstate
