#include "ctseq/image.hpp"

#include <cmath>

namespace ctseq {

Image Image::from_values(int side, std::vector<double> values) {
  if (side < 1) throw std::invalid_argument("Image: side must be >= 1");
  if (values.size() != static_cast<std::size_t>(side) * side)
    throw std::invalid_argument("Image: value count does not match side");
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw std::invalid_argument("Image: value outside [0, 1]");
  }
  Image img;
  img.side_ = side;
  img.values_ = std::move(values);
  return img;
}

}  // namespace ctseq
