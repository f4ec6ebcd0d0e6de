#include "data/augment.hpp"

#include <sstream>

#include "common/errors.hpp"

namespace lesion {

AugmentPolicy parse_policy(std::string_view text) {
  AugmentPolicy policy;
  if (text.empty() || text == "none") return policy;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    const std::string_view token = text.substr(start, end - start);
    if (token == "hflip") policy.push_back(Transform::kHFlip);
    else if (token == "vflip") policy.push_back(Transform::kVFlip);
    else if (token == "rot90") policy.push_back(Transform::kRot90);
    else if (token == "rot180") policy.push_back(Transform::kRot180);
    else if (token == "rot270") policy.push_back(Transform::kRot270);
    else throw ConfigError("unknown augmentation '" + std::string(token) + "' (valid: hflip,vflip,rot90,rot180,rot270)");
    start = end + 1;
  }
  return policy;
}

std::string format_policy(const AugmentPolicy& policy) {
  if (policy.empty()) return "none";
  std::ostringstream out;
  for (std::size_t i = 0; i < policy.size(); ++i) {
    if (i) out << ',';
    switch (policy[i]) {
      case Transform::kHFlip: out << "hflip"; break;
      case Transform::kVFlip: out << "vflip"; break;
      case Transform::kRot90: out << "rot90"; break;
      case Transform::kRot180: out << "rot180"; break;
      case Transform::kRot270: out << "rot270"; break;
      case Transform::kIdentity: out << "identity"; break;
    }
  }
  return out.str();
}

Image apply_transform(const Image& image, Transform t) {
  const std::size_t h = image.height, w = image.width, c = image.channels;
  const bool quarter = t == Transform::kRot90 || t == Transform::kRot270;
  if (quarter && h != w) throw DimensionError("quarter-turn rotation needs a square image, got " + image.dims());
  Image out(h, w, c);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::size_t sy = y, sx = x;
      switch (t) {
        case Transform::kIdentity: break;
        case Transform::kHFlip: sx = w - 1 - x; break;
        case Transform::kVFlip: sy = h - 1 - y; break;
        case Transform::kRot90: sy = w - 1 - x; sx = y; break;  // counter-clockwise
        case Transform::kRot180: sy = h - 1 - y; sx = w - 1 - x; break;
        case Transform::kRot270: sy = x; sx = h - 1 - y; break;
      }
      for (std::size_t ch = 0; ch < c; ++ch) out.at(y, x, ch) = image.at(sy, sx, ch);
    }
  }
  return out;
}

Sample apply_transform(const Sample& sample, Transform t) {
  Sample out;
  out.id = sample.id;
  out.label = sample.label;
  out.image = apply_transform(sample.image, t);
  if (sample.mask) out.mask = apply_transform(*sample.mask, t);
  return out;
}

Sample augment(const Sample& sample, const AugmentPolicy& policy, Rng& rng) {
  if (policy.empty()) return sample;
  const auto pick = rng.below(policy.size() + 1);
  return apply_transform(sample, pick == 0 ? Transform::kIdentity : policy[pick - 1]);
}

}  // namespace lesion
