#pragma once

#include <string_view>
#include <vector>

#include "data/sample.hpp"
#include "numerics/random.hpp"

namespace lesion {

enum class Transform { kIdentity, kHFlip, kVFlip, kRot90, kRot180, kRot270 };

using AugmentPolicy = std::vector<Transform>;

// Comma-separated subset of hflip,vflip,rot90,rot180,rot270; "none" or "" is empty.
AugmentPolicy parse_policy(std::string_view text);
std::string format_policy(const AugmentPolicy& policy);

Image apply_transform(const Image& image, Transform t);
Sample apply_transform(const Sample& sample, Transform t);

// Picks uniformly among identity and the policy's transforms and applies it
// to image and mask alike. Quarter turns need square images.
Sample augment(const Sample& sample, const AugmentPolicy& policy, Rng& rng);

}  // namespace lesion
