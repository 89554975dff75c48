#pragma once

#include <cstdint>
#include <string>

#include "ctseq/image.hpp"

namespace ctseq {

enum class PhantomFamily { kEllipses, kManhattan, kFibers, kSheppLogan };

PhantomFamily phantom_family_from_name(const std::string& name);
std::string phantom_family_name(PhantomFamily family);

/// Deterministic synthetic phantom. Parameters are drawn in continuous
/// coordinates before rasterization, so the same seed yields consistent
/// discretizations of one object at every side (the high-resolution twin used
/// for simulation is make_phantom(family, 2r, seed)). shepp_logan ignores the
/// seed.
Image make_phantom(PhantomFamily family, int side, std::uint64_t seed);

/// Bilinear rotation about the image centre (CCW degrees, |angle| <= 45);
/// out-of-bounds samples read 0, output clamped to [0,1]. Angle 0 is the
/// identity.
Image rotate_image(const Image& image, double angle_deg);

}  // namespace ctseq
