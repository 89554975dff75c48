#include "ctseq/phantoms.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ctseq/rng.hpp"

namespace ctseq {

namespace {

// All generators work in continuous coordinates x, y in [-0.5, 0.5] with y up.

struct Ellipse {
  double cx, cy, a, b, phi, value;

  bool contains(double x, double y) const {
    const double dx = x - cx;
    const double dy = y - cy;
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    const double u = (dx * c + dy * s) / a;
    const double v = (-dx * s + dy * c) / b;
    return u * u + v * v <= 1.0;
  }
};

Image rasterize_additive(int side, double background,
                         const std::vector<Ellipse>& ellipses) {
  Image img(side);
  for (int i = 0; i < side; ++i) {
    const double y = 0.5 - (i + 0.5) / side;
    for (int j = 0; j < side; ++j) {
      const double x = (j + 0.5) / side - 0.5;
      double v = background;
      for (const Ellipse& e : ellipses)
        if (e.contains(x, y)) v += e.value;
      img(i, j) = clamp01(v);
    }
  }
  return img;
}

Image ellipses_phantom(int side, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x656c6cULL));
  const double background = rng.uniform(0.02, 0.08);
  const int n = static_cast<int>(rng.uniform_int(5, 12));
  std::vector<Ellipse> es;
  es.reserve(n);
  for (int k = 0; k < n; ++k) {
    Ellipse e;
    const double rad = 0.32 * std::sqrt(rng.u01());
    const double ang = rng.uniform(0.0, 2.0 * kPi);
    e.cx = rad * std::cos(ang);
    e.cy = rad * std::sin(ang);
    // the first ellipse is large and bright so every phantom has structure
    // well above mid-range
    if (k == 0) {
      e.a = rng.uniform(0.12, 0.22);
      e.b = rng.uniform(0.12, 0.22);
      e.value = rng.uniform(0.55, 0.85);
    } else {
      e.a = rng.uniform(0.04, 0.16);
      e.b = rng.uniform(0.04, 0.16);
      e.value = rng.uniform(0.15, 0.6);
    }
    e.phi = rng.uniform(0.0, kPi);
    es.push_back(e);
  }
  return rasterize_additive(side, background, es);
}

Image manhattan_phantom(int side, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x6d616e68ULL));
  struct Rect {
    double x0, y0, x1, y1, value;
  };
  const double bg_low = rng.uniform(0.03, 0.08);
  const double bg_high = rng.uniform(0.15, 0.3);
  // substrate: a large centered block on the low background
  const double sub = rng.uniform(0.3, 0.42);
  std::vector<Rect> rects;
  const int n = static_cast<int>(rng.uniform_int(10, 30));
  for (int k = 0; k < n; ++k) {
    Rect r;
    const double w = rng.uniform(0.02, 0.18);
    const double h = rng.uniform(0.02, 0.18);
    r.x0 = rng.uniform(-0.45, 0.45 - w);
    r.y0 = rng.uniform(-0.45, 0.45 - h);
    r.x1 = r.x0 + w;
    r.y1 = r.y0 + h;
    r.value = rng.uniform(0.2, 0.9);
    rects.push_back(r);
  }
  Image img(side);
  for (int i = 0; i < side; ++i) {
    const double y = 0.5 - (i + 0.5) / side;
    for (int j = 0; j < side; ++j) {
      const double x = (j + 0.5) / side - 0.5;
      double v = (std::fabs(x) <= sub && std::fabs(y) <= sub) ? bg_high
                                                              : bg_low;
      for (const Rect& r : rects)
        if (x >= r.x0 && x <= r.x1 && y >= r.y0 && y <= r.y1) v = r.value;
      img(i, j) = clamp01(v);
    }
  }
  return img;
}

Image fibers_phantom(int side, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x666962ULL));
  const double theta = rng.uniform(0.0, kPi);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double background = rng.uniform(0.05, 0.12);
  // stripe boundaries across [-0.8, 0.8] with jittered widths
  std::vector<double> edges;
  std::vector<double> values;
  double u = -0.8;
  while (u < 0.8) {
    const double fiber = rng.uniform(0.015, 0.05);
    const double gap = rng.uniform(0.01, 0.05);
    edges.push_back(u);
    values.push_back(rng.uniform(0.35, 0.75));
    edges.push_back(u + fiber);
    values.push_back(-1.0);  // matrix gap marker
    u += fiber + gap;
  }
  Image img(side);
  for (int i = 0; i < side; ++i) {
    const double y = 0.5 - (i + 0.5) / side;
    for (int j = 0; j < side; ++j) {
      const double x = (j + 0.5) / side - 0.5;
      const double t = x * c + y * s;
      double v = background;
      // find the stripe containing t
      for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
        if (t >= edges[k] && t < edges[k + 1]) {
          if (values[k] > 0.0) v = values[k];
          break;
        }
      }
      img(i, j) = clamp01(v);
    }
  }
  return img;
}

// Standard head phantom ellipse table (centres/axes in unit-disc
// coordinates, angles in degrees, additive contrasts).
Image shepp_logan_phantom(int side) {
  static const struct {
    double v, a, b, cx, cy, phi;
  } table[] = {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
      {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
      {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},
      {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
      {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},
      {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
      {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},
      {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
      {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},
      {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
  };
  std::vector<Ellipse> es;
  for (const auto& row : table) {
    Ellipse e;
    // table coordinates span [-1, 1]; halve to fit the unit square
    e.cx = 0.5 * row.cx;
    e.cy = 0.5 * row.cy;
    e.a = 0.5 * row.a;
    e.b = 0.5 * row.b;
    e.phi = row.phi * kPi / 180.0;
    e.value = row.v;
    es.push_back(e);
  }
  return rasterize_additive(side, 0.0, es);
}

}  // namespace

PhantomFamily phantom_family_from_name(const std::string& name) {
  if (name == "ellipses") return PhantomFamily::kEllipses;
  if (name == "manhattan") return PhantomFamily::kManhattan;
  if (name == "fibers") return PhantomFamily::kFibers;
  if (name == "shepp_logan") return PhantomFamily::kSheppLogan;
  throw std::invalid_argument("unknown phantom family: " + name);
}

std::string phantom_family_name(PhantomFamily family) {
  switch (family) {
    case PhantomFamily::kEllipses: return "ellipses";
    case PhantomFamily::kManhattan: return "manhattan";
    case PhantomFamily::kFibers: return "fibers";
    case PhantomFamily::kSheppLogan: return "shepp_logan";
  }
  throw std::invalid_argument("unknown phantom family");
}

Image make_phantom(PhantomFamily family, int side, std::uint64_t seed) {
  if (side < 16)
    throw std::invalid_argument("make_phantom: side must be >= 16");
  switch (family) {
    case PhantomFamily::kEllipses: return ellipses_phantom(side, seed);
    case PhantomFamily::kManhattan: return manhattan_phantom(side, seed);
    case PhantomFamily::kFibers: return fibers_phantom(side, seed);
    case PhantomFamily::kSheppLogan: return shepp_logan_phantom(side);
  }
  throw std::invalid_argument("make_phantom: unknown family");
}

Image rotate_image(const Image& image, double angle_deg) {
  if (std::fabs(angle_deg) > 45.0)
    throw std::invalid_argument("rotate_image: |angle| must be <= 45");
  if (angle_deg == 0.0) return image;

  const int side = image.side();
  const double a = angle_deg * kPi / 180.0;
  const double c = std::cos(a);
  const double s = std::sin(a);
  const double centre = 0.5 * (side - 1);

  Image out(side);
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      // inverse map: rotate the output pixel back by -angle (y up)
      const double x = j - centre;
      const double y = centre - i;
      const double sx = x * c + y * s;
      const double sy = -x * s + y * c;
      const double col = sx + centre;
      const double row = centre - sy;
      const int r0 = static_cast<int>(std::floor(row));
      const int c0 = static_cast<int>(std::floor(col));
      const double fr = row - r0;
      const double fc = col - c0;
      double v = 0.0;
      for (int di = 0; di <= 1; ++di) {
        for (int dj = 0; dj <= 1; ++dj) {
          const int ri = r0 + di;
          const int cj = c0 + dj;
          if (ri < 0 || ri >= side || cj < 0 || cj >= side) continue;
          const double w = (di == 0 ? 1.0 - fr : fr) * (dj == 0 ? 1.0 - fc : fc);
          v += w * image(ri, cj);
        }
      }
      out(i, j) = clamp01(v);
    }
  }
  return out;
}

}  // namespace ctseq
