#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ctseq/forward.hpp"
#include "ctseq/likelihood.hpp"
#include "ctseq/rng.hpp"

using namespace ctseq;

namespace {

Image random_image(int side, std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  std::vector<double> values(static_cast<std::size_t>(side) * side);
  for (double& v : values) v = rng.uniform(lo, hi);
  return Image::from_values(side, std::move(values));
}

Measurement random_measurement(int side, std::uint64_t seed, double intensity) {
  Rng rng(seed);
  Measurement m;
  m.angle = rng.uniform(0.0, 179.999);
  m.intensity = intensity;
  m.counts.resize(side);
  for (auto& c : m.counts) c = rng.uniform_int(0, 40);
  return m;
}

// direct per-bin oracle, independent of the shared projection path
double nll_direct(const Image& img, const Measurement& m,
                  const Geometry& geom) {
  const double a = m.angle * kPi / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  const double half = 0.5 * (geom.side - 1);
  std::vector<double> integral(geom.side, 0.0);
  for (int i = 0; i < geom.side; ++i)
    for (int j = 0; j < geom.side; ++j) {
      const double d = (j - half) * ca + (half - i) * sa + 0.5 * geom.side;
      if (d >= 0.0 && d < geom.side)
        integral[static_cast<int>(d)] += img(i, j);
    }
  double total = 0.0;
  for (int i = 0; i < geom.side; ++i) {
    const double lambda =
        m.intensity * std::exp(-geom.pixel_length() * integral[i]);
    const double y = static_cast<double>(m.counts[i]);
    total += lambda - y * std::log(lambda) + std::lgamma(y + 1.0);
  }
  return total;
}

}  // namespace

TEST_CASE("nll_increment closed forms") {
  // lambda = 1 (I0 = e, pixel 1, l = 1), y = 0  ->  1 - 0 + 0 = 1
  Geometry g1{1, 1.0};
  Measurement m;
  m.angle = 0.0;
  m.intensity = std::exp(1.0);
  m.counts = {0};
  CHECK(nll_increment(Image(1, 1.0), m, g1) ==
        doctest::Approx(1.0).epsilon(1e-12));

  // lambda = 2, y = 2  ->  2 - 2 log 2 + log 2 = 2 - log 2
  m.intensity = 2.0;
  m.counts = {2};
  CHECK(nll_increment(Image(1, 0.0), m, g1) ==
        doctest::Approx(2.0 - std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("nll_increment matches the per-bin oracle") {
  Geometry geom{8, 4.0};
  for (int trial = 0; trial < 10; ++trial) {
    const Image img = random_image(8, 50 + trial, 0.0, 1.0);
    const Measurement m = random_measurement(8, 150 + trial, 30.0);
    CHECK(nll_increment(img, m, geom) ==
          doctest::Approx(nll_direct(img, m, geom)).epsilon(1e-10));
  }
}

TEST_CASE("nll_gradient vanishes when counts equal the means") {
  // zero image with integer intensity: lambda = I0 exactly, set y = I0
  Geometry geom{8, 4.0};
  Measurement m;
  m.angle = 70.0;
  m.intensity = 50.0;
  m.counts.assign(8, 50);
  const auto grad = nll_gradient(Image(8), m, geom);
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("nll_gradient scalar closed form") {
  // pixel 0.5, l = 1, I0 = 10, y = 3: gradient = y - lambda = 3 - 10 e^{-0.5}
  Geometry g1{1, 1.0};
  Measurement m;
  m.angle = 0.0;
  m.intensity = 10.0;
  m.counts = {3};
  const auto grad = nll_gradient(Image(1, 0.5), m, g1);
  CHECK(grad[0] == doctest::Approx(-3.0653066).epsilon(1e-7));
}

TEST_CASE("nll_gradient agrees with central finite differences") {
  Geometry geom{8, 4.0};
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    Image img = random_image(8, 300 + trial, 0.05, 0.95);
    const Measurement m = random_measurement(8, 400 + trial, 100.0);
    const auto grad = nll_gradient(img, m, geom);
    Rng pick(500 + trial);
    for (int probe = 0; probe < 6; ++probe) {
      const int i = static_cast<int>(pick.uniform_int(0, 7));
      const int j = static_cast<int>(pick.uniform_int(0, 7));
      const double saved = img(i, j);
      img(i, j) = saved + h;
      const double up = nll_increment(img, m, geom);
      img(i, j) = saved - h;
      const double down = nll_increment(img, m, geom);
      img(i, j) = saved;
      const double fd = (up - down) / (2.0 * h);
      const double analytic = grad[static_cast<std::size_t>(i) * 8 + j];
      if (std::fabs(fd) > 1e-8) {
        CHECK(std::fabs(analytic - fd) / std::fabs(fd) < 1e-4);
      } else {
        CHECK(std::fabs(analytic - fd) < 1e-6);
      }
    }
  }
}

TEST_CASE("scalar NLL is minimized where lambda equals the count") {
  // scan pixel values; the minimizing lambda must bracket y
  Geometry g1{1, 1.0};
  Measurement m;
  m.angle = 0.0;
  m.intensity = 100.0;
  m.counts = {37};
  double best_x = 0.0, best = 1e300;
  for (int k = 0; k <= 10000; ++k) {
    const double x = k / 10000.0;
    const double v = nll_increment(Image(1, x), m, g1);
    if (v < best) {
      best = v;
      best_x = x;
    }
  }
  const double lambda_at_best = 100.0 * std::exp(-best_x);
  CHECK(lambda_at_best == doctest::Approx(37.0).epsilon(1e-3));
}

TEST_CASE("cumulative_nll additivity and incremental consistency") {
  Geometry geom{8, 4.0};
  const Image img = random_image(8, 9, 0.0, 1.0);
  std::vector<Measurement> ms;
  for (int t = 0; t < 10; ++t)
    ms.push_back(random_measurement(8, 900 + t, 60.0));

  CHECK(cumulative_nll(img, std::span(ms).first(1), geom) ==
        doctest::Approx(nll_increment(img, ms[0], geom)).epsilon(1e-15));

  const std::vector<Measurement> twice{ms[0], ms[0]};
  CHECK(cumulative_nll(img, twice, geom) ==
        doctest::Approx(2.0 * nll_increment(img, ms[0], geom)).epsilon(1e-15));

  double incremental = 0.0;
  for (const auto& m : ms) incremental += nll_increment(img, m, geom);
  CHECK(incremental ==
        doctest::Approx(cumulative_nll(img, ms, geom)).epsilon(1e-9));

  CHECK_THROWS_AS(cumulative_nll(img, std::span<const Measurement>{}, geom),
                  std::invalid_argument);
}
