#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ctseq/metrics.hpp"
#include "ctseq/rng.hpp"

using namespace ctseq;

namespace {

Image random_image(int side, std::uint64_t seed, double lo = 0.0,
                   double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(side) * side);
  for (double& x : v) x = rng.uniform(lo, hi);
  return Image::from_values(side, std::move(v));
}

}  // namespace

TEST_CASE("psnr sentinel and closed form") {
  const Image a = random_image(8, 1);
  CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());

  // constant offset 0.1: MSE = 0.01, PSNR = 20 dB
  const Image t(8, 0.3);
  const Image r(8, 0.4);
  CHECK(psnr(r, t) == doctest::Approx(20.0).epsilon(1e-9));
  CHECK_THROWS_AS(psnr(Image(4), Image(8)), std::invalid_argument);
}

TEST_CASE("psnr matches an independent recomputation") {
  const Image a = random_image(16, 2);
  const Image b = random_image(16, 3);
  double mse = 0.0;
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    const double d = a.values()[p] - b.values()[p];
    mse += d * d;
  }
  mse /= static_cast<double>(a.pixel_count());
  CHECK(psnr(a, b) ==
        doctest::Approx(10.0 * std::log10(1.0 / mse)).epsilon(1e-10));
}

TEST_CASE("binomial rates") {
  CHECK(binomial_rate(std::vector<bool>(50, false)).rate == 0.0);
  std::vector<bool> flags(100, false);
  flags[3] = flags[30] = flags[77] = true;
  const auto r = crossover_rate(flags);
  CHECK(r.rate == doctest::Approx(0.03));
  CHECK(r.sem == doctest::Approx(0.0170587).epsilon(1e-4));
  CHECK_THROWS_AS(binomial_rate({}), std::invalid_argument);
}

TEST_CASE("coverage_and_width exact cases") {
  const Image truth = random_image(8, 4, 0.2, 0.8);
  const PixelIntervals full{Image(8, 0.0), Image(8, 1.0)};
  auto [c1, w1] = coverage_and_width(full, truth);
  CHECK(c1 == 1.0);
  CHECK(w1 == 1.0);

  const PixelIntervals point{truth, truth};
  auto [c2, w2] = coverage_and_width(point, truth);
  CHECK(c2 == 1.0);
  CHECK(w2 == 0.0);

  Image shifted = truth;
  for (double& v : shifted.mutable_values()) v = clamp01(v + 0.01);
  const PixelIntervals miss{shifted, shifted};
  auto [c3, w3] = coverage_and_width(miss, truth);
  CHECK(c3 == 0.0);
  CHECK(w3 == 0.0);
}

TEST_CASE("ause vanishes for perfectly ranked uncertainty") {
  const Image err = random_image(10, 5, 0.0, 0.3);
  CHECK(ause(err, err) == 0.0);
  // any proportional map gives the same ordering
  Image half = err;
  for (double& v : half.mutable_values()) v *= 0.5;
  CHECK(ause(half, err) == 0.0);
  // zero error map is defined as zero
  CHECK(ause(err, Image(10, 0.0)) == 0.0);
}

TEST_CASE("ause of anti-ordered uncertainty matches the reversal oracle") {
  const Image err = random_image(10, 6, 0.0, 0.5);
  Image anti(10);
  double max_err = 0.0;
  for (double v : err.values()) max_err = std::max(max_err, v);
  for (std::size_t p = 0; p < err.pixel_count(); ++p)
    anti.mutable_values()[p] = max_err - err.values()[p];

  // oracle: recompute both sparsification curves explicitly
  const auto curve_for = [&](bool ascending) {
    const std::size_t n = err.pixel_count();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
      return ascending ? err.values()[a] < err.values()[b]
                       : err.values()[a] > err.values()[b];
    });
    std::vector<double> curve(100);
    for (int s = 0; s < 100; ++s) {
      const std::size_t removed = std::min(n - 1, n * s / 100);
      double sum = 0.0;
      for (std::size_t i = removed; i < n; ++i) sum += err.values()[order[i]];
      curve[s] = sum / static_cast<double>(n - removed);
    }
    return curve;
  };
  const auto asc = curve_for(true);    // uncertainty anti-ordered to error
  const auto desc = curve_for(false);  // oracle ordering
  double full_mae = 0.0;
  for (double v : err.values()) full_mae += v;
  full_mae /= static_cast<double>(err.pixel_count());
  double expected = 0.0;
  for (int s = 0; s < 100; ++s) expected += (asc[s] - desc[s]) / full_mae;
  expected /= 100.0;

  CHECK(ause(anti, err) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(ause(anti, err) > 0.0);
}

TEST_CASE("ause is positive for uninformative uncertainty") {
  const Image err = random_image(10, 7, 0.0, 0.4);
  const Image constant(10, 0.5);
  CHECK(ause(constant, err) > 0.0);
}

TEST_CASE("calibration curve is monotone and handles the delta limits") {
  // trajectories where the truth NLL sometimes exceeds beta
  std::vector<StoredTrajectory> runs;
  Rng rng(8);
  for (int r = 0; r < 200; ++r) {
    StoredTrajectory t;
    for (int s = 0; s < 20; ++s) {
      t.beta.push_back(100.0 + s);
      t.truth_nll.push_back(100.0 + s + rng.uniform(-3.0, 1.0));
    }
    runs.push_back(std::move(t));
  }
  std::vector<double> deltas;
  for (double d = 0.05; d <= 0.95; d += 0.05) deltas.push_back(d);
  const auto curve = calibration_curve(runs, deltas);
  for (std::size_t i = 1; i < curve.size(); ++i)
    CHECK(curve[i].rate >= curve[i - 1].rate);
  // delta -> 1 collapses the threshold to beta itself
  const auto at_one = calibration_curve(runs, std::vector<double>{1.0});
  std::vector<bool> direct;
  for (const auto& t : runs) {
    bool any = false;
    for (int s = 0; s < 20; ++s) any = any || t.truth_nll[s] > t.beta[s];
    direct.push_back(any);
  }
  CHECK(at_one[0].rate == binomial_rate(direct).rate);
}

TEST_CASE("exclusion_rate aggregates per angle") {
  std::vector<std::vector<bool>> excluded{{true, true, false, true},
                                          {false, false, false, false}};
  const auto rates = exclusion_rate(excluded);
  REQUIRE(rates.size() == 2);
  CHECK(rates[0].rate == doctest::Approx(0.75));
  CHECK(rates[1].rate == 0.0);
}

TEST_CASE("hallucination report splits PSNR by membership") {
  const std::vector<bool> out{false, false, true, true};
  const std::vector<double> psnrs{30.0, 34.0, 9.0, 11.0};
  const auto rep = hallucination_report(out, psnrs);
  CHECK(rep.flag_rate == doctest::Approx(0.5));
  REQUIRE(rep.psnr_in_set.has_value());
  REQUIRE(rep.psnr_out_of_set.has_value());
  CHECK(*rep.psnr_in_set == doctest::Approx(32.0));
  CHECK(*rep.psnr_out_of_set == doctest::Approx(10.0));

  const auto all_in =
      hallucination_report(std::vector<bool>(3, false),
                           std::vector<double>{1.0, 2.0, 3.0});
  CHECK(all_in.flag_rate == 0.0);
  CHECK(all_in.psnr_in_set.has_value());
  CHECK_FALSE(all_in.psnr_out_of_set.has_value());
}
