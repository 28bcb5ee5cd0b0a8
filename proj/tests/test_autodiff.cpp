#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "lisnow/nn.hpp"
#include "lisnow/optim.hpp"
#include "lisnow/rng.hpp"
#include "lisnow/tensor.hpp"

using namespace lisnow;
using T = Tensor<double>;

namespace {

struct LeafSpec {
  std::vector<int> shape;
  std::vector<double> values;
};

using Builder = std::function<T(std::vector<T>&)>;

// Central finite differences (step 1e-5) against the tape's gradients.
// Builders must be deterministic across calls (fixed rng seeds inside).
void gradcheck(const Builder& build, std::vector<LeafSpec> specs, double tol = 1e-4,
               double step = 1e-5) {
  auto make_leaves = [&](const std::vector<LeafSpec>& s) {
    std::vector<T> leaves;
    for (const auto& spec : s) leaves.push_back(T::from(spec.shape, spec.values, true));
    return leaves;
  };
  auto leaves = make_leaves(specs);
  auto out = build(leaves);
  REQUIRE(out.numel() == 1);
  out.backward();

  for (std::size_t li = 0; li < specs.size(); ++li) {
    const auto analytic = leaves[li].grad();
    for (std::size_t i = 0; i < specs[li].values.size(); ++i) {
      auto plus = specs, minus = specs;
      plus[li].values[i] += step;
      minus[li].values[i] -= step;
      auto lp = make_leaves(plus);
      auto lm = make_leaves(minus);
      const double fd = (build(lp).item() - build(lm).item()) / (2 * step);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(fd), 1.0});
      INFO("leaf " << li << " element " << i << " analytic " << a << " fd " << fd);
      CHECK(std::abs(a - fd) / denom <= tol);
    }
  }
}

std::vector<double> random_values(std::size_t n, RngState& rng, double lo = -1.0,
                                  double hi = 1.0, double min_abs = 0.0) {
  std::vector<double> v(n);
  for (auto& x : v) {
    do {
      x = rng.uniform(lo, hi);
    } while (std::abs(x) < min_abs);
  }
  return v;
}

}  // namespace

TEST_CASE("conv2d_circular: 1x1 scaling kernel and 3x3 identity kernel") {
  RngState rng(1);
  auto x = T::from({1, 1, 3, 4}, random_values(12, rng));
  auto k1 = T::from({1, 1, 1, 1}, {2.0});
  auto b0 = T::from({1}, {0.0});
  auto y = ops::conv2d_circular(x, k1, b0);
  for (std::size_t i = 0; i < x.numel(); ++i)
    CHECK(y.values()[i] == Catch::Approx(2.0 * x.values()[i]));

  std::vector<double> ident(9, 0.0);
  ident[4] = 1.0;
  auto k3 = T::from({1, 1, 3, 3}, ident);
  y = ops::conv2d_circular(x, k3, b0);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.values()[i] == Catch::Approx(x.values()[i]));
}

TEST_CASE("conv2d_circular wraps horizontally") {
  auto x = T::from({1, 1, 3, 3}, {1, 2, 3, 1, 2, 3, 1, 2, 3});
  auto k = T::from({1, 1, 1, 3}, {0, 0, 1});  // reads the right neighbor
  auto b = T::from({1}, {0.0});
  auto y = ops::conv2d_circular(x, k, b);
  const std::vector<double> expect = {2, 3, 1, 2, 3, 1, 2, 3, 1};
  for (std::size_t i = 0; i < 9; ++i) CHECK(y.values()[i] == Catch::Approx(expect[i]));
}

TEST_CASE("conv2d_circular replicates rows vertically") {
  auto x = T::from({1, 1, 3, 2}, {1, 1, 5, 5, 9, 9});
  auto k = T::from({1, 1, 3, 1}, {1, 0, 0});  // reads the row above
  auto b = T::from({1}, {0.0});
  auto y = ops::conv2d_circular(x, k, b);
  // top row clamps to itself
  CHECK(y.values()[0] == Catch::Approx(1.0));
  CHECK(y.values()[2] == Catch::Approx(1.0));
  CHECK(y.values()[4] == Catch::Approx(5.0));
}

TEST_CASE("conv2d_circular passes finite-difference gradient checks") {
  RngState rng(2);
  const int n = 2, ci = 2, co = 3, h = 4, w = 6;
  LeafSpec xs{{n, ci, h, w}, random_values(size_t(n) * ci * h * w, rng)};
  LeafSpec ks{{co, ci, 3, 3}, random_values(size_t(co) * ci * 9, rng)};
  LeafSpec bs{{co}, random_values(co, rng)};
  // l1 with values pushed away from zero keeps the loss locally smooth
  Builder build = [](std::vector<T>& leaves) {
    auto y = ops::conv2d_circular(leaves[0], leaves[1], leaves[2]);
    // add a constant offset so |y| stays away from the L1 kink
    auto offset = T::from(y.shape(), std::vector<double>(y.numel(), 3.0));
    return ops::l1_sum(ops::add(y, offset));
  };
  gradcheck(build, {xs, ks, bs});
}

TEST_CASE("conv2d_circular is equivariant to circular column shifts") {
  RngState rng(3);
  const int w = 8;
  auto vals = random_values(size_t(2) * 5 * w, rng);
  auto k = T::from({2, 2, 3, 3}, random_values(36, rng));
  auto b = T::from({2}, random_values(2, rng));
  auto x = T::from({1, 2, 5, w}, vals);
  const int s = 3;
  std::vector<double> shifted(vals.size());
  for (int ch = 0; ch < 2; ++ch)
    for (int y = 0; y < 5; ++y)
      for (int xx = 0; xx < w; ++xx)
        shifted[(size_t(ch) * 5 + y) * w + (xx + s) % w] = vals[(size_t(ch) * 5 + y) * w + xx];
  auto xs = T::from({1, 2, 5, w}, shifted);
  auto y0 = ops::conv2d_circular(x, k, b);
  auto y1 = ops::conv2d_circular(xs, k, b);
  for (int ch = 0; ch < 2; ++ch)
    for (int y = 0; y < 5; ++y)
      for (int xx = 0; xx < w; ++xx)
        CHECK(y1.values()[(size_t(ch) * 5 + y) * w + (xx + s) % w] ==
              y0.values()[(size_t(ch) * 5 + y) * w + xx]);
}

TEST_CASE("relu forward and gradient") {
  auto x = T::from({1, 1, 1, 3}, {-1, 0, 2}, true);
  auto y = ops::relu(x);
  CHECK(y.values() == std::vector<double>{0, 0, 2});
  auto s = ops::l1_sum(y);
  s.backward();
  CHECK(x.grad() == std::vector<double>{0, 0, 1});

  RngState rng(4);
  LeafSpec xs{{1, 2, 2, 4}, random_values(16, rng, -1, 1, 0.05)};
  gradcheck([](std::vector<T>& l) { return ops::l1_sum(ops::relu(l[0])); }, {xs});
}

TEST_CASE("dropout: identity cases and Monte-Carlo expectation") {
  RngState rng(5);
  auto x = T::from({1, 1, 1, 4}, {1, 2, 3, 4});
  auto y = ops::dropout(x, 0.0, rng, true);
  CHECK(y.values() == x.values());
  y = ops::dropout(x, 0.5, rng, false);
  CHECK(y.values() == x.values());
  CHECK_THROWS_AS(ops::dropout(x, 1.0, rng, true), std::invalid_argument);

  const std::size_t n = 100000;
  auto big = T::from({1, 1, 1, static_cast<int>(n)}, std::vector<double>(n, 1.0));
  RngState drop_rng(123);
  auto out = ops::dropout(big, 0.5, drop_rng, true);
  double mean = 0.0;
  for (double v : out.values()) mean += v;
  mean /= double(n);
  CHECK(std::abs(mean - 1.0) < 0.02);

  // same seed, same mask
  RngState r1(9), r2(9);
  auto a = ops::dropout(big, 0.3, r1, true);
  auto b = ops::dropout(big, 0.3, r2, true);
  CHECK(a.values() == b.values());
}

TEST_CASE("dropout gradient matches finite differences with a frozen mask") {
  RngState rng(6);
  LeafSpec xs{{1, 1, 2, 4}, random_values(8, rng, -1, 1, 0.05)};
  Builder build = [](std::vector<T>& l) {
    RngState mask_rng(321);  // fixed: every evaluation sees the same mask
    return ops::l1_sum(ops::dropout(l[0], 0.4, mask_rng, true));
  };
  gradcheck(build, {xs});
}

TEST_CASE("dwt_layer shape contract and orthonormal round trip") {
  RngState rng(7);
  auto x = T::from({2, 2, 4, 4}, random_values(64, rng));
  auto sb = ops::dwt_layer(x);
  CHECK(sb.shape() == std::vector<int>{2, 8, 2, 2});
  auto back = ops::idwt_layer(sb);
  REQUIRE(back.shape() == x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i)
    CHECK(back.values()[i] == Catch::Approx(x.values()[i]).margin(1e-6));
  CHECK_THROWS_AS(ops::dwt_layer(T::zeros({1, 1, 3, 4})), std::invalid_argument);
  CHECK_THROWS_AS(ops::idwt_layer(T::zeros({1, 3, 2, 2})), std::invalid_argument);
}

TEST_CASE("dwt_layer and idwt_layer pass gradient checks") {
  RngState rng(8);
  LeafSpec xs{{1, 2, 4, 6}, random_values(48, rng, -1, 1, 0.05)};
  gradcheck([](std::vector<T>& l) { return ops::l1_sum(ops::dwt_layer(l[0])); }, {xs});
  LeafSpec ys{{1, 4, 3, 2}, random_values(24, rng, -1, 1, 0.05)};
  gradcheck([](std::vector<T>& l) { return ops::l1_sum(ops::idwt_layer(l[0])); }, {ys});
}

TEST_CASE("l1_sum value and sign gradient") {
  auto x = T::from({1, 1, 1, 3}, {1, -2, 0}, true);
  auto s = ops::l1_sum(x);
  CHECK(s.item() == Catch::Approx(3.0));

  auto x2 = T::from({1, 1, 1, 3}, {1, -2, 3}, true);
  auto s2 = ops::l1_sum(x2);
  s2.backward();
  CHECK(x2.grad() == std::vector<double>{1, -1, 1});

  RngState rng(9);
  LeafSpec xs{{1, 1, 2, 4}, random_values(8, rng, -2, 2, 0.1)};
  gradcheck([](std::vector<T>& l) { return ops::l1_sum(l[0]); }, {xs});
}

TEST_CASE("l1_sum_channels covers only the selected bands") {
  auto x = T::from({1, 4, 1, 2}, {1, 1, 2, 2, 4, 4, 8, 8}, true);
  auto s = ops::l1_sum_channels(x, 1, 3);
  CHECK(s.item() == Catch::Approx(12.0));
  s.backward();
  CHECK(x.grad() == std::vector<double>{0, 0, 1, 1, 1, 1, 0, 0});
}

TEST_CASE("fft2_logmag op matches finite differences") {
  RngState rng(10);
  LeafSpec xs{{1, 1, 4, 4}, random_values(16, rng, -1, 1, 0.05)};
  gradcheck([](std::vector<T>& l) { return ops::l1_sum(ops::fft2_logmag(l[0])); }, {xs}, 1e-4);
  LeafSpec twoch{{1, 2, 4, 8}, random_values(64, rng, -1, 1, 0.05)};
  gradcheck([](std::vector<T>& l) { return ops::l1_sum(ops::fft2_logmag(l[0])); }, {twoch}, 1e-4);
}

TEST_CASE("graph handles shared subexpressions") {
  auto x = T::from({1, 1, 1, 2}, {0.5, -0.75}, true);
  auto y = ops::add(x, x);
  auto s = ops::l1_sum(y);
  s.backward();
  CHECK(x.grad() == std::vector<double>{2, -2});
}

TEST_CASE("weighted_sum combines scalars with coefficients") {
  auto a = T::from({1}, {2.0}, true);
  auto b = T::from({1}, {3.0}, true);
  auto s = ops::weighted_sum<double>({a, b}, {0.25, 0.5});
  CHECK(s.item() == Catch::Approx(2.0));
  s.backward();
  CHECK(a.grad()[0] == Catch::Approx(0.25));
  CHECK(b.grad()[0] == Catch::Approx(0.5));
}

TEST_CASE("adam: bias-corrected first step has magnitude close to lr") {
  ParamStore<double> store;
  auto& p = store.add("w", {2});
  p.values() = {1.0, -2.0};
  p.grad() = {0.5, -0.01};
  adam_step(store, 0.001);
  CHECK(std::abs(1.0 - p.values()[0]) >= 0.99 * 0.001);
  CHECK(std::abs(1.0 - p.values()[0]) <= 0.001);
  CHECK(p.values()[1] > -2.0 + 0.0009);  // moved up against the negative gradient
  // gradients cleared
  CHECK(p.grad() == std::vector<double>{0, 0});
}

TEST_CASE("adam: zero gradient leaves the parameter unchanged") {
  ParamStore<double> store;
  auto& p = store.add("w", {1});
  p.values() = {3.5};
  p.grad() = {0.0};
  adam_step(store, 0.01);
  CHECK(p.values()[0] == 3.5);
}

TEST_CASE("adam: two steps with constant gradient match a scalar reference") {
  const double g = 0.37, lr = 0.002, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ParamStore<double> store;
  auto& p = store.add("w", {1});
  p.values() = {1.0};
  double ref = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    p.grad()[0] = g;
    adam_step(store, lr);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    ref -= lr * mhat / (std::sqrt(vhat) + eps);
    CHECK(p.values()[0] == Catch::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("adam: missing gradient names the parameter") {
  ParamStore<double> store;
  store.add("conv.w", {4});
  try {
    adam_step(store, 0.001);
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("conv.w") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip preserves names, shapes and float32 values") {
  ParamStore<double> store;
  RngState rng(11);
  auto& a = store.add("alpha", {2, 3});
  auto& b = store.add("beta.w", {4});
  for (auto& v : a.values()) v = rng.uniform(-1, 1);
  for (auto& v : b.values()) v = rng.uniform(-1, 1);
  const auto path = std::string("/tmp/lisnow_ckpt_test.bin");
  save_checkpoint(store, path);
  auto loaded = load_checkpoint<double>(path);
  REQUIRE(loaded.order == store.order);
  REQUIRE(loaded.get("alpha").shape() == std::vector<int>{2, 3});
  for (std::size_t i = 0; i < a.numel(); ++i)
    CHECK(loaded.get("alpha").values()[i] == double(float(a.values()[i])));
}
