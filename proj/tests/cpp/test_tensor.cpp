#include "favc/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "favc/common.hpp"
#include "favc/rng.hpp"
#include "testutil.hpp"

using namespace favc;
using namespace favc::ad;
using favc::test::check_unary_op;
using favc::test::fd_partial;
using favc::test::randn;

TEST(Conv1d, IdentityKernel) {
  Tensor x = Tensor::from({1, 5}, {1, 2, 3, 4, 5});
  Tensor k = Tensor::from({1, 1, 1}, {1});
  Tensor y = conv1d(x, k, 1, 0);
  EXPECT_EQ(y.shape(), (std::vector<int>{1, 5}));
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(y.data()[i], x.data()[i]);
}

TEST(Conv1d, HandConvolution) {
  // hand-computed zero-padded correlation
  Tensor x = Tensor::from({1, 3}, {1, 2, 3});
  Tensor k = Tensor::from({1, 1, 3}, {1, 1, 1});
  Tensor y = conv1d(x, k, 1, 1);
  ASSERT_EQ(y.size(), 3);
  EXPECT_DOUBLE_EQ(y.data()[0], 3);
  EXPECT_DOUBLE_EQ(y.data()[1], 6);
  EXPECT_DOUBLE_EQ(y.data()[2], 5);
}

TEST(Conv1d, StrideTwoLengthArithmetic) {
  // L_out = floor((L-1)/2)+1 for stride 2, pad floor(K/2), any odd K
  for (int K : {3, 5, 9}) {
    for (int L = 1; L <= 64; ++L) {
      if (L + 2 * (K / 2) < K) continue;
      Tensor x = Tensor::from({1, L}, std::vector<double>(static_cast<size_t>(L), 1.0));
      Tensor kern({1, 1, K});
      Tensor y = conv1d(x, kern, 2, K / 2);
      EXPECT_EQ(y.dim(1), (L - 1) / 2 + 1) << "K=" << K << " L=" << L;
    }
  }
}

TEST(Conv1d, RejectsBadShapes) {
  Tensor x = Tensor::from({2, 8}, randn(16, 1));
  Tensor k = Tensor::from({4, 3, 3}, randn(36, 2));
  EXPECT_THROW(conv1d(x, k, 1, 1), Error);  // channel mismatch
  Tensor k_even = Tensor::from({1, 2, 4}, randn(8, 3));
  EXPECT_THROW(conv1d(x, k_even, 1, 1), Error);  // even kernel
}

TEST(ConvTranspose1d, HandExpansion) {
  Tensor x = Tensor::from({1, 2}, {1, 1});
  Tensor k = Tensor::from({1, 1, 2}, {1, 1});
  Tensor y = conv_transpose1d(x, k, 2, 0);
  ASSERT_EQ(y.dim(1), 4);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(y.data()[i], 1.0);
}

TEST(ConvTranspose1d, CropToNaturalIsIdentity) {
  Tensor x = Tensor::from({2, 5}, randn(10, 11));
  Tensor k = Tensor::from({2, 3, 4}, randn(24, 12));
  Tensor a = conv_transpose1d(x, k, 2, 1);
  Tensor b = conv_transpose1d(x, k, 2, 1, a.dim(1));
  ASSERT_EQ(a.shape(), b.shape());
  for (int64_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(a.data()[i], b.data()[i]);
  EXPECT_THROW(conv_transpose1d(x, k, 2, 1, a.dim(1) + 1), Error);
}

TEST(ConvTranspose1d, AdjointOfConv1d) {
  // <conv(x), y> == <x, conv_transpose(y)> with matched kernels
  Rng rng(77);
  int cin = 3, cout = 2, L = 17, K = 5, stride = 2, pad = 2;
  Tensor x = Tensor::from({cin, L}, randn(static_cast<size_t>(cin * L), 21));
  Tensor kc = Tensor::from({cout, cin, K}, randn(static_cast<size_t>(cout * cin * K), 22));
  Tensor cx = conv1d(x, kc, stride, pad);
  int lout = cx.dim(1);
  Tensor y = Tensor::from({cout, lout}, randn(static_cast<size_t>(cout * lout), 23));
  // The transpose path reuses the same kernel buffer: its leading axis is the
  // transpose's input channels (= conv output channels).
  Tensor ktr = Tensor::from({cout, cin, K}, kc.values());
  Tensor ty = conv_transpose1d(y, ktr, stride, pad, L);
  double lhs = dot(cx, y).value();
  double rhs = dot(x, ty).value();
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::fabs(lhs)));
  (void)rng;
}

TEST(Linear, HandArithmetic) {
  Tensor w = Tensor::from({1, 2}, {1, 2});
  Tensor b = Tensor::from({1}, {3});
  Tensor x = Tensor::from({2}, {4, 5});
  EXPECT_DOUBLE_EQ(linear(x, w, b).value(), 17.0);
}

TEST(Linear, IdentityWeight) {
  Tensor w = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor b({3});
  Tensor x = Tensor::from({3}, {7, -2, 0.5});
  Tensor y = linear(x, w, b);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(y.data()[i], x.data()[i]);
}

TEST(Linear, WeightGradientIsOuterProduct) {
  // d<w x + b, g>/dw == outer(g, x)
  std::vector<double> xv = {1.5, -2.0, 0.25};
  std::vector<double> gv = {2.0, -1.0};
  Tape tape;
  Tensor w = tape.watch(Tensor::from({2, 3}, randn(6, 5)));
  Tensor b = tape.watch(Tensor::from({2}, randn(2, 6)));
  Tensor x = Tensor::from({3}, xv);
  Tensor probe = Tensor::from({2}, gv);
  Tensor out = dot(linear(x, w, b), probe);
  tape.backward(out);
  const auto& gw = tape.grad(w);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      EXPECT_NEAR(gw[static_cast<size_t>(i * 3 + j)], gv[static_cast<size_t>(i)] * xv[static_cast<size_t>(j)], 1e-12);
}

TEST(Primitives, LayernormOfConstantVectorIsZero) {
  Tensor x = Tensor::from({4}, {3, 3, 3, 3});
  Tensor gamma = Tensor::from({4}, {1, 1, 1, 1});
  Tensor beta({4});
  Tensor y = layernorm(x, gamma, beta);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(y.data()[i], 0.0, 1e-12);
}

TEST(Primitives, SoftmaxSymmetry) {
  Tensor y = softmax(Tensor::from({2}, {0, 0}));
  EXPECT_DOUBLE_EQ(y.data()[0], 0.5);
  EXPECT_DOUBLE_EQ(y.data()[1], 0.5);
  EXPECT_THROW(softmax(Tensor::from({1, 0}, {})), Error);
}

TEST(Primitives, StdOfLengthOneAxisIsZero) {
  Tensor x = Tensor::from({2, 1}, {5, -3});
  Tensor s = time_std(x);
  EXPECT_DOUBLE_EQ(s.data()[0], 0.0);
  EXPECT_DOUBLE_EQ(s.data()[1], 0.0);
}

// Central finite-difference checks for every registered primitive.
TEST(GradientChecks, PointwiseAndReductions) {
  const std::vector<int> shape{3, 7};
  EXPECT_LT(check_unary_op([](const Tensor& t) { return elu(t); }, shape, 100), 1e-5);
  EXPECT_LT(check_unary_op([](const Tensor& t) { return leaky_relu(t, 0.2); }, shape, 101), 1e-5);
  EXPECT_LT(check_unary_op([](const Tensor& t) { return sigmoid(t); }, shape, 102), 1e-5);
  EXPECT_LT(check_unary_op([](const Tensor& t) { return abs(t); }, shape, 103), 1e-5);
  EXPECT_LT(check_unary_op([](const Tensor& t) { return log_eps(add_const(mul(t, t), 1.0)); }, shape, 104), 1e-5);
  EXPECT_LT(check_unary_op([](const Tensor& t) { return neg(scale(t, 2.5)); }, shape, 105), 1e-5);
  EXPECT_LT(check_unary_op([](const Tensor& t) { return softmax(t); }, shape, 106), 1e-5);
  EXPECT_LT(check_unary_op([](const Tensor& t) { return reshape(sum(t), {1}); }, shape, 107), 1e-5);
  EXPECT_LT(check_unary_op([](const Tensor& t) { return mean(t); }, shape, 108), 1e-5);
}

TEST(GradientChecks, TimeStats) {
  const std::vector<int> shape{2, 3, 9};
  EXPECT_LT(check_unary_op([](const Tensor& t) { return time_mean(t); }, shape, 110), 1e-5);
  EXPECT_LT(check_unary_op([](const Tensor& t) { return time_std(t); }, shape, 111), 1e-5);
  EXPECT_LT(check_unary_op([](const Tensor& t) { return time_max(t); }, shape, 112), 1e-5);
  EXPECT_LT(check_unary_op([](const Tensor& t) { return time_min(t); }, shape, 113), 1e-5);
}

TEST(GradientChecks, ShapeOps) {
  EXPECT_LT(check_unary_op([](const Tensor& t) { return reshape(t, {21}); }, {3, 7}, 120), 1e-5);
  EXPECT_LT(check_unary_op([](const Tensor& t) { return slice1d(t, 3, 8); }, {16}, 121), 1e-5);
  EXPECT_LT(check_unary_op([](const Tensor& t) { return select_row(t, 2); }, {4, 5}, 122), 1e-5);
  EXPECT_LT(check_unary_op(
                [](const Tensor& t) {
                  return concat({select_row(t, 1), select_row(t, 0)});
                },
                {3, 4}, 123),
            1e-5);
}

TEST(GradientChecks, BinaryOps) {
  Rng rng(130);
  std::vector<double> a0 = randn(12, 131), b0;
  b0 = randn(12, 132);
  for (auto& v : b0) v += (v >= 0 ? 2.0 : -2.0);  // keep denominators away from 0
  Tensor bfix = Tensor::from({12}, b0);
  EXPECT_LT(check_unary_op([&](const Tensor& t) { return add(t, bfix); }, {12}, 133), 1e-5);
  EXPECT_LT(check_unary_op([&](const Tensor& t) { return sub(bfix, t); }, {12}, 134), 1e-5);
  EXPECT_LT(check_unary_op([&](const Tensor& t) { return mul(t, bfix); }, {12}, 135), 1e-5);
  EXPECT_LT(check_unary_op([&](const Tensor& t) { return div(t, bfix); }, {12}, 136), 1e-5);
  EXPECT_LT(check_unary_op([&](const Tensor& t) { return div(bfix, add_const(mul(t, t), 1.5)); }, {12}, 137), 1e-5);
  (void)rng;
}

TEST(GradientChecks, LinearConvAndMixers) {
  Tensor w = Tensor::from({3, 5}, randn(15, 140));
  Tensor b = Tensor::from({3}, randn(3, 141));
  EXPECT_LT(check_unary_op([&](const Tensor& t) { return linear(t, w, b); }, {4, 5}, 142), 1e-5);
  Tensor x = Tensor::from({4, 5}, randn(20, 143));
  EXPECT_LT(check_unary_op([&](const Tensor& t) { return linear(x, reshape(t, {3, 5}), b); }, {15}, 144), 1e-5);
  EXPECT_LT(check_unary_op([&](const Tensor& t) { return linear(x, w, t); }, {3}, 145), 1e-5);

  Tensor kern = Tensor::from({2, 3, 3}, randn(18, 146));
  EXPECT_LT(check_unary_op([&](const Tensor& t) { return conv1d(t, kern, 2, 1); }, {2, 3, 11}, 147), 1e-5);
  Tensor xin = Tensor::from({2, 3, 11}, randn(66, 148));
  EXPECT_LT(check_unary_op([&](const Tensor& t) { return conv1d(xin, reshape(t, {2, 3, 3}), 2, 1); }, {18}, 149), 1e-5);

  Tensor kt = Tensor::from({3, 2, 4}, randn(24, 150));
  EXPECT_LT(check_unary_op([&](const Tensor& t) { return conv_transpose1d(t, kt, 2, 1, 11); }, {2, 3, 6}, 151), 1e-5);
  Tensor xt = Tensor::from({2, 3, 6}, randn(36, 152));
  EXPECT_LT(check_unary_op([&](const Tensor& t) { return conv_transpose1d(xt, reshape(t, {3, 2, 4}), 2, 1, 11); }, {24}, 153), 1e-5);

  // signed mixing path
  EXPECT_LT(check_unary_op([](const Tensor& t) { return signed_l1_normalize(t); }, {3, 4, 2}, 154), 1e-4);
  Tensor h = Tensor::from({4, 6, 5}, randn(120, 155));
  EXPECT_LT(check_unary_op([&](const Tensor& t) { return mix_sources(t, h); }, {3, 4, 2}, 156), 1e-5);
  Tensor wmix = Tensor::from({3, 4, 2}, randn(24, 157));
  EXPECT_LT(check_unary_op([&](const Tensor& t) { return mix_sources(wmix, t); }, {4, 6, 5}, 158), 1e-5);
}

TEST(GradientChecks, Normalizations) {
  Tensor gamma = Tensor::from({5}, randn(5, 160, 0.5));
  Tensor beta = Tensor::from({5}, randn(5, 161, 0.5));
  EXPECT_LT(check_unary_op([&](const Tensor& t) { return layernorm(t, gamma, beta); }, {3, 5}, 162), 1e-5);
  EXPECT_LT(check_unary_op([&](const Tensor& t) { return layernorm(t, gamma, beta); }, {5}, 163), 1e-5);

  auto bn_train = [&](const Tensor& t) {
    std::vector<double> rm(5, 0.0), rv(5, 1.0);
    return batchnorm(t, gamma, beta, rm, rv, true);
  };
  auto bn_eval = [&](const Tensor& t) {
    std::vector<double> rm(5, 0.1), rv(5, 0.8);
    return batchnorm(t, gamma, beta, rm, rv, false);
  };
  EXPECT_LT(check_unary_op(bn_train, {4, 5}, 164), 1e-5);
  EXPECT_LT(check_unary_op(bn_train, {2, 5, 7}, 165), 1e-5);
  EXPECT_LT(check_unary_op(bn_eval, {2, 5, 7}, 166), 1e-5);

  // affine gradient through batchnorm
  Tensor xin = Tensor::from({4, 5}, randn(20, 167));
  EXPECT_LT(check_unary_op(
                [&](const Tensor& t) {
                  std::vector<double> rm(5, 0.0), rv(5, 1.0);
                  return batchnorm(xin, t, beta, rm, rv, true);
                },
                {5}, 168),
            1e-5);
}

TEST(GradientChecks, RfftPower) {
  EXPECT_LT(check_unary_op([](const Tensor& t) { return rfft_power(t); }, {16}, 170), 1e-5);
  EXPECT_LT(check_unary_op([](const Tensor& t) { return rfft_power(t); }, {20}, 171), 1e-5);
}

TEST(RfftPower, ConstantFrame) {
  int n = 16;
  double c = 0.75;
  Tensor frame = Tensor::from({n}, std::vector<double>(static_cast<size_t>(n), c));
  Tensor p = rfft_power(frame);
  EXPECT_NEAR(p.data()[0], (n * c) * (n * c), 1e-9);
  for (int k = 1; k <= n / 2; ++k) EXPECT_NEAR(p.data()[k], 0.0, 1e-9);
}

TEST(RfftPower, CosineMatchesNaiveDft) {
  int n = 24, k0 = 5;
  std::vector<double> x(static_cast<size_t>(n));
  for (int t = 0; t < n; ++t)
    x[static_cast<size_t>(t)] = std::cos(2.0 * M_PI * k0 * t / n);
  Tensor p = rfft_power(Tensor::from({n}, x));
  // naive O(n^2) DFT oracle
  for (int k = 0; k <= n / 2; ++k) {
    std::complex<double> acc{0, 0};
    for (int t = 0; t < n; ++t)
      acc += x[static_cast<size_t>(t)] *
             std::exp(std::complex<double>(0, -2.0 * M_PI * k * t / n));
    EXPECT_NEAR(p.data()[k], std::norm(acc), 1e-8) << "bin " << k;
  }
  EXPECT_NEAR(p.data()[k0], (n / 2.0) * (n / 2.0), 1e-8);
}

TEST(Backward, UnusedParameterGetsExactZero) {
  Tape tape;
  Tensor a = tape.watch(Tensor::from({3}, {1, 2, 3}));
  Tensor b = tape.watch(Tensor::from({2}, {4, 5}));
  Tensor out = sum(a);
  tape.backward(out);
  for (double g : tape.grad(b)) EXPECT_EQ(g, 0.0);
}

TEST(Backward, HandCalculusComposite) {
  // f(x) = log(x^2 + eps), f'(2) = 4 / (4 + eps)
  Tape tape;
  Tensor x = tape.watch(Tensor::scalar(2.0));
  Tensor f = log_eps(mul(x, x));
  tape.backward(f);
  EXPECT_NEAR(tape.grad(x)[0], 4.0 / (4.0 + kEps), 1e-14);
}

TEST(Backward, RejectsNonScalarRoot) {
  Tape tape;
  Tensor x = tape.watch(Tensor::from({2}, {1, 2}));
  Tensor y = mul(x, x);
  EXPECT_THROW(tape.backward(y), Error);
}

TEST(Tape, DeterministicAcrossRuns) {
  auto run = [] {
    Tape tape;
    Tensor x = tape.watch(Tensor::from({4, 5}, randn(20, 999)));
    Tensor w = tape.watch(Tensor::from({3, 5}, randn(15, 998)));
    Tensor b = tape.watch(Tensor::from({3}, randn(3, 997)));
    Tensor out = mean(elu(linear(x, w, b)));
    tape.backward(out);
    std::vector<double> r = {out.value()};
    auto gw = tape.grad(w);
    r.insert(r.end(), gw.begin(), gw.end());
    return r;
  };
  auto a = run();
  auto b = run();
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i)
    EXPECT_EQ(a[i], b[i]);  // bit-identical
}

TEST(AdjointProperty, LinearPrimitives) {
  // <P x, y> == <x, P^T y> to 1e-10 on random small tensors, where P^T is
  // obtained from the tape gradient (upstream y).
  auto adjoint_residual = [](const std::function<Tensor(const Tensor&)>& op,
                             const std::vector<int>& in_shape, uint64_t seed) {
    std::vector<double> xv = randn(
        [&] {
          int64_t n = 1;
          for (int d : in_shape) n *= d;
          return static_cast<size_t>(n);
        }(),
        seed);
    Tape tape;
    Tensor x = tape.watch(Tensor::from(in_shape, xv));
    Tensor px = op(x);
    std::vector<double> yv = randn(static_cast<size_t>(px.size()), seed + 1);
    Tensor y = Tensor::from(px.shape(), yv);
    Tensor s = dot(px, y);
    tape.backward(s);
    const auto& pty = tape.grad(x);  // P^T y
    double lhs = s.value();
    double rhs = 0;
    for (size_t i = 0; i < xv.size(); ++i) rhs += xv[i] * pty[i];
    return std::fabs(lhs - rhs);
  };

  Tensor kern = Tensor::from({2, 3, 5}, randn(30, 201));
  EXPECT_LT(adjoint_residual([&](const Tensor& t) { return conv1d(t, kern, 2, 2); }, {3, 12}, 202), 1e-10);
  Tensor kt = Tensor::from({3, 2, 4}, randn(24, 203));
  EXPECT_LT(adjoint_residual([&](const Tensor& t) { return conv_transpose1d(t, kt, 2, 1); }, {3, 6}, 204), 1e-10);
  Tensor w = Tensor::from({4, 6}, randn(24, 205));
  Tensor zero_b({4});
  EXPECT_LT(adjoint_residual([&](const Tensor& t) { return linear(t, w, zero_b); }, {6}, 206), 1e-10);
  Tensor mixw = Tensor::from({3, 4, 2}, randn(24, 207));
  EXPECT_LT(adjoint_residual([&](const Tensor& t) { return mix_sources(mixw, t); }, {4, 6, 5}, 208), 1e-10);
}

TEST(SignedL1, SpecExamples) {
  // column (3,-1,0,0) -> (0.75,-0.25,0,0)
  Tensor a = Tensor::from({1, 4, 1}, {3, -1, 0, 0});
  Tensor y = signed_l1_normalize(a);
  EXPECT_NEAR(y.data()[0], 0.75, 1e-7);
  EXPECT_NEAR(y.data()[1], -0.25, 1e-7);
  EXPECT_NEAR(y.data()[2], 0.0, 1e-12);
  EXPECT_NEAR(y.data()[3], 0.0, 1e-12);

  // positive-scale invariance
  Tensor a2 = Tensor::from({1, 4, 1}, {30, -10, 0, 0});
  Tensor y2 = signed_l1_normalize(a2);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(y.data()[i], y2.data()[i], 1e-8);

  // all-zero column stays zero (eps guard)
  Tensor z = Tensor::from({1, 4, 1}, {0, 0, 0, 0});
  Tensor yz = signed_l1_normalize(z);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(yz.data()[i], 0.0);
}

TEST(MixSources, OneHotAndSignedPaths) {
  Tensor h = Tensor::from({2, 4, 3}, randn(24, 301));
  // one-hot on source 0 for all blocks -> output equals h_0
  Tensor w1 = Tensor::from({1, 2, 2}, {1, 1, 0, 0});
  Tensor y1 = mix_sources(w1, h);
  for (int c = 0; c < 4; ++c)
    for (int l = 0; l < 3; ++l)
      EXPECT_DOUBLE_EQ(y1.data()[c * 3 + l], h.data()[c * 3 + l]);
  // weight -1 on source 0 -> negated copy
  Tensor wm = Tensor::from({1, 2, 2}, {-1, -1, 0, 0});
  Tensor ym = mix_sources(wm, h);
  for (int i = 0; i < 12; ++i) EXPECT_DOUBLE_EQ(ym.data()[i], -h.data()[i]);
  // brute-force loop oracle on a random 2-block toy
  Tensor w = Tensor::from({3, 2, 2}, randn(12, 302));
  Tensor y = mix_sources(w, h);
  for (int t = 0; t < 3; ++t)
    for (int c = 0; c < 4; ++c)
      for (int l = 0; l < 3; ++l) {
        double want = 0;
        int b = c / 2;
        for (int s = 0; s < 2; ++s)
          want += w.data()[(t * 2 + s) * 2 + b] * h.data()[(s * 4 + c) * 3 + l];
        EXPECT_NEAR(y.data()[(t * 4 + c) * 3 + l], want, 1e-12);
      }
}
