#include <cmath>
#include <vector>

#include "adaqat/layers.hpp"
#include "adaqat/ops.hpp"
#include "adaqat/quantize.hpp"
#include "adaqat/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace adaqat;
using testutil::max_grad_error;
using testutil::rand_tensor;

TEST_CASE("convolution layer: shapes, bias, and initialization scale") {
  Rng rng(11);
  Conv2d conv(3, 16, 3, 1, 1, /*has_bias=*/true, rng);
  REQUIRE(conv.weight.shape() == std::vector<int>{16, 3, 3, 3});
  REQUIRE(conv.bias.shape() == std::vector<int>{16});
  for (int i = 0; i < 16; ++i) CHECK(conv.bias.data()[i] == 0.0f);
  CHECK(conv.weight_count() == 16 * 27);

  // Kaiming: std = sqrt(2 / fan_in), fan_in = 3*3*3 = 27.
  double sum = 0.0, sq = 0.0;
  for (int64_t i = 0; i < conv.weight.size(); ++i) {
    sum += conv.weight.data()[i];
    sq += static_cast<double>(conv.weight.data()[i]) * conv.weight.data()[i];
  }
  const double n = static_cast<double>(conv.weight.size());
  const double mean = sum / n;
  const double stddev = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean) < 0.05);
  CHECK(stddev == doctest::Approx(std::sqrt(2.0 / 27.0)).epsilon(0.15));

  Conv2d no_bias(3, 4, 3, 2, 1, /*has_bias=*/false, rng);
  CHECK_FALSE(no_bias.bias.defined());
}

TEST_CASE("convolution layer: pass-through forward equals the raw path") {
  Rng rng(12);
  Conv2d conv(2, 3, 3, 1, 1, true, rng);
  Tensor x = rand_tensor({2, 2, 5, 5}, rng);
  Tensor a = conv.forward(x, kPassThroughBits);
  Tensor b = conv.forward_raw(x);
  REQUIRE(a.shape() == b.shape());
  for (int64_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("convolution layer: quantized forward uses quantized weights") {
  Rng rng(13);
  Conv2d conv(1, 1, 3, 1, 0, false, rng);
  Tensor x = rand_tensor({1, 1, 4, 4}, rng);
  Tensor got = conv.forward(x, 2);
  Tensor expect = conv2d(x, quantize_weights_forward(conv.weight, 2), 1, 0);
  for (int64_t i = 0; i < got.size(); ++i) {
    CHECK(got.data()[i] == expect.data()[i]);
  }
}

TEST_CASE("linear layer: forward values") {
  Rng rng(14);
  Linear fc(2, 2, rng);
  fc.weight.data()[0] = 1.0f;  // W[in=0][out=0]
  fc.weight.data()[1] = 2.0f;  // W[in=0][out=1]
  fc.weight.data()[2] = 3.0f;
  fc.weight.data()[3] = 4.0f;
  fc.bias.data()[0] = 0.5f;
  fc.bias.data()[1] = -0.5f;
  Tensor x = Tensor::from({1, 2}, {1.0f, 1.0f});
  Tensor y = fc.forward_raw(x);
  CHECK(y.at({0, 0}) == 4.5f);   // 1+3+0.5
  CHECK(y.at({0, 1}) == 5.5f);   // 2+4-0.5
}

TEST_CASE("batch norm: train mode normalizes with biased variance") {
  BatchNorm2d bn(1);
  Tensor x = Tensor::from({2, 1, 1, 1}, {1.0f, 3.0f});
  Tensor y = bn.forward(x, Mode::kTrain);
  // mean 2, biased var 1.
  CHECK(y.data()[0] == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(y.data()[1] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(bn.running_mean[0] == doctest::Approx(0.2));       // 0.9*0 + 0.1*2
  CHECK(bn.running_var[0] == doctest::Approx(1.0));        // 0.9*1 + 0.1*1
}

TEST_CASE("batch norm: probe mode leaves running statistics untouched") {
  BatchNorm2d bn(1);
  Tensor x = Tensor::from({2, 1, 1, 1}, {5.0f, 9.0f});
  Tensor y = bn.forward(x, Mode::kProbe);
  // Batch statistics still used for the output...
  CHECK(y.data()[0] == doctest::Approx(-1.0).epsilon(1e-3));
  CHECK(y.data()[1] == doctest::Approx(1.0).epsilon(1e-3));
  // ...but the running estimates stay at initialization.
  CHECK(bn.running_mean[0] == 0.0f);
  CHECK(bn.running_var[0] == 1.0f);
}

TEST_CASE("batch norm: eval mode uses running statistics") {
  BatchNorm2d bn(1);
  bn.running_mean[0] = 2.0f;
  bn.running_var[0] = 4.0f;
  Tensor x = Tensor::from({1, 1, 1, 2}, {2.0f, 4.0f});
  Tensor y = bn.forward(x, Mode::kEval);
  CHECK(y.data()[0] == doctest::Approx(0.0).epsilon(1e-4));
  CHECK(y.data()[1] == doctest::Approx(2.0 / std::sqrt(4.0 + 1e-5)));
}

TEST_CASE("batch norm: gamma and beta apply after normalization") {
  BatchNorm2d bn(2);
  bn.gamma.data()[0] = 2.0f;
  bn.gamma.data()[1] = 0.5f;
  bn.beta.data()[0] = 1.0f;
  bn.beta.data()[1] = -1.0f;
  Tensor x = Tensor::from({2, 2, 1, 1}, {1.0f, 0.0f, 3.0f, 10.0f});
  Tensor y = bn.forward(x, Mode::kTrain);
  // Channel 0: values {1,3} -> xhat {-1,1}; y = 2*xhat + 1 -> {-1, 3}.
  CHECK(y.at({0, 0, 0, 0}) == doctest::Approx(-1.0).epsilon(1e-3));
  CHECK(y.at({1, 0, 0, 0}) == doctest::Approx(3.0).epsilon(1e-3));
  // Channel 1: values {0,10} -> xhat {-1,1}; y = 0.5*xhat - 1 -> {-1.5, -0.5}.
  CHECK(y.at({0, 1, 0, 0}) == doctest::Approx(-1.5).epsilon(1e-3));
  CHECK(y.at({1, 1, 0, 0}) == doctest::Approx(-0.5).epsilon(1e-3));
}

TEST_CASE("batch norm: train-mode gradients vs central differences") {
  Rng rng(15);
  for (int rep = 0; rep < 10; ++rep) {
    BatchNorm2d bn(2);
    bn.gamma.data()[0] = 1.5f;
    bn.gamma.data()[1] = 0.7f;
    bn.beta.data()[1] = 0.3f;
    Tensor x = rand_tensor({2, 2, 2, 2}, rng, -2.0f, 2.0f, /*param=*/true);
    Tensor w = rand_tensor({2, 2, 2, 2}, rng);
    auto loss = [&] {
      NoGradGuard g;
      Tensor y = bn.forward(x, Mode::kProbe);
      double s = 0.0;
      for (int64_t i = 0; i < y.size(); ++i) {
        s += static_cast<double>(y.data()[i]) * w.data()[i];
      }
      return static_cast<float>(s);
    };
    auto backward = [&] {
      x.zero_grad();
      bn.gamma.zero_grad();
      bn.beta.zero_grad();
      Tape tape;
      Tape::Scope scope(tape);
      tape.backward(sum(mul(bn.forward(x, Mode::kProbe), w)));
    };
    CHECK(max_grad_error({x, bn.gamma, bn.beta}, loss, backward, 1e-2) < 2e-3);
  }
}

TEST_CASE("batch norm: eval-mode gradients treat statistics as constants") {
  Rng rng(16);
  BatchNorm2d bn(1);
  bn.running_mean[0] = 0.5f;
  bn.running_var[0] = 2.0f;
  Tensor x = rand_tensor({2, 1, 2, 2}, rng, -1.0f, 1.0f, /*param=*/true);
  {
    Tape tape;
    Tape::Scope scope(tape);
    tape.backward(sum(bn.forward(x, Mode::kEval)));
  }
  const float expect = 1.0f / std::sqrt(2.0f + 1e-5f);
  for (int64_t i = 0; i < x.size(); ++i) {
    CHECK(x.grad()[i] == doctest::Approx(expect).epsilon(1e-4));
  }
}

TEST_CASE("clipped activation layer wraps the shared bound") {
  PactActivation act;
  CHECK(act.alpha.item() == kAlphaInit);
  Tensor x = Tensor::from({3}, {-1.0f, 0.5f, 100.0f});
  Tensor y = act.forward(x, 4);
  CHECK(y.data()[0] == 0.0f);
  CHECK(y.data()[2] == kAlphaInit);
  Tensor raw = act.forward_raw(x);
  CHECK(raw.data()[1] == 0.5f);
  CHECK(raw.data()[2] == kAlphaInit);
}

TEST_CASE("conv + batch norm + activation chain backpropagates") {
  Rng rng(17);
  Conv2d conv(1, 2, 3, 1, 1, false, rng);
  BatchNorm2d bn(2);
  PactActivation act;
  Tensor x = rand_tensor({2, 1, 4, 4}, rng, -1.0f, 1.0f, /*param=*/true);
  {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor y = act.forward(bn.forward(conv.forward(x, 4), Mode::kTrain), 4);
    tape.backward(sum(y));
  }
  CHECK(conv.weight.has_grad());
  CHECK(bn.gamma.has_grad());
  CHECK(act.alpha.has_grad());
  bool any = false;
  for (int64_t i = 0; i < conv.weight.size(); ++i) {
    if (conv.weight.grad()[i] != 0.0f) any = true;
  }
  CHECK(any);
}
