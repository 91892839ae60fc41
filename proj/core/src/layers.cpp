#include "adaqat/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "adaqat/ops.hpp"
#include "adaqat/quantize.hpp"

namespace adaqat {

namespace {

std::vector<float> kaiming(int64_t count, int fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::vector<float> v(static_cast<size_t>(count));
  for (float& x : v) x = static_cast<float>(rng.gaussian(0.0, stddev));
  return v;
}

}  // namespace

Conv2d::Conv2d(int in_ch, int out_ch, int ksize, int stride, int padding,
               bool has_bias, Rng& rng)
    : in_ch(in_ch), out_ch(out_ch), ksize(ksize), stride(stride),
      padding(padding) {
  if (in_ch < 1 || out_ch < 1 || ksize < 1 || stride < 1 || padding < 0) {
    throw std::invalid_argument("conv geometry must be positive");
  }
  const int64_t count =
      static_cast<int64_t>(out_ch) * in_ch * ksize * ksize;
  weight = Tensor::param({out_ch, in_ch, ksize, ksize},
                         kaiming(count, in_ch * ksize * ksize, rng));
  if (has_bias) {
    bias = Tensor::param({out_ch}, std::vector<float>(out_ch, 0.0f));
  }
}

Tensor Conv2d::forward(const Tensor& x, int k_w) {
  Tensor y = conv2d(x, quantize_weights(weight, k_w), stride, padding);
  return bias.defined() ? add_bias(y, bias) : y;
}

Tensor Conv2d::forward_raw(const Tensor& x) {
  Tensor y = conv2d(x, weight, stride, padding);
  return bias.defined() ? add_bias(y, bias) : y;
}

Linear::Linear(int in, int out, Rng& rng) : in(in), out(out) {
  if (in < 1 || out < 1) throw std::invalid_argument("linear dims must be positive");
  weight = Tensor::param({in, out},
                         kaiming(static_cast<int64_t>(in) * out, in, rng));
  bias = Tensor::param({out}, std::vector<float>(out, 0.0f));
}

Tensor Linear::forward(const Tensor& x, int k_w) {
  return add_bias(matmul(x, quantize_weights(weight, k_w)), bias);
}

Tensor Linear::forward_raw(const Tensor& x) {
  return add_bias(matmul(x, weight), bias);
}

BatchNorm2d::BatchNorm2d(int channels) : channels_(channels) {
  if (channels < 1) throw std::invalid_argument("channel count must be positive");
  gamma = Tensor::param({channels}, std::vector<float>(channels, 1.0f));
  beta = Tensor::param({channels}, std::vector<float>(channels, 0.0f));
  running_mean.assign(static_cast<size_t>(channels), 0.0f);
  running_var.assign(static_cast<size_t>(channels), 1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode) {
  if (x.rank() != 4 || x.dim(1) != channels_) {
    throw std::invalid_argument("batch norm expects [N," +
                                std::to_string(channels_) + ",H,W], got " +
                                x.shape_str());
  }
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t plane = static_cast<int64_t>(h) * w;
  const int64_t per_channel = static_cast<int64_t>(n) * plane;
  const float* src = x.data();

  std::vector<float> mean(static_cast<size_t>(c));
  std::vector<float> inv_std(static_cast<size_t>(c));
  if (mode == Mode::kEval) {
    for (int ch = 0; ch < c; ++ch) {
      mean[static_cast<size_t>(ch)] = running_mean[static_cast<size_t>(ch)];
      inv_std[static_cast<size_t>(ch)] = 1.0f /
          std::sqrt(running_var[static_cast<size_t>(ch)] + eps);
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      double sum = 0.0, sum_sq = 0.0;
      for (int img = 0; img < n; ++img) {
        const float* p = src + (static_cast<int64_t>(img) * c + ch) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          sum += p[i];
          sum_sq += static_cast<double>(p[i]) * p[i];
        }
      }
      const double m = sum / static_cast<double>(per_channel);
      const double var = sum_sq / static_cast<double>(per_channel) - m * m;
      mean[static_cast<size_t>(ch)] = static_cast<float>(m);
      inv_std[static_cast<size_t>(ch)] =
          static_cast<float>(1.0 / std::sqrt(var + eps));
      if (mode == Mode::kTrain) {
        running_mean[static_cast<size_t>(ch)] =
            (1.0f - momentum) * running_mean[static_cast<size_t>(ch)] +
            momentum * static_cast<float>(m);
        running_var[static_cast<size_t>(ch)] =
            (1.0f - momentum) * running_var[static_cast<size_t>(ch)] +
            momentum * static_cast<float>(var);
      }
    }
  }

  Tensor out = Tensor::zeros(x.shape());
  Tensor xhat = Tensor::zeros(x.shape());  // saved for the backward pass
  float* dst = out.data();
  float* hat = xhat.data();
  const float* g = gamma.data();
  const float* b = beta.data();
  for (int img = 0; img < n; ++img) {
    for (int ch = 0; ch < c; ++ch) {
      const int64_t base = (static_cast<int64_t>(img) * c + ch) * plane;
      const float mu = mean[static_cast<size_t>(ch)];
      const float is = inv_std[static_cast<size_t>(ch)];
      const float ga = g[ch];
      const float be = b[ch];
      for (int64_t i = 0; i < plane; ++i) {
        const float xh = (src[base + i] - mu) * is;
        hat[base + i] = xh;
        dst[base + i] = ga * xh + be;
      }
    }
  }

  if (Tape::active() &&
      (x.tape_attached() || gamma.tape_attached() || beta.tape_attached())) {
    Tensor x_saved = x, gamma_saved = gamma, beta_saved = beta;
    const bool batch_stats = (mode != Mode::kEval);
    Tape::active()->record(
        out, [x_saved, gamma_saved, beta_saved, xhat, inv_std, n, c, plane,
              per_channel, batch_stats](const float* up, GradSink& sink) {
          const float* xh = xhat.data();
          float* gx = sink.grad_ptr(x_saved);
          float* gg = sink.grad_ptr(gamma_saved);
          float* gb = sink.grad_ptr(beta_saved);
          for (int ch = 0; ch < c; ++ch) {
            double sum_g = 0.0, sum_gxh = 0.0;
            for (int img = 0; img < n; ++img) {
              const int64_t base = (static_cast<int64_t>(img) * c + ch) * plane;
              for (int64_t i = 0; i < plane; ++i) {
                sum_g += up[base + i];
                sum_gxh += static_cast<double>(up[base + i]) * xh[base + i];
              }
            }
            if (gg) gg[ch] += static_cast<float>(sum_gxh);
            if (gb) gb[ch] += static_cast<float>(sum_g);
            if (gx) {
              const float ga = gamma_saved.data()[ch];
              const float is = inv_std[static_cast<size_t>(ch)];
              // With batch statistics the mean/variance depend on x; with
              // running statistics they are constants.
              const float mg = batch_stats
                  ? static_cast<float>(sum_g / static_cast<double>(per_channel))
                  : 0.0f;
              const float mgxh = batch_stats
                  ? static_cast<float>(sum_gxh / static_cast<double>(per_channel))
                  : 0.0f;
              for (int img = 0; img < n; ++img) {
                const int64_t base =
                    (static_cast<int64_t>(img) * c + ch) * plane;
                for (int64_t i = 0; i < plane; ++i) {
                  gx[base + i] += ga * is *
                      (up[base + i] - mg - xh[base + i] * mgxh);
                }
              }
            }
          }
        });
  }
  return out;
}

PactActivation::PactActivation() {
  alpha = Tensor::param({1}, {kAlphaInit});
}

Tensor PactActivation::forward(const Tensor& x, int k_a) {
  return pact(x, alpha, k_a);
}

Tensor PactActivation::forward_raw(const Tensor& x) {
  return clip_alpha(x, alpha);
}

}  // namespace adaqat
