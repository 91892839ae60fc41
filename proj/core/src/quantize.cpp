#include "adaqat/quantize.hpp"

#include <cmath>
#include <stdexcept>

namespace adaqat {

namespace {

void check_bits(int k) {
  if (k < 1) throw std::domain_error("bit-width must be >= 1");
}

double grid_scale(int k) { return std::pow(2.0, k) - 1.0; }

inline float round_to_grid(float x, double s) {
  return static_cast<float>(std::round(static_cast<double>(x) * s) / s);
}

// max |tanh(w)| over the tensor
double tanh_max_abs(const Tensor& w) {
  double m = 0.0;
  const float* p = w.data();
  for (int64_t i = 0; i < w.size(); ++i) {
    m = std::max(m, std::fabs(static_cast<double>(std::tanh(p[i]))));
  }
  return m;
}

}  // namespace

float quantize_unit(float x, int k) {
  check_bits(k);
  if (x < 0.0f || x > 1.0f) {
    throw std::domain_error("quantize_unit: input " + std::to_string(x) +
                            " outside [0,1]");
  }
  if (k == kPassThroughBits) return x;
  return round_to_grid(x, grid_scale(k));
}

Tensor quantize_weights_forward(const Tensor& w, int k) {
  check_bits(k);
  if (w.size() == 0) throw std::invalid_argument("quantize_weights_forward: empty tensor");
  if (k == kPassThroughBits) return w;

  const double denom = 2.0 * tanh_max_abs(w) + kWeightQuantEps;
  const double s = grid_scale(k);
  Tensor out = Tensor::zeros(w.shape());
  const float* src = w.data();
  float* dst = out.data();
  for (int64_t i = 0; i < w.size(); ++i) {
    double f = std::tanh(static_cast<double>(src[i])) / denom;  // in [-1/2, 1/2]
    double q = std::round((f + 0.5) * s) / s;
    dst[i] = static_cast<float>(2.0 * q - 1.0);
  }
  return out;
}

Tensor quantize_weights_backward(const Tensor& upstream, const Tensor& w, int k) {
  check_bits(k);
  if (upstream.shape() != w.shape()) {
    throw std::invalid_argument("quantize_weights_backward: shape mismatch " +
                                upstream.shape_str() + " vs " + w.shape_str());
  }
  Tensor out = Tensor::zeros(w.shape());
  const float* up = upstream.data();
  const float* src = w.data();
  float* dst = out.data();
  if (k == kPassThroughBits) {
    for (int64_t i = 0; i < w.size(); ++i) dst[i] = up[i];
    return out;
  }
  const double denom = 2.0 * tanh_max_abs(w) + kWeightQuantEps;
  for (int64_t i = 0; i < w.size(); ++i) {
    double t = std::tanh(static_cast<double>(src[i]));
    dst[i] = static_cast<float>(up[i] * 2.0 * (1.0 - t * t) / denom);
  }
  return out;
}

Tensor pact_forward(const Tensor& x, float alpha, int k) {
  check_bits(k);
  if (alpha <= 0.0f) {
    throw std::domain_error("pact_forward: alpha must be positive, got " +
                            std::to_string(alpha));
  }
  Tensor out = Tensor::zeros(x.shape());
  const float* src = x.data();
  float* dst = out.data();
  const bool pass = (k == kPassThroughBits);
  const double s = pass ? 0.0 : grid_scale(k) / static_cast<double>(alpha);
  for (int64_t i = 0; i < x.size(); ++i) {
    float y = std::min(std::max(src[i], 0.0f), alpha);
    if (!pass) y = std::min(round_to_grid(y, s), alpha);
    dst[i] = y;
  }
  return out;
}

std::pair<Tensor, float> pact_backward(const Tensor& upstream, const Tensor& x,
                                       float alpha) {
  if (upstream.shape() != x.shape()) {
    throw std::invalid_argument("pact_backward: shape mismatch " +
                                upstream.shape_str() + " vs " + x.shape_str());
  }
  Tensor x_grad = Tensor::zeros(x.shape());
  double alpha_grad = 0.0;
  const float* up = upstream.data();
  const float* src = x.data();
  float* dst = x_grad.data();
  for (int64_t i = 0; i < x.size(); ++i) {
    if (src[i] > alpha) {
      alpha_grad += static_cast<double>(up[i]);
    } else if (src[i] >= 0.0f) {
      dst[i] = up[i];
    }
  }
  return {std::move(x_grad), static_cast<float>(alpha_grad)};
}

Tensor quantize_weights(const Tensor& w, int k) {
  if (k == kPassThroughBits) return w;  // same handle: pass-through is exact
  Tensor out = quantize_weights_forward(w, k);
  if (Tape::active() && w.tape_attached()) {
    Tensor w_saved = w;
    const double denom = 2.0 * tanh_max_abs(w) + kWeightQuantEps;
    Tape::active()->record(out, [w_saved, denom](const float* g, GradSink& sink) {
      if (float* gw = sink.grad_ptr(w_saved)) {
        const float* src = w_saved.data();
        for (int64_t i = 0; i < w_saved.size(); ++i) {
          double t = std::tanh(static_cast<double>(src[i]));
          gw[i] += static_cast<float>(g[i] * 2.0 * (1.0 - t * t) / denom);
        }
      }
    });
  }
  return out;
}

Tensor clip_alpha(const Tensor& x, const Tensor& alpha) {
  if (!alpha.is_scalar()) {
    throw std::invalid_argument("clip_alpha: alpha must be scalar, got " +
                                alpha.shape_str());
  }
  const float a = alpha.data()[0];
  if (a <= 0.0f) {
    throw std::domain_error("clip_alpha: alpha must be positive, got " +
                            std::to_string(a));
  }
  Tensor out = Tensor::zeros(x.shape());
  const float* src = x.data();
  float* dst = out.data();
  for (int64_t i = 0; i < x.size(); ++i) {
    float y = src[i];
    if (y < 0.0f) y = 0.0f;
    if (y > a) y = a;
    dst[i] = y;
  }
  if (Tape::active() && (x.tape_attached() || alpha.tape_attached())) {
    Tensor x_saved = x, alpha_saved = alpha;
    Tape::active()->record(out, [x_saved, alpha_saved, a](const float* g,
                                                          GradSink& sink) {
      const float* src = x_saved.data();
      float* gx = sink.grad_ptr(x_saved);
      float* ga = sink.grad_ptr(alpha_saved);
      double acc = 0.0;
      for (int64_t i = 0; i < x_saved.size(); ++i) {
        if (src[i] > a) {
          acc += static_cast<double>(g[i]);
        } else if (src[i] >= 0.0f && gx) {
          gx[i] += g[i];
        }
      }
      if (ga) ga[0] += static_cast<float>(acc);
    });
  }
  return out;
}

Tensor pact(const Tensor& x, const Tensor& alpha, int k) {
  if (!alpha.is_scalar()) {
    throw std::invalid_argument("pact: alpha must be scalar, got " +
                                alpha.shape_str());
  }
  const float a = alpha.data()[0];
  Tensor out = pact_forward(x, a, k);
  if (Tape::active() && (x.tape_attached() || alpha.tape_attached())) {
    Tensor x_saved = x, alpha_saved = alpha;
    Tape::active()->record(out, [x_saved, alpha_saved, a](const float* g,
                                                          GradSink& sink) {
      const float* src = x_saved.data();
      float* gx = sink.grad_ptr(x_saved);
      float* ga = sink.grad_ptr(alpha_saved);
      double acc = 0.0;
      for (int64_t i = 0; i < x_saved.size(); ++i) {
        if (src[i] > a) {
          acc += static_cast<double>(g[i]);
        } else if (src[i] >= 0.0f && gx) {
          gx[i] += g[i];
        }
      }
      if (ga) ga[0] += static_cast<float>(acc);
    });
  }
  return out;
}

}  // namespace adaqat
