#include "adaqat/ops.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace adaqat {

namespace {

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active()) return false;
  for (const Tensor* t : inputs) {
    if (t->tape_attached()) return true;
  }
  return false;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a.shape_str() + " vs " + b.shape_str());
  }
}

// Gathers x[n] (C,H,W) into a [C*kh*kw, oh*ow] patch matrix.
void im2col(const float* x, int c, int h, int w, int kh, int kw, int stride,
            int pad, int oh, int ow, float* col) {
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        float* dst = col + ((ch * kh + ki) * kw + kj) * (oh * ow);
        for (int oi = 0; oi < oh; ++oi) {
          int ii = oi * stride + ki - pad;
          if (ii < 0 || ii >= h) {
            std::memset(dst + oi * ow, 0, sizeof(float) * static_cast<size_t>(ow));
            continue;
          }
          const float* src_row = x + (ch * h + ii) * w;
          for (int oj = 0; oj < ow; ++oj) {
            int jj = oj * stride + kj - pad;
            dst[oi * ow + oj] = (jj < 0 || jj >= w) ? 0.0f : src_row[jj];
          }
        }
      }
    }
  }
}

// Scatter-adds a patch matrix back onto the (C,H,W) image.
void col2im_add(const float* col, int c, int h, int w, int kh, int kw,
                int stride, int pad, int oh, int ow, float* x) {
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const float* src = col + ((ch * kh + ki) * kw + kj) * (oh * ow);
        for (int oi = 0; oi < oh; ++oi) {
          int ii = oi * stride + ki - pad;
          if (ii < 0 || ii >= h) continue;
          float* dst_row = x + (ch * h + ii) * w;
          for (int oj = 0; oj < ow; ++oj) {
            int jj = oj * stride + kj - pad;
            if (jj >= 0 && jj < w) dst_row[jj] += src[oi * ow + oj];
          }
        }
      }
    }
  }
}

}  // namespace

void gemm_nn(const float* a, const float* b, float* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<int64_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      float av = a[static_cast<int64_t>(i) * k + p];
      if (av == 0.0f) continue;
      const float* brow = b + static_cast<int64_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const float* a, const float* b, float* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<int64_t>(i) * k;
    float* crow = c + static_cast<int64_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const float* brow = b + static_cast<int64_t>(j) * k;
      float acc = 0.0f;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

void gemm_tn(const float* a, const float* b, float* c, int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    const float* arow = a + static_cast<int64_t>(p) * m;
    const float* brow = b + static_cast<int64_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      float av = arow[i];
      if (av == 0.0f) continue;
      float* crow = c + static_cast<int64_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: incompatible shapes " + a.shape_str() +
                                " and " + b.shape_str());
  }
  int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  gemm_nn(a.data(), b.data(), out.data(), m, k, n);

  if (should_record({&a, &b})) {
    Tensor a_saved = a, b_saved = b;
    Tape::active()->record(out, [a_saved, b_saved, m, k, n](const float* g,
                                                           GradSink& sink) {
      if (float* ga = sink.grad_ptr(a_saved)) {
        gemm_nt(g, b_saved.data(), ga, m, n, k);  // g [m,n] * b^T [n,k]
      }
      if (float* gb = sink.grad_ptr(b_saved)) {
        gemm_tn(a_saved.data(), g, gb, k, m, n);  // a^T [k,m] * g [m,n]
      }
    });
  }
  return out;
}

ConvGeom conv2d_geometry(int h, int w, int kh, int kw, int stride, int padding) {
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (padding < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
  if (kh > h + 2 * padding || kw > w + 2 * padding) {
    throw std::invalid_argument("conv2d: kernel larger than padded input");
  }
  ConvGeom geom;
  geom.out_h = (h + 2 * padding - kh) / stride + 1;
  geom.out_w = (w + 2 * padding - kw) / stride + 1;
  if (geom.out_h <= 0 || geom.out_w <= 0) {
    throw std::invalid_argument("conv2d: zero-sized output");
  }
  return geom;
}

Tensor conv2d(const Tensor& x, const Tensor& f, int stride, int padding) {
  if (x.rank() != 4 || f.rank() != 4 || x.dim(1) != f.dim(1)) {
    throw std::invalid_argument("conv2d: incompatible shapes " + x.shape_str() +
                                " and " + f.shape_str());
  }
  const int batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int o = f.dim(0), kh = f.dim(2), kw = f.dim(3);
  ConvGeom geom = conv2d_geometry(h, w, kh, kw, stride, padding);
  const int oh = geom.out_h, ow = geom.out_w;
  const int patch = c * kh * kw;

  Tensor out = Tensor::zeros({batch, o, oh, ow});
  std::vector<float> col(static_cast<size_t>(patch) * oh * ow);
  for (int n = 0; n < batch; ++n) {
    im2col(x.data() + static_cast<int64_t>(n) * c * h * w, c, h, w, kh, kw,
           stride, padding, oh, ow, col.data());
    gemm_nn(f.data(), col.data(),
            out.data() + static_cast<int64_t>(n) * o * oh * ow, o, patch,
            oh * ow);
  }

  if (should_record({&x, &f})) {
    Tensor x_saved = x, f_saved = f;
    Tape::active()->record(
        out, [x_saved, f_saved, stride, padding, batch, c, h, w, o, kh, kw, oh,
              ow, patch](const float* g, GradSink& sink) {
          std::vector<float> col(static_cast<size_t>(patch) * oh * ow);
          float* gf = sink.grad_ptr(f_saved);
          float* gx = sink.grad_ptr(x_saved);
          std::vector<float> gcol;
          if (gx) gcol.resize(static_cast<size_t>(patch) * oh * ow);
          for (int n = 0; n < batch; ++n) {
            const float* gn = g + static_cast<int64_t>(n) * o * oh * ow;
            if (gf) {
              im2col(x_saved.data() + static_cast<int64_t>(n) * c * h * w, c, h,
                     w, kh, kw, stride, padding, oh, ow, col.data());
              gemm_nt(gn, col.data(), gf, o, oh * ow, patch);
            }
            if (gx) {
              std::fill(gcol.begin(), gcol.end(), 0.0f);
              gemm_tn(f_saved.data(), gn, gcol.data(), patch, o, oh * ow);
              col2im_add(gcol.data(), c, h, w, kh, kw, stride, padding, oh, ow,
                         gx + static_cast<int64_t>(n) * c * h * w);
            }
          }
        });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (should_record({&a, &b})) {
    Tensor a_saved = a, b_saved = b;
    Tape::active()->record(out, [a_saved, b_saved, n](const float* g,
                                                      GradSink& sink) {
      if (float* ga = sink.grad_ptr(a_saved)) {
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
      }
      if (float* gb = sink.grad_ptr(b_saved)) {
        for (int64_t i = 0; i < n; ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (should_record({&a, &b})) {
    Tensor a_saved = a, b_saved = b;
    Tape::active()->record(out, [a_saved, b_saved, n](const float* g,
                                                      GradSink& sink) {
      if (float* ga = sink.grad_ptr(a_saved)) {
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * b_saved.data()[i];
      }
      if (float* gb = sink.grad_ptr(b_saved)) {
        for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * a_saved.data()[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, float s) {
  Tensor out = Tensor::zeros(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * s;
  if (should_record({&a})) {
    Tensor a_saved = a;
    Tape::active()->record(out, [a_saved, s, n](const float* g, GradSink& sink) {
      if (float* ga = sink.grad_ptr(a_saved)) {
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * s;
      }
    });
  }
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  if (b.rank() != 1) {
    throw std::invalid_argument("add_bias: bias must be rank 1, got " +
                                b.shape_str());
  }
  Tensor out = Tensor::zeros(x.shape());
  int64_t channels, inner, outer;
  if (x.rank() == 2 && x.dim(1) == b.dim(0)) {
    outer = x.dim(0), channels = x.dim(1), inner = 1;
  } else if (x.rank() == 4 && x.dim(1) == b.dim(0)) {
    outer = x.dim(0), channels = x.dim(1);
    inner = static_cast<int64_t>(x.dim(2)) * x.dim(3);
  } else {
    throw std::invalid_argument("add_bias: incompatible shapes " +
                                x.shape_str() + " and " + b.shape_str());
  }
  for (int64_t n = 0; n < outer; ++n) {
    for (int64_t ch = 0; ch < channels; ++ch) {
      const float bv = b.data()[ch];
      float* dst = out.data() + (n * channels + ch) * inner;
      const float* src = x.data() + (n * channels + ch) * inner;
      for (int64_t i = 0; i < inner; ++i) dst[i] = src[i] + bv;
    }
  }
  if (should_record({&x, &b})) {
    Tensor x_saved = x, b_saved = b;
    Tape::active()->record(
        out, [x_saved, b_saved, outer, channels, inner](const float* g,
                                                        GradSink& sink) {
          if (float* gx = sink.grad_ptr(x_saved)) {
            const int64_t total = outer * channels * inner;
            for (int64_t i = 0; i < total; ++i) gx[i] += g[i];
          }
          if (float* gb = sink.grad_ptr(b_saved)) {
            for (int64_t n = 0; n < outer; ++n) {
              for (int64_t ch = 0; ch < channels; ++ch) {
                const float* src = g + (n * channels + ch) * inner;
                float acc = 0.0f;
                for (int64_t i = 0; i < inner; ++i) acc += src[i];
                gb[ch] += acc;
              }
            }
          }
        });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  Tensor out = Tensor::zeros({1});
  float acc = 0.0f;
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) acc += a.data()[i];
  out.data()[0] = acc;
  if (should_record({&a})) {
    Tensor a_saved = a;
    Tape::active()->record(out, [a_saved, n](const float* g, GradSink& sink) {
      if (float* ga = sink.grad_ptr(a_saved)) {
        for (int64_t i = 0; i < n; ++i) ga[i] += g[0];
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
  if (shape_numel(shape) != x.size()) {
    throw std::invalid_argument("reshape: volume mismatch " + x.shape_str());
  }
  Tensor out = Tensor::zeros(shape);
  std::memcpy(out.data(), x.data(), sizeof(float) * static_cast<size_t>(x.size()));
  if (should_record({&x})) {
    Tensor x_saved = x;
    const int64_t n = x.size();
    Tape::active()->record(out, [x_saved, n](const float* g, GradSink& sink) {
      if (float* gx = sink.grad_ptr(x_saved)) {
        for (int64_t i = 0; i < n; ++i) gx[i] += g[i];
      }
    });
  }
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.rank() != 4) {
    throw std::invalid_argument("global_avg_pool: expected rank 4, got " +
                                x.shape_str());
  }
  const int n = x.dim(0), c = x.dim(1);
  const int64_t hw = static_cast<int64_t>(x.dim(2)) * x.dim(3);
  Tensor out = Tensor::zeros({n, c});
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const float* src = x.data() + (static_cast<int64_t>(b) * c + ch) * hw;
      float acc = 0.0f;
      for (int64_t i = 0; i < hw; ++i) acc += src[i];
      out.data()[b * c + ch] = acc / static_cast<float>(hw);
    }
  }
  if (should_record({&x})) {
    Tensor x_saved = x;
    Tape::active()->record(out, [x_saved, n, c, hw](const float* g,
                                                    GradSink& sink) {
      if (float* gx = sink.grad_ptr(x_saved)) {
        const float inv = 1.0f / static_cast<float>(hw);
        for (int b = 0; b < n; ++b) {
          for (int ch = 0; ch < c; ++ch) {
            const float gv = g[b * c + ch] * inv;
            float* dst = gx + (static_cast<int64_t>(b) * c + ch) * hw;
            for (int64_t i = 0; i < hw; ++i) dst[i] += gv;
          }
        }
      }
    });
  }
  return out;
}

Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) {
    throw std::invalid_argument("cross_entropy_loss: logits must be rank 2, got " +
                                logits.shape_str());
  }
  const int n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != n) {
    throw std::invalid_argument("cross_entropy_loss: batch size " +
                                std::to_string(n) + " vs " +
                                std::to_string(labels.size()) + " labels");
  }
  for (int i = 0; i < n; ++i) {
    if (labels[static_cast<size_t>(i)] < 0 || labels[static_cast<size_t>(i)] >= k) {
      throw std::out_of_range("cross_entropy_loss: label " +
                              std::to_string(labels[static_cast<size_t>(i)]) +
                              " outside [0," + std::to_string(k) + ")");
    }
  }

  // softmax probabilities, stabilized by per-row max subtraction
  std::vector<float> probs(static_cast<size_t>(n) * k);
  float loss_acc = 0.0f;
  for (int i = 0; i < n; ++i) {
    const float* row = logits.data() + static_cast<int64_t>(i) * k;
    float mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    float denom = 0.0f;
    for (int j = 0; j < k; ++j) {
      float e = std::exp(row[j] - mx);
      probs[static_cast<size_t>(i) * k + j] = e;
      denom += e;
    }
    for (int j = 0; j < k; ++j) probs[static_cast<size_t>(i) * k + j] /= denom;
    float lse = std::log(denom) + mx;
    loss_acc += lse - row[labels[static_cast<size_t>(i)]];
  }
  Tensor out = Tensor::zeros({1});
  out.data()[0] = loss_acc / static_cast<float>(n);

  if (should_record({&logits})) {
    Tensor logits_saved = logits;
    std::vector<int> labels_saved = labels;
    Tape::active()->record(
        out, [logits_saved, labels_saved, probs = std::move(probs), n,
              k](const float* g, GradSink& sink) {
          if (float* gl = sink.grad_ptr(logits_saved)) {
            const float gn = g[0] / static_cast<float>(n);
            for (int i = 0; i < n; ++i) {
              for (int j = 0; j < k; ++j) {
                float p = probs[static_cast<size_t>(i) * k + j];
                float y = (labels_saved[static_cast<size_t>(i)] == j) ? 1.0f : 0.0f;
                gl[static_cast<int64_t>(i) * k + j] += gn * (p - y);
              }
            }
          }
        });
  }
  return out;
}

}  // namespace adaqat
