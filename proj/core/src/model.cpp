#include "adaqat/model.hpp"

#include <cstdio>
#include <stdexcept>

#include "adaqat/ops.hpp"
#include "adaqat/quantize.hpp"

namespace adaqat {

namespace {

constexpr uint64_t kInitSalt = 0x6d6f64656cULL;

LayerCost conv_cost(const Conv2d& c, bool pinned) {
  LayerCost l;
  l.kind = LayerCost::Kind::kConv;
  l.filters = static_cast<int64_t>(c.out_ch) * c.in_ch;
  l.w_f = c.ksize;
  l.h_f = c.ksize;
  l.s_f = c.stride;
  l.pinned = pinned;
  l.param_count = c.weight_count();
  return l;
}

LayerCost dense_cost(const Linear& d, bool pinned) {
  LayerCost l;
  l.kind = LayerCost::Kind::kDense;
  l.filters = d.weight_count();
  l.pinned = pinned;
  l.param_count = d.weight_count();
  return l;
}

}  // namespace

int Model::layer_bits(int global_bits, bool pinned) {
  if (global_bits == kPassThroughBits) return kPassThroughBits;
  return pinned ? 8 : global_bits;
}

Model Model::build(const std::string& arch, int in_channels, int in_h,
                   int in_w, int classes, uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("need at least two classes");
  if (in_channels < 1 || in_h < 1 || in_w < 1) {
    throw std::invalid_argument("input dimensions must be positive");
  }
  Model m;
  m.arch_ = arch;
  m.classes_ = classes;
  m.in_ch_ = in_channels;
  m.in_h_ = in_h;
  m.in_w_ = in_w;
  Rng rng = Rng::stream(seed, kInitSalt);

  if (arch == "mlp") {
    const int d = in_channels * in_h * in_w;
    m.fc1_.emplace(d, 128, rng);
    m.mlp_act_.emplace();
    m.fc2_.emplace(128, classes, rng);
  } else if (arch == "cnn-small") {
    m.convs_.emplace_back(in_channels, 16, 3, 2, 1, false, rng);
    m.conv_bns_.emplace_back(16);
    m.conv_acts_.emplace_back();
    m.convs_.emplace_back(16, 24, 3, 2, 1, false, rng);
    m.conv_bns_.emplace_back(24);
    m.conv_acts_.emplace_back();
    m.convs_.emplace_back(24, 32, 3, 2, 1, false, rng);
    m.conv_bns_.emplace_back(32);
    m.conv_acts_.emplace_back();
    m.convs_.emplace_back(32, classes, 1, 1, 0, true, rng);
  } else if (arch == "resnet-thin") {
    m.stem_.emplace(in_channels, 8, 3, 1, 1, false, rng);
    m.stem_bn_.emplace(8);
    m.stem_act_.emplace();
    const int chans[3] = {8, 16, 32};
    const int strides[3] = {1, 2, 2};
    int in = 8;
    for (int s = 0; s < 3; ++s) {
      ResBlock b;
      b.conv1.emplace(in, chans[s], 3, strides[s], 1, false, rng);
      b.bn1.emplace(chans[s]);
      b.act1.emplace();
      b.conv2.emplace(chans[s], chans[s], 3, 1, 1, false, rng);
      b.bn2.emplace(chans[s]);
      if (strides[s] != 1 || in != chans[s]) {
        b.down.emplace(in, chans[s], 1, strides[s], 0, false, rng);
        b.down_bn.emplace(chans[s]);
      }
      b.act_out.emplace();
      m.blocks_.push_back(std::move(b));
      in = chans[s];
    }
    m.head_.emplace(32, classes, rng);
  } else {
    throw std::invalid_argument("unknown architecture: " + arch);
  }

  if (m.searchable_layer_count() == 0) {
    std::fprintf(stderr,
                 "warning: architecture '%s' has no searchable layers; "
                 "every weight layer is pinned to fixed precision\n",
                 arch.c_str());
  }
  return m;
}

void Model::check_input(const Tensor& x) const {
  if (arch_ == "mlp") {
    if (x.rank() != 2 && x.rank() != 4) {
      throw std::invalid_argument("mlp expects [N,D] or [N,C,H,W], got " +
                                  x.shape_str());
    }
    return;
  }
  if (x.rank() != 4 || x.dim(1) != in_ch_) {
    throw std::invalid_argument(arch_ + " expects [N," +
                                std::to_string(in_ch_) + ",H,W], got " +
                                x.shape_str());
  }
}

Tensor Model::forward_impl(const Tensor& x, Mode mode, int k_w, int k_a,
                           bool quantized) {
  check_input(x);

  if (arch_ == "mlp") {
    Tensor h = x;
    if (h.rank() == 4) {
      h = reshape(h, {h.dim(0), h.dim(1) * h.dim(2) * h.dim(3)});
    }
    if (h.dim(1) != fc1_->in) {
      throw std::invalid_argument("mlp expects " + std::to_string(fc1_->in) +
                                  " features, got " + h.shape_str());
    }
    h = quantized ? fc1_->forward(h, layer_bits(k_w, true))
                  : fc1_->forward_raw(h);
    h = quantized ? mlp_act_->forward(h, layer_bits(k_a, true))
                  : mlp_act_->forward_raw(h);
    return quantized ? fc2_->forward(h, layer_bits(k_w, true))
                     : fc2_->forward_raw(h);
  }

  if (arch_ == "cnn-small") {
    Tensor h = x;
    for (size_t i = 0; i < 3; ++i) {
      const bool pinned = (i == 0);
      h = quantized ? convs_[i].forward(h, layer_bits(k_w, pinned))
                    : convs_[i].forward_raw(h);
      h = conv_bns_[i].forward(h, mode);
      h = quantized ? conv_acts_[i].forward(h, layer_bits(k_a, pinned))
                    : conv_acts_[i].forward_raw(h);
    }
    h = quantized ? convs_[3].forward(h, layer_bits(k_w, true))
                  : convs_[3].forward_raw(h);
    return global_avg_pool(h);
  }

  // resnet-thin
  Tensor h = quantized ? stem_->forward(x, layer_bits(k_w, true))
                       : stem_->forward_raw(x);
  h = stem_bn_->forward(h, mode);
  h = quantized ? stem_act_->forward(h, layer_bits(k_a, true))
                : stem_act_->forward_raw(h);
  const int bw = layer_bits(k_w, false);
  const int ba = layer_bits(k_a, false);
  for (ResBlock& b : blocks_) {
    Tensor r = quantized ? b.conv1->forward(h, bw) : b.conv1->forward_raw(h);
    r = b.bn1->forward(r, mode);
    r = quantized ? b.act1->forward(r, ba) : b.act1->forward_raw(r);
    r = quantized ? b.conv2->forward(r, bw) : b.conv2->forward_raw(r);
    r = b.bn2->forward(r, mode);
    Tensor sc = h;
    if (b.down) {
      sc = quantized ? b.down->forward(h, bw) : b.down->forward_raw(h);
      sc = b.down_bn->forward(sc, mode);
    }
    h = quantized ? b.act_out->forward(add(r, sc), ba)
                  : b.act_out->forward_raw(add(r, sc));
  }
  h = global_avg_pool(h);
  return quantized ? head_->forward(h, layer_bits(k_w, true))
                   : head_->forward_raw(h);
}

Tensor Model::forward(const Tensor& x, Mode mode, int k_w, int k_a) {
  return forward_impl(x, mode, k_w, k_a, true);
}

Tensor Model::forward_raw(const Tensor& x, Mode mode) {
  return forward_impl(x, mode, kPassThroughBits, kPassThroughBits, false);
}

std::vector<ParamInfo> Model::params() {
  std::vector<ParamInfo> out;
  auto add_t = [&out](const std::string& name, const Tensor& t,
                      bool is_alpha = false) {
    if (t.defined()) out.push_back({name, t, is_alpha});
  };
  if (arch_ == "mlp") {
    add_t("fc1.weight", fc1_->weight);
    add_t("fc1.bias", fc1_->bias);
    add_t("act1.alpha", mlp_act_->alpha, true);
    add_t("fc2.weight", fc2_->weight);
    add_t("fc2.bias", fc2_->bias);
  } else if (arch_ == "cnn-small") {
    for (size_t i = 0; i < convs_.size(); ++i) {
      const std::string p = "conv" + std::to_string(i + 1);
      add_t(p + ".weight", convs_[i].weight);
      add_t(p + ".bias", convs_[i].bias);
      if (i < conv_bns_.size()) {
        add_t("bn" + std::to_string(i + 1) + ".gamma", conv_bns_[i].gamma);
        add_t("bn" + std::to_string(i + 1) + ".beta", conv_bns_[i].beta);
        add_t("act" + std::to_string(i + 1) + ".alpha", conv_acts_[i].alpha,
              true);
      }
    }
  } else {
    add_t("stem.weight", stem_->weight);
    add_t("stem_bn.gamma", stem_bn_->gamma);
    add_t("stem_bn.beta", stem_bn_->beta);
    add_t("stem_act.alpha", stem_act_->alpha, true);
    for (size_t i = 0; i < blocks_.size(); ++i) {
      const std::string p = "block" + std::to_string(i + 1) + ".";
      ResBlock& b = blocks_[i];
      add_t(p + "conv1.weight", b.conv1->weight);
      add_t(p + "bn1.gamma", b.bn1->gamma);
      add_t(p + "bn1.beta", b.bn1->beta);
      add_t(p + "act1.alpha", b.act1->alpha, true);
      add_t(p + "conv2.weight", b.conv2->weight);
      add_t(p + "bn2.gamma", b.bn2->gamma);
      add_t(p + "bn2.beta", b.bn2->beta);
      if (b.down) {
        add_t(p + "down.weight", b.down->weight);
        add_t(p + "down_bn.gamma", b.down_bn->gamma);
        add_t(p + "down_bn.beta", b.down_bn->beta);
      }
      add_t(p + "act_out.alpha", b.act_out->alpha, true);
    }
    add_t("head.weight", head_->weight);
    add_t("head.bias", head_->bias);
  }
  return out;
}

std::vector<BufferInfo> Model::buffers() {
  std::vector<BufferInfo> out;
  auto add_bn = [&out](const std::string& name, BatchNorm2d& bn) {
    out.push_back({name + ".running_mean", &bn.running_mean});
    out.push_back({name + ".running_var", &bn.running_var});
  };
  if (arch_ == "cnn-small") {
    for (size_t i = 0; i < conv_bns_.size(); ++i) {
      add_bn("bn" + std::to_string(i + 1), conv_bns_[i]);
    }
  } else if (arch_ == "resnet-thin") {
    add_bn("stem_bn", *stem_bn_);
    for (size_t i = 0; i < blocks_.size(); ++i) {
      const std::string p = "block" + std::to_string(i + 1) + ".";
      add_bn(p + "bn1", *blocks_[i].bn1);
      add_bn(p + "bn2", *blocks_[i].bn2);
      if (blocks_[i].down_bn) add_bn(p + "down_bn", *blocks_[i].down_bn);
    }
  }
  return out;
}

NetworkCost Model::cost_spec() const {
  NetworkCost net;
  if (arch_ == "mlp") {
    net.layers.push_back(dense_cost(*fc1_, true));
    net.layers.push_back(dense_cost(*fc2_, true));
  } else if (arch_ == "cnn-small") {
    for (size_t i = 0; i < convs_.size(); ++i) {
      net.layers.push_back(conv_cost(convs_[i], i == 0 || i == 3));
    }
  } else {
    net.layers.push_back(conv_cost(*stem_, true));
    for (const ResBlock& b : blocks_) {
      net.layers.push_back(conv_cost(*b.conv1, false));
      net.layers.push_back(conv_cost(*b.conv2, false));
      if (b.down) net.layers.push_back(conv_cost(*b.down, false));
    }
    net.layers.push_back(dense_cost(*head_, true));
  }
  return net;
}

int Model::searchable_layer_count() const {
  int count = 0;
  for (const LayerCost& l : cost_spec().layers) {
    if (!l.pinned) ++count;
  }
  return count;
}

}  // namespace adaqat
