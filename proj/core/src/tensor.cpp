#include "adaqat/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace adaqat {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor extents must be positive");
    n *= d;
  }
  return n;
}

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  int64_t n = shape_numel(shape);
  t.shape_ = std::move(shape);
  t.data_ = std::make_shared<std::vector<float>>(static_cast<size_t>(n), 0.0f);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, float value) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.data_->begin(), t.data_->end(), value);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<float> values) {
  int64_t n = shape_numel(shape);
  if (n != static_cast<int64_t>(values.size())) {
    throw std::invalid_argument("tensor data length " +
                                std::to_string(values.size()) +
                                " does not match shape volume " +
                                std::to_string(n));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::make_shared<std::vector<float>>(std::move(values));
  return t;
}

Tensor Tensor::param(std::vector<int> shape, std::vector<float> values) {
  Tensor t = from(std::move(shape), std::move(values));
  t.requires_grad_ = true;
  t.grad_ = std::make_shared<std::vector<float>>(t.data_->size(), 0.0f);
  return t;
}

int64_t Tensor::size() const {
  return data_ ? static_cast<int64_t>(data_->size()) : 0;
}

float Tensor::item() const {
  if (!is_scalar()) {
    throw std::logic_error("item() requires a scalar tensor, got shape " +
                           shape_str());
  }
  return (*data_)[0];
}

float Tensor::at(std::initializer_list<int> idx) const {
  if (static_cast<int>(idx.size()) != rank()) {
    throw std::invalid_argument("index rank mismatch");
  }
  int64_t flat = 0;
  int i = 0;
  for (int v : idx) {
    if (v < 0 || v >= shape_[static_cast<size_t>(i)]) {
      throw std::out_of_range("tensor index out of range");
    }
    flat = flat * shape_[static_cast<size_t>(i)] + v;
    ++i;
  }
  return (*data_)[static_cast<size_t>(flat)];
}

Tensor Tensor::detach() const {
  Tensor t;
  t.shape_ = shape_;
  t.data_ = data_;
  return t;
}

Tensor Tensor::clone() const {
  Tensor t;
  t.shape_ = shape_;
  if (data_) t.data_ = std::make_shared<std::vector<float>>(*data_);
  return t;
}

void Tensor::zero_grad() {
  if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0f);
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << "x";
    os << shape_[i];
  }
  os << "]";
  return os.str();
}

float* GradSink::grad_ptr(const Tensor& t) {
  if (t.node_ >= 0) {
    auto& slot = table_[static_cast<size_t>(t.node_)];
    if (slot.empty()) slot.assign(static_cast<size_t>(t.size()), 0.0f);
    return slot.data();
  }
  if (t.requires_grad_ && t.grad_) return t.grad_->data();
  return nullptr;
}

int Tape::record(Tensor& out, BackwardFn fn) {
  int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{std::move(fn), out.size()});
  out.node_ = id;
  return id;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.is_scalar()) {
    throw std::logic_error("backward() requires a scalar loss, got shape " +
                           loss.shape_str());
  }
  if (loss.node_ < 0) {
    throw std::logic_error("backward() requires a tape-attached loss");
  }
  // Scratch gradients, one slot per node. Parameter leaves accumulate into
  // their persistent buffers instead, so repeated backward calls add up.
  std::vector<std::vector<float>> table(nodes_.size());
  table[static_cast<size_t>(loss.node_)].assign(1, 1.0f);
  GradSink sink(table);
  for (int i = loss.node_; i >= 0; --i) {
    auto& g = table[static_cast<size_t>(i)];
    if (g.empty()) continue;  // node does not influence the loss
    nodes_[static_cast<size_t>(i)].backward(g.data(), sink);
  }
}

void Tape::clear() { nodes_.clear(); }

Tape* Tape::active() { return g_active_tape; }

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}

Tape::Scope::~Scope() { g_active_tape = previous_; }

NoGradGuard::NoGradGuard() : previous_(g_active_tape) {
  g_active_tape = nullptr;
}

NoGradGuard::~NoGradGuard() { g_active_tape = previous_; }

}  // namespace adaqat
