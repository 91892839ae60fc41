#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace adaqat {

class Tape;

// Dense row-major float32 tensor. Copies share storage; use clone() for a
// deep copy. A tensor is either a leaf (optionally holding a persistent
// gradient buffer when it is a trainable parameter) or the output of a
// recorded op, in which case `node()` indexes into the tape that produced it.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, float value);
  static Tensor from(std::vector<int> shape, std::vector<float> values);
  // Leaf with a persistent zero-initialized gradient buffer.
  static Tensor param(std::vector<int> shape, std::vector<float> values);

  bool defined() const { return data_ != nullptr; }
  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t size() const;
  bool is_scalar() const { return size() == 1; }

  float* data() { return data_->data(); }
  const float* data() const { return data_->data(); }
  float* grad() { return grad_ ? grad_->data() : nullptr; }
  const float* grad() const { return grad_ ? grad_->data() : nullptr; }
  bool has_grad() const { return grad_ != nullptr; }

  float item() const;  // scalar contents; throws if not scalar
  float at(std::initializer_list<int> idx) const;

  bool requires_grad() const { return requires_grad_; }
  int node() const { return node_; }
  bool tape_attached() const { return node_ >= 0 || requires_grad_; }

  // Same storage, detached from the tape; never receives gradient.
  Tensor detach() const;
  Tensor clone() const;
  void zero_grad();

  std::string shape_str() const;

 private:
  friend class Tape;
  friend class GradSink;

  std::vector<int> shape_;
  std::shared_ptr<std::vector<float>> data_;
  std::shared_ptr<std::vector<float>> grad_;  // persistent, leaves only
  bool requires_grad_ = false;
  int node_ = -1;
};

// Resolves gradient destinations during a backward pass: per-node scratch
// buffers for intermediates, persistent buffers for parameter leaves.
class GradSink {
 public:
  // Buffer to accumulate into for `t`, or nullptr when `t` needs no gradient.
  float* grad_ptr(const Tensor& t);

 private:
  friend class Tape;
  explicit GradSink(std::vector<std::vector<float>>& table) : table_(table) {}
  std::vector<std::vector<float>>& table_;
};

// Reverse-mode tape. Nodes are appended in forward execution order and
// visited exactly once, in reverse, by backward(). Single-threaded.
class Tape {
 public:
  using BackwardFn = std::function<void(const float* out_grad, GradSink& sink)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Appends a node and stamps `out` as its output. Returns the node id.
  int record(Tensor& out, BackwardFn fn);

  // Seeds d(loss)/d(loss) = 1 and walks the tape in reverse, accumulating
  // into parameter gradient buffers. Repeated calls accumulate again.
  void backward(const Tensor& loss);

  void clear();
  size_t num_nodes() const { return nodes_.size(); }

  // The tape ops record onto, if any. Managed by Tape::Scope.
  static Tape* active();

  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

 private:
  struct Node {
    BackwardFn backward;
    int64_t out_size;
  };
  std::vector<Node> nodes_;
};

// Disables recording within its scope (evaluation / probe forwards).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* previous_;
};

int64_t shape_numel(const std::vector<int>& shape);

}  // namespace adaqat
