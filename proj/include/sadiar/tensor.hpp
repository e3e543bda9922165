#pragma once

// Reverse-mode autodiff core: a Tensor owns row-major values plus an
// optional gradient buffer and an optional op record (Node) describing how
// it was produced. The op records hanging off a loss tensor form an acyclic
// graph whose creation order is a topological order by construction; calling
// backward() walks it once in reverse, accumulating into parent gradients.
//
// Gradients accumulate across backward calls; callers zero parameter
// gradients between optimizer steps. Forward-only use with grad recording
// disabled allocates no nodes and is re-entrant across threads (the
// recording flag is thread-local).

#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "sadiar/errors.hpp"

namespace sadiar::num {

using Shape = std::vector<long>;

inline long numel(const Shape& s) {
  long n = 1;
  for (long d : s) {
    if (d <= 0) throw InternalError("tensor: non-positive dimension");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "{";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "}";
  return os.str();
}

template <typename T>
struct Node;

template <typename T>
struct Tensor {
  Shape shape;
  std::shared_ptr<std::vector<T>> data;
  std::shared_ptr<std::vector<T>> grad;  // allocated iff requires_grad
  std::shared_ptr<Node<T>> node;         // op record that produced this value
  bool requires_grad = false;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    Tensor t;
    const long n = numel(shape);
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<T>>(n, T(0));
    t.requires_grad = requires_grad;
    if (requires_grad) t.grad = std::make_shared<std::vector<T>>(n, T(0));
    return t;
  }

  static Tensor from(Shape shape, std::vector<T> values,
                     bool requires_grad = false) {
    if (numel(shape) != static_cast<long>(values.size()))
      throw InternalError("tensor: value count does not match shape " +
                          shape_str(shape));
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<T>>(std::move(values));
    t.requires_grad = requires_grad;
    if (requires_grad)
      t.grad = std::make_shared<std::vector<T>>(t.data->size(), T(0));
    return t;
  }

  bool defined() const { return static_cast<bool>(data); }
  long size() const { return data ? static_cast<long>(data->size()) : 0; }

  // Logical 2-D view: all leading dims collapse into rows, last dim is cols.
  long cols() const {
    if (shape.empty()) return 1;
    return shape.back();
  }
  long rows() const {
    long r = 1;
    for (size_t i = 0; i + 1 < shape.size(); ++i) r *= shape[i];
    return r;
  }

  T* ptr() { return data->data(); }
  const T* ptr() const { return data->data(); }
  T* gptr() { return grad->data(); }
  const T* gptr() const { return grad->data(); }

  T value() const {
    if (size() != 1) throw InternalError("tensor: value() on non-scalar");
    return (*data)[0];
  }

  void zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), T(0));
  }
};

template <typename T>
struct Node {
  const char* kind;                   // op name, for diagnostics
  std::vector<Tensor<T>> parents;     // inputs, in op argument order
  std::function<void()> backward_fn;  // accumulates into parent grads
};

// Thread-local switch: when off, ops compute values but record no nodes.
inline bool& grad_recording() {
  thread_local bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_recording()) { grad_recording() = false; }
  ~NoGradGuard() { grad_recording() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// Scalar-loss reverse pass. Parent gradients accumulate (+=); tensors whose
// value never influenced the loss keep exactly zero gradient.
template <typename T>
void backward(Tensor<T>& loss) {
  if (loss.size() != 1)
    throw InternalError("backward: loss must be scalar, got " +
                        shape_str(loss.shape));
  if (!loss.requires_grad || !loss.node)
    throw InternalError("backward: loss does not depend on any parameter");

  // Iterative DFS post-order: parents land before their consumers, so the
  // reversed order runs each op's backward before its producers'.
  struct Frame {
    Node<T>* n;
    size_t next;
  };
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<Frame> stack;
  stack.push_back({loss.node.get(), 0});
  visited.insert(loss.node.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      Node<T>* p = f.n->parents[f.next++].node.get();
      if (p != nullptr && visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }

  (*loss.grad)[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    (*it)->backward_fn();
}

}  // namespace sadiar::num
