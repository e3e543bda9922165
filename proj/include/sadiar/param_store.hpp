#pragma once

// Named trainable tensors in stable insertion order. Names are
// dot-separated paths ("asr_dec.l0.self.wq", "time.l1.start.q"); prefixes
// select parameter families for freezing and checkpoint diffs.

#include <string>
#include <utility>
#include <vector>

#include "sadiar/tensor.hpp"

namespace sadiar::num {

template <typename T>
class ParamStore {
 public:
  Tensor<T>& add(const std::string& name, Tensor<T> t) {
    if (find(name) != nullptr)
      throw InternalError("params: duplicate name '" + name + "'");
    if (!t.requires_grad)
      throw InternalError("params: '" + name + "' must require grad");
    items_.emplace_back(name, std::move(t));
    return items_.back().second;
  }

  Tensor<T>* find(const std::string& name) {
    for (auto& [n, t] : items_)
      if (n == name) return &t;
    return nullptr;
  }
  const Tensor<T>* find(const std::string& name) const {
    for (const auto& [n, t] : items_)
      if (n == name) return &t;
    return nullptr;
  }

  Tensor<T>& at(const std::string& name) {
    Tensor<T>* t = find(name);
    if (t == nullptr) throw InternalError("params: unknown name '" + name + "'");
    return *t;
  }

  void zero_grad() {
    for (auto& [n, t] : items_) t.zero_grad();
  }

  std::vector<Tensor<T>> tensors() const {
    std::vector<Tensor<T>> out;
    out.reserve(items_.size());
    for (const auto& [n, t] : items_) out.push_back(t);
    return out;
  }

  const std::vector<std::pair<std::string, Tensor<T>>>& items() const {
    return items_;
  }
  std::vector<std::pair<std::string, Tensor<T>>>& items() { return items_; }

  size_t size() const { return items_.size(); }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> items_;
};

}  // namespace sadiar::num
