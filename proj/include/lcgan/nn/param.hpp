#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "lcgan/core/tensor.hpp"

namespace lcgan::nn {

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T>* value = nullptr;
};

/// Gradient buffers keyed by the parameter tensor they belong to. Kept apart
/// from the networks so forward and backward passes never mutate parameters.
template <typename T>
class Gradients {
 public:
  /// Zero-initialized on first access.
  Tensor<T>& slot(const Tensor<T>& param) {
    auto it = map_.find(&param);
    if (it == map_.end()) it = map_.emplace(&param, Tensor<T>(param.shape())).first;
    return it->second;
  }
  const Tensor<T>* find(const Tensor<T>& param) const {
    auto it = map_.find(&param);
    return it == map_.end() ? nullptr : &it->second;
  }
  void clear() { map_.clear(); }
  std::size_t size() const { return map_.size(); }

 private:
  std::unordered_map<const Tensor<T>*, Tensor<T>> map_;
};

/// Saved activations for one forward pass; backward pops in reverse order.
template <typename T>
class Tape {
 public:
  void push(Tensor<T> t) { stack_.push_back(std::move(t)); }
  Tensor<T> pop() {
    if (stack_.empty()) throw Error("tape underflow: backward called without matching forward");
    Tensor<T> t = std::move(stack_.back());
    stack_.pop_back();
    return t;
  }
  std::size_t depth() const { return stack_.size(); }
  bool empty() const { return stack_.empty(); }

 private:
  std::vector<Tensor<T>> stack_;
};

}  // namespace lcgan::nn
