#pragma once

#include <map>
#include <string>
#include <vector>

#include "mtd/tensor.hpp"

namespace mtd {

/// Ordered, named collection of learnable tensors.
class ParameterSet {
 public:
  void add(std::string name, Tensor value);

  std::size_t size() const { return values_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& value(std::size_t i) { return values_[i]; }
  const Tensor& value(std::size_t i) const { return values_[i]; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const;

  std::size_t scalar_count() const;

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::map<std::string, std::size_t> index_;
};

using Gradients = std::map<std::string, Tensor>;

/// Adds `src` into `dst` elementwise, inserting missing entries.
void accumulate(Gradients& dst, const Gradients& src);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 0.001;
};

struct AdamState {
  AdamConfig config;
  double learning_rate = 0.001;  ///< current eta_e
  long step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  static AdamState init(const ParameterSet& params, AdamConfig config = {});
};

/// One bias-corrected Adam update at `state.learning_rate`. Throws if a
/// parameter has no gradient or a gradient has the wrong shape.
void adam_step(ParameterSet& params, const Gradients& grads, AdamState& state);

/// eta_e = eta_{e-1} / (1 + 0.9 e), applied once per completed epoch e >= 1.
double lr_schedule(int epoch, double previous_rate);

}  // namespace mtd
