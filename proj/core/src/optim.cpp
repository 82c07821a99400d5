#include "mtd/optim.hpp"

#include <cmath>

namespace mtd {

void ParameterSet::add(std::string name, Tensor value) {
  if (index_.count(name)) throw Error("parameter '" + name + "' registered twice");
  index_.emplace(name, values_.size());
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParameterSet::at(const std::string& name) const { return values_[index_of(name)]; }
Tensor& ParameterSet::at(const std::string& name) { return values_[index_of(name)]; }

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

void accumulate(Gradients& dst, const Gradients& src) {
  for (const auto& [name, g] : src) {
    auto it = dst.find(name);
    if (it == dst.end()) {
      dst.emplace(name, g);
      continue;
    }
    if (it->second.shape() != g.shape())
      throw ShapeError("accumulate: gradient '" + name + "' shape " + to_string(it->second.shape()) + " vs " + to_string(g.shape()));
    auto d = it->second.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
  }
}

AdamState AdamState::init(const ParameterSet& params, AdamConfig config) {
  AdamState s;
  s.config = config;
  s.learning_rate = config.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.first_moment.emplace_back(params.value(i).shape(), 0.0);
    s.second_moment.emplace_back(params.value(i).shape(), 0.0);
  }
  return s;
}

void adam_step(ParameterSet& params, const Gradients& grads, AdamState& state) {
  if (state.first_moment.size() != params.size()) throw Error("adam_step: optimizer state does not match parameter set");
  std::string missing;
  for (const auto& name : params.names()) {
    if (!grads.count(name)) missing += (missing.empty() ? "" : ", ") + name;
  }
  if (!missing.empty()) throw Error("adam_step: missing gradient for parameter(s): " + missing);

  ++state.step;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = params.value(p);
    const Tensor& g = grads.at(params.name(p));
    if (g.shape() != w.shape())
      throw ShapeError("adam_step: gradient for '" + params.name(p) + "' has shape " + to_string(g.shape()) +
                       ", parameter has " + to_string(w.shape()));
    Tensor& m = state.first_moment[p];
    Tensor& v = state.second_moment[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

double lr_schedule(int epoch, double previous_rate) {
  if (epoch < 1) throw Error("lr_schedule: epoch must be >= 1, got " + std::to_string(epoch));
  return previous_rate / (1.0 + 0.9 * static_cast<double>(epoch));
}

}  // namespace mtd
