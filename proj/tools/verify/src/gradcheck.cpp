#include "mtd/verify/gradcheck.hpp"

#include <cmath>

namespace mtd::verify {

namespace {

double evaluate(const LossBuilder& build, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> leaves;
  for (const auto& t : inputs) leaves.push_back(tape.leaf(t, false));
  return build(tape, leaves).value().item();
}

}  // namespace

GradCheck check_gradients(const LossBuilder& build, const std::vector<Tensor>& inputs, double step, double floor) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& t : inputs) leaves.push_back(tape.leaf(t, true));
    tape.backward(build(tape, leaves));
    for (const auto& v : leaves) analytic.push_back(tape.grad(v));
  }
  GradCheck out;
  std::vector<Tensor> probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t e = 0; e < inputs[i].size(); ++e) {
      const double x = inputs[i][e];
      probe[i][e] = x + step;
      const double up = evaluate(build, probe);
      probe[i][e] = x - step;
      const double down = evaluate(build, probe);
      probe[i][e] = x;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[i][e];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
    }
    const double denom = std::max(std::sqrt(a2), std::sqrt(n2));
    const double err = denom < floor ? std::sqrt(diff2) : std::sqrt(diff2) / denom;
    out.relative_error.push_back(err);
    if (err > out.max_error) {
      out.max_error = err;
      out.worst_input = i;
    }
  }
  return out;
}

}  // namespace mtd::verify
