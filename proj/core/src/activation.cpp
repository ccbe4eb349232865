#include "sml/activation.hpp"

#include <cmath>

#include "sml/errors.hpp"

namespace sml {

double sigmoid(double x) noexcept {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

ActivationValue evaluate(Activation act, double x) noexcept {
  switch (act.kind) {
    case ActivationKind::Identity:
      return {x, 1.0};
    case ActivationKind::Relu:
      if (x < 0.0) return {0.0, 0.0};
      return {x, x >= 0.0 ? 1.0 : x};
    case ActivationKind::LeakyRelu:
      if (x < 0.0) return {act.alpha * x, act.alpha};
      return {x, x >= 0.0 ? 1.0 : x};
    case ActivationKind::Tanh: {
      const double t = std::tanh(x);
      return {t, 1.0 - t * t};
    }
    case ActivationKind::Sigmoid: {
      const double s = sigmoid(x);
      return {s, s * (1.0 - s)};
    }
  }
  return {x, 1.0};
}

double apply(Activation act, double x) noexcept { return evaluate(act, x).value; }
double derivative(Activation act, double x) noexcept { return evaluate(act, x).derivative; }

void apply_inplace(Activation act, std::span<double> xs) noexcept {
  switch (act.kind) {
    case ActivationKind::Identity:
      return;
    case ActivationKind::Relu:
      for (double& v : xs) v = v < 0.0 ? 0.0 : v;
      return;
    case ActivationKind::LeakyRelu:
      for (double& v : xs) v = v < 0.0 ? act.alpha * v : v;
      return;
    default:
      for (double& v : xs) v = apply(act, v);
  }
}

void scale_by_derivative(Activation act, std::span<const double> z, std::span<double> grad) noexcept {
  switch (act.kind) {
    case ActivationKind::Identity:
      return;
    case ActivationKind::Relu:
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] *= z[k] < 0.0 ? 0.0 : (z[k] >= 0.0 ? 1.0 : z[k]);
      return;
    case ActivationKind::LeakyRelu:
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] *= z[k] < 0.0 ? act.alpha : (z[k] >= 0.0 ? 1.0 : z[k]);
      return;
    default:
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] *= derivative(act, z[k]);
  }
}

double init_gain(Activation act) noexcept {
  switch (act.kind) {
    case ActivationKind::Relu:
    case ActivationKind::LeakyRelu:
      return 2.0;
    default:
      return 1.0;
  }
}

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Identity: return "identity";
    case ActivationKind::Relu: return "relu";
    case ActivationKind::LeakyRelu: return "leaky_relu";
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::Sigmoid: return "sigmoid";
  }
  return "identity";
}

ActivationKind parse_activation_kind(std::string_view name) {
  if (name == "identity") return ActivationKind::Identity;
  if (name == "relu") return ActivationKind::Relu;
  if (name == "leaky_relu") return ActivationKind::LeakyRelu;
  if (name == "tanh") return ActivationKind::Tanh;
  if (name == "sigmoid") return ActivationKind::Sigmoid;
  throw ContractViolation("unknown activation '" + std::string(name) + "'");
}

}  // namespace sml
