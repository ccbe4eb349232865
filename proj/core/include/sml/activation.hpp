#pragma once

#include <span>
#include <string>
#include <string_view>

namespace sml {

enum class ActivationKind { Identity, Relu, LeakyRelu, Tanh, Sigmoid };

/// A pointwise activation. `alpha` is only read for LeakyRelu.
///
/// Derivative convention at the kink: relu'(0) = leaky_relu'(0) = 1 (the
/// positive-side slope). The same convention decides "active" in the
/// dead-neuron diagnostics.
struct Activation {
  ActivationKind kind = ActivationKind::Identity;
  double alpha = 0.01;

  static Activation identity() { return {ActivationKind::Identity}; }
  static Activation relu() { return {ActivationKind::Relu}; }
  static Activation leaky_relu(double alpha) { return {ActivationKind::LeakyRelu, alpha}; }
  static Activation tanh() { return {ActivationKind::Tanh}; }
  static Activation sigmoid() { return {ActivationKind::Sigmoid}; }

  friend bool operator==(const Activation&, const Activation&) = default;
};

struct ActivationValue {
  double value;
  double derivative;
};

ActivationValue evaluate(Activation act, double x) noexcept;
double apply(Activation act, double x) noexcept;
double derivative(Activation act, double x) noexcept;
// Elementwise forms: xs <- act(xs), and grad <- grad * act'(z).
void apply_inplace(Activation act, std::span<double> xs) noexcept;
void scale_by_derivative(Activation act, std::span<const double> z, std::span<double> grad) noexcept;

// Variance gain used for initialization: 2 for rectifiers, 1 otherwise.
double init_gain(Activation act) noexcept;

double sigmoid(double x) noexcept;

std::string to_string(ActivationKind kind);
// Accepts "identity", "relu", "leaky_relu", "tanh", "sigmoid". Throws ContractViolation.
ActivationKind parse_activation_kind(std::string_view name);

}  // namespace sml
