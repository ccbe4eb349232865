#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sml/activation.hpp"
#include "sml/matrix.hpp"
#include "sml/rng.hpp"

namespace sml::network {

enum class ScaleMode { None, Learned, Meta };

/// Skip-path transform: contrib = sum_k W_k * act(scale_k * x_k).
///
/// scale = 1 (None), a learned vector v (Learned), or the per-sample scalar
/// s(x) = leaky_relu(w_scale . stop_gradient(x)) (Meta). The ablation grid:
///   plain DNN           enabled = false
///   vanilla             (None, identity)
///   relu/sigmoid/tanh   (None, act)
///   weight_tanh         (Learned, tanh)
///   meta_<act>          (Meta, act); meta_tanh is the full model.
struct SkipVariant {
  ScaleMode scale_mode = ScaleMode::None;
  ActivationKind act = ActivationKind::Identity;
  bool enabled = false;

  static SkipVariant plain_dnn() { return {}; }
  static SkipVariant vanilla() { return {ScaleMode::None, ActivationKind::Identity, true}; }
  static SkipVariant activation(ActivationKind a) { return {ScaleMode::None, a, true}; }
  static SkipVariant weight_tanh() { return {ScaleMode::Learned, ActivationKind::Tanh, true}; }
  static SkipVariant meta(ActivationKind a) { return {ScaleMode::Meta, a, true}; }
  static SkipVariant meta_tanh() { return meta(ActivationKind::Tanh); }

  std::string name() const;
  // Inverse of name(): "dnn", "vanilla", "relu", "sigmoid", "tanh", "weight_tanh",
  // "meta_vanilla", "meta_relu", "meta_sigmoid", "meta_tanh".
  static SkipVariant parse(std::string_view name);
  // All ten rows of the ablation grid, in table order.
  static std::vector<SkipVariant> ablation_grid();

  friend bool operator==(const SkipVariant&, const SkipVariant&) = default;
};

struct ModelConfig {
  std::size_t embedding_dim = 8;
  std::vector<std::size_t> vocab_sizes;  // one per categorical field
  std::size_t continuous_count = 0;
  std::vector<std::size_t> tower_widths{64, 32, 16};
  Activation hidden_act = Activation::relu();
  SkipVariant skip = SkipVariant::meta_tanh();
  bool include_input_skip = true;
  // Affine head on the last tower layer; off gives the strict sum-of-paths logit.
  bool include_tower_head = true;
  double leaky_alpha = 0.01;
  double embedding_init_std = 0.05;
  std::uint64_t seed = 0;

  std::size_t field_count() const noexcept { return vocab_sizes.size(); }
  std::size_t input_width() const noexcept {
    return embedding_dim * vocab_sizes.size() + continuous_count;
  }
  std::size_t depth() const noexcept { return tower_widths.size(); }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct DenseLayer {
  Matrix weight;  // fan_in x fan_out
  Matrix bias;    // 1 x fan_out
};

/// Only the fields the variant uses are non-empty.
struct SkipPathParams {
  Matrix weight;      // 1 x width, W
  Matrix scale;       // 1 x width, v (Learned)
  Matrix meta_weight; // width x 1, w_scale (Meta)
  double alpha = 0.01;
};

struct ModelParams {
  std::vector<Matrix> embeddings;  // vocab_f x embedding_dim
  std::vector<DenseLayer> tower;
  DenseLayer head;                 // width_L x 1 and 1 x 1; weight empty when the head is off
  std::optional<SkipPathParams> input_skip;
  std::vector<SkipPathParams> layer_skips;  // one per tower layer when skip is enabled
};

/// Stable, ordered view of every active parameter matrix with a dotted name.
/// Gradients use the same ModelParams layout, so the orders match.
std::vector<std::pair<std::string, Matrix*>> named_parameters(ModelParams& params);
std::vector<std::pair<std::string, const Matrix*>> named_parameters(const ModelParams& params);
ModelParams zeros_like(const ModelParams& params);
std::size_t parameter_count(const ModelParams& params);

/// Initialization: tower N(0, gain / fan_in) with gain 2 for rectifiers and 1
/// otherwise, zero biases; head likewise with gain 1; skip W ~ N(0, 1 / width);
/// v = 1; w_scale ~ N(0, 1 / width); embeddings N(0, embedding_init_std^2).
/// Each group draws from its own sub-stream of Rng(config.seed), so the tower
/// of a plain DNN and of any skip variant with the same seed are identical.
ModelParams initialize(const ModelConfig& config);

struct SkipCache {
  Matrix scaled;           // scale (.) x, n x width
  Matrix activated;        // act(scaled), n x width
  std::vector<double> meta_pre;  // w_scale . x per sample (Meta)
  std::vector<double> meta_scale; // s(x) per sample (Meta)
  std::vector<double> contribution;  // per sample
};

struct ForwardCache {
  std::uint64_t version = 0;
  std::size_t batch = 0;
  std::vector<std::uint32_t> indices;  // n x fields, empty for dense input
  std::vector<Matrix> activations;     // [0] = x0, [i] = output of tower layer i
  std::vector<Matrix> pre_activations; // [i-1] = pre-activation of tower layer i
  std::optional<SkipCache> input_skip;
  std::vector<SkipCache> layer_skips;
  std::vector<double> head_contribution;  // per sample, zeros when the head is off
  std::vector<double> logits;
};

struct Gradients {
  ModelParams params;
  Matrix d_x0;  // n x input_width
};

/// Per-sample value of one skip path; `cache` is filled when non-null.
std::vector<double> skip_path_forward(const Matrix& x, const SkipPathParams& p, SkipVariant variant,
                                      SkipCache* cache = nullptr);

/// Backward through one skip path. Accumulates into d_x and the path gradients.
/// With ScaleMode::Meta no gradient reaches d_x through w_scale . x.
void skip_path_backward(const Matrix& x, const SkipPathParams& p, SkipVariant variant,
                        const SkipCache& cache, std::span<const double> d_contrib,
                        SkipPathParams& grad, Matrix& d_x);

/// s = leaky_relu(w_scale . x) per sample.
std::vector<double> meta_scale(const Matrix& x, const Matrix& w_scale, double alpha);

/// x0 = [E_1[i_1], ..., E_F[i_F], continuous]; indices are n x F row-major.
Matrix embed_lookup(const ModelConfig& config, const ModelParams& params,
                    std::span<const std::uint32_t> indices, const Matrix& continuous);

/// The SML model. Mutable parameter access bumps a version counter; a
/// ForwardCache remembers the version it was produced with and backward()
/// rejects stale caches.
class Model {
 public:
  explicit Model(ModelConfig config);
  Model(ModelConfig config, ModelParams params);

  const ModelConfig& config() const noexcept { return config_; }
  const ModelParams& params() const noexcept { return params_; }
  ModelParams& mutable_params() noexcept {
    ++version_;
    return params_;
  }
  std::uint64_t version() const noexcept { return version_; }

  // Categorical + continuous input through the embedding layer.
  ForwardCache forward(std::span<const std::uint32_t> indices, const Matrix& continuous) const;
  // Dense input x0 (n x input_width); used by diagnostics with synthetic inputs.
  ForwardCache forward_dense(const Matrix& x0) const;

  Gradients backward(const ForwardCache& cache, std::span<const double> d_logit) const;

 private:
  ForwardCache run(Matrix x0) const;

  ModelConfig config_;
  ModelParams params_;
  std::uint64_t version_ = 0;
};

void to_json(nlohmann::json& j, const SkipVariant& v);
void from_json(const nlohmann::json& j, SkipVariant& v);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

nlohmann::json params_to_json(const ModelParams& params);
// Shapes are taken from `config`; throws ContractViolation on mismatch.
ModelParams params_from_json(const nlohmann::json& j, const ModelConfig& config);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace sml::network
