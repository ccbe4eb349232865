#include "sml/network.hpp"

#include <algorithm>
#include <cmath>

#include "sml/errors.hpp"

namespace sml::network {

namespace {

std::string act_suffix(ActivationKind a) {
  return a == ActivationKind::Identity ? "vanilla" : to_string(a);
}

ActivationKind act_from_suffix(std::string_view s) {
  if (s == "vanilla") return ActivationKind::Identity;
  return parse_activation_kind(s);
}

void require_skip_params(const SkipPathParams& p, SkipVariant v, std::size_t width) {
  require(p.weight.rows() == 1 && p.weight.cols() == width,
          "skip path: W must be 1 x " + std::to_string(width));
  switch (v.scale_mode) {
    case ScaleMode::None:
      break;
    case ScaleMode::Learned:
      require(p.scale.rows() == 1 && p.scale.cols() == width,
              "skip path: learned scale v must be 1 x " + std::to_string(width));
      break;
    case ScaleMode::Meta:
      require(p.meta_weight.rows() == width && p.meta_weight.cols() == 1,
              "skip path: meta weight must be " + std::to_string(width) + " x 1");
      break;
  }
}

SkipPathParams init_skip(std::size_t width, SkipVariant v, double alpha, Rng rng) {
  SkipPathParams p;
  p.alpha = alpha;
  const double std = std::sqrt(1.0 / static_cast<double>(width));
  p.weight = gaussian_matrix(rng, 1, width, std);
  if (v.scale_mode == ScaleMode::Learned) p.scale = Matrix(1, width, 1.0);
  if (v.scale_mode == ScaleMode::Meta) p.meta_weight = gaussian_matrix(rng, width, 1, std);
  return p;
}

SkipPathParams zero_skip_like(const SkipPathParams& p) {
  SkipPathParams z;
  z.alpha = p.alpha;
  z.weight = Matrix(p.weight.rows(), p.weight.cols());
  z.scale = Matrix(p.scale.rows(), p.scale.cols());
  z.meta_weight = Matrix(p.meta_weight.rows(), p.meta_weight.cols());
  return z;
}

template <typename Params, typename Ptr>
std::vector<std::pair<std::string, Ptr>> collect(Params& params) {
  std::vector<std::pair<std::string, Ptr>> out;
  auto add = [&](std::string name, auto& m) {
    if (!m.empty()) out.emplace_back(std::move(name), &m);
  };
  for (std::size_t f = 0; f < params.embeddings.size(); ++f)
    add("embedding." + std::to_string(f), params.embeddings[f]);
  for (std::size_t i = 0; i < params.tower.size(); ++i) {
    add("tower." + std::to_string(i) + ".weight", params.tower[i].weight);
    add("tower." + std::to_string(i) + ".bias", params.tower[i].bias);
  }
  add("head.weight", params.head.weight);
  add("head.bias", params.head.bias);
  auto add_skip = [&](const std::string& prefix, auto& s) {
    add(prefix + ".weight", s.weight);
    add(prefix + ".scale", s.scale);
    add(prefix + ".meta_weight", s.meta_weight);
  };
  if (params.input_skip) add_skip("skip.input", *params.input_skip);
  for (std::size_t i = 0; i < params.layer_skips.size(); ++i)
    add_skip("skip." + std::to_string(i), params.layer_skips[i]);
  return out;
}

void add_row_bias(Matrix& z, const Matrix& bias) {
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    for (std::size_t c = 0; c < z.cols(); ++c) row[c] += bias(0, c);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// SkipVariant

std::string SkipVariant::name() const {
  if (!enabled) return "dnn";
  switch (scale_mode) {
    case ScaleMode::None: return act_suffix(act);
    case ScaleMode::Learned: return "weight_" + to_string(act);
    case ScaleMode::Meta: return "meta_" + act_suffix(act);
  }
  return "dnn";
}

SkipVariant SkipVariant::parse(std::string_view name) {
  if (name == "dnn") return plain_dnn();
  if (name.starts_with("meta_")) return meta(act_from_suffix(name.substr(5)));
  if (name.starts_with("weight_")) {
    return {ScaleMode::Learned, parse_activation_kind(name.substr(7)), true};
  }
  try {
    return activation(act_from_suffix(name));
  } catch (const ContractViolation&) {
    throw ContractViolation("unknown skip variant '" + std::string(name) + "'");
  }
}

std::vector<SkipVariant> SkipVariant::ablation_grid() {
  return {plain_dnn(),
          vanilla(),
          activation(ActivationKind::Relu),
          activation(ActivationKind::Sigmoid),
          activation(ActivationKind::Tanh),
          weight_tanh(),
          meta(ActivationKind::Identity),
          meta(ActivationKind::Relu),
          meta(ActivationKind::Sigmoid),
          meta(ActivationKind::Tanh)};
}

void ModelConfig::validate() const {
  require(!tower_widths.empty(), "model: tower_widths must be non-empty");
  for (std::size_t w : tower_widths) require(w >= 1, "model: every tower width must be >= 1");
  for (std::size_t v : vocab_sizes) require(v >= 1, "model: every vocab size must be >= 1");
  require(input_width() >= 1, "model: input width must be >= 1");
  require(!vocab_sizes.empty() ? embedding_dim >= 1 : true, "model: embedding_dim must be >= 1");
  require(skip.enabled || include_tower_head, "model: a plain DNN needs the tower head");
  require(leaky_alpha >= 0.0, "model: leaky_alpha must be >= 0");
}

// ---------------------------------------------------------------------------
// Parameters

std::vector<std::pair<std::string, Matrix*>> named_parameters(ModelParams& params) {
  return collect<ModelParams, Matrix*>(params);
}

std::vector<std::pair<std::string, const Matrix*>> named_parameters(const ModelParams& params) {
  return collect<const ModelParams, const Matrix*>(params);
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams z;
  for (const auto& e : params.embeddings) z.embeddings.emplace_back(e.rows(), e.cols());
  for (const auto& l : params.tower) {
    z.tower.push_back({Matrix(l.weight.rows(), l.weight.cols()), Matrix(l.bias.rows(), l.bias.cols())});
  }
  z.head = {Matrix(params.head.weight.rows(), params.head.weight.cols()),
            Matrix(params.head.bias.rows(), params.head.bias.cols())};
  if (params.input_skip) z.input_skip = zero_skip_like(*params.input_skip);
  for (const auto& s : params.layer_skips) z.layer_skips.push_back(zero_skip_like(s));
  return z;
}

std::size_t parameter_count(const ModelParams& params) {
  std::size_t n = 0;
  for (const auto& [name, m] : named_parameters(params)) n += m->size();
  return n;
}

ModelParams initialize(const ModelConfig& config) {
  config.validate();
  const Rng root(config.seed);
  ModelParams p;

  const Rng emb_rng = root.split("embedding");
  for (std::size_t f = 0; f < config.vocab_sizes.size(); ++f) {
    Rng r = emb_rng.split(f);
    p.embeddings.push_back(
        gaussian_matrix(r, config.vocab_sizes[f], config.embedding_dim, config.embedding_init_std));
  }

  const Rng tower_rng = root.split("tower");
  const double gain = init_gain(config.hidden_act);
  std::size_t fan_in = config.input_width();
  for (std::size_t i = 0; i < config.depth(); ++i) {
    Rng r = tower_rng.split(i);
    const std::size_t fan_out = config.tower_widths[i];
    p.tower.push_back({gaussian_matrix(r, fan_in, fan_out, std::sqrt(gain / static_cast<double>(fan_in))),
                       Matrix(1, fan_out)});
    fan_in = fan_out;
  }

  if (config.include_tower_head) {
    Rng r = root.split("head");
    p.head = {gaussian_matrix(r, fan_in, 1, std::sqrt(1.0 / static_cast<double>(fan_in))),
              Matrix(1, 1)};
  }

  if (config.skip.enabled) {
    const Rng skip_rng = root.split("skip");
    if (config.include_input_skip) {
      p.input_skip = init_skip(config.input_width(), config.skip, config.leaky_alpha, skip_rng.split(0));
    }
    for (std::size_t i = 0; i < config.depth(); ++i) {
      p.layer_skips.push_back(
          init_skip(config.tower_widths[i], config.skip, config.leaky_alpha, skip_rng.split(i + 1)));
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Skip paths

std::vector<double> meta_scale(const Matrix& x, const Matrix& w_scale, double alpha) {
  require(w_scale.rows() == x.cols() && w_scale.cols() == 1,
          "meta_scale: w_scale must map layer width to 1");
  const Activation leaky = Activation::leaky_relu(alpha);
  std::vector<double> s(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    double u = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) u += w_scale(k, 0) * row[k];
    s[r] = apply(leaky, u);
  }
  return s;
}

std::vector<double> skip_path_forward(const Matrix& x, const SkipPathParams& p, SkipVariant variant,
                                      SkipCache* cache) {
  require(variant.enabled, "skip_path_forward: variant is disabled");
  const std::size_t n = x.rows(), w = x.cols();
  require_skip_params(p, variant, w);
  const Activation act{variant.act, p.alpha};
  const Activation leaky = Activation::leaky_relu(p.alpha);

  SkipCache local;
  SkipCache& c = cache ? *cache : local;
  c.scaled = Matrix(n, w);
  c.activated = Matrix(n, w);
  c.contribution.assign(n, 0.0);
  c.meta_pre.clear();
  c.meta_scale.clear();
  if (variant.scale_mode == ScaleMode::Meta) {
    c.meta_pre.resize(n);
    c.meta_scale.resize(n);
  }

  for (std::size_t r = 0; r < n; ++r) {
    auto xr = x.row(r);
    auto zr = c.scaled.row(r);
    switch (variant.scale_mode) {
      case ScaleMode::None:
        std::copy(xr.begin(), xr.end(), zr.begin());
        break;
      case ScaleMode::Learned:
        for (std::size_t k = 0; k < w; ++k) zr[k] = p.scale(0, k) * xr[k];
        break;
      case ScaleMode::Meta: {
        double u = 0.0;
        for (std::size_t k = 0; k < w; ++k) u += p.meta_weight(k, 0) * xr[k];
        const double s = apply(leaky, u);
        c.meta_pre[r] = u;
        c.meta_scale[r] = s;
        for (std::size_t k = 0; k < w; ++k) zr[k] = s * xr[k];
        break;
      }
    }
    auto gr = c.activated.row(r);
    double contrib = 0.0;
    for (std::size_t k = 0; k < w; ++k) {
      gr[k] = apply(act, zr[k]);
      contrib += p.weight(0, k) * gr[k];
    }
    c.contribution[r] = contrib;
  }
  return c.contribution;
}

void skip_path_backward(const Matrix& x, const SkipPathParams& p, SkipVariant variant,
                        const SkipCache& cache, std::span<const double> d_contrib,
                        SkipPathParams& grad, Matrix& d_x) {
  const std::size_t n = x.rows(), w = x.cols();
  require(d_contrib.size() == n, "skip_path_backward: d_contrib length != batch");
  require(d_x.rows() == n && d_x.cols() == w, "skip_path_backward: d_x shape mismatch");
  const Activation act{variant.act, p.alpha};
  const Activation leaky = Activation::leaky_relu(p.alpha);

  for (std::size_t r = 0; r < n; ++r) {
    const double dc = d_contrib[r];
    if (dc == 0.0) continue;
    auto xr = x.row(r);
    auto zr = cache.scaled.row(r);
    auto gr = cache.activated.row(r);
    auto dxr = d_x.row(r);
    double ds = 0.0;
    for (std::size_t k = 0; k < w; ++k) {
      grad.weight(0, k) += dc * gr[k];
      const double dz = dc * p.weight(0, k) * derivative(act, zr[k]);
      switch (variant.scale_mode) {
        case ScaleMode::None:
          dxr[k] += dz;
          break;
        case ScaleMode::Learned:
          grad.scale(0, k) += dz * xr[k];
          dxr[k] += dz * p.scale(0, k);
          break;
        case ScaleMode::Meta:
          dxr[k] += dz * cache.meta_scale[r];
          ds += dz * xr[k];
          break;
      }
    }
    if (variant.scale_mode == ScaleMode::Meta) {
      // s reads a stop-gradient copy of x: only w_scale receives this term.
      const double du = ds * derivative(leaky, cache.meta_pre[r]);
      for (std::size_t k = 0; k < w; ++k) grad.meta_weight(k, 0) += du * xr[k];
    }
  }
}

// ---------------------------------------------------------------------------
// Embedding + model

Matrix embed_lookup(const ModelConfig& config, const ModelParams& params,
                    std::span<const std::uint32_t> indices, const Matrix& continuous) {
  const std::size_t fields = config.field_count();
  const std::size_t dim = config.embedding_dim;
  require(fields > 0 || indices.empty(), "embed_lookup: indices given for a model with no fields");
  const std::size_t n = fields > 0 ? indices.size() / fields : continuous.rows();
  require(fields == 0 || indices.size() == n * fields, "embed_lookup: indices not n x fields");
  require(continuous.cols() == config.continuous_count && (continuous.rows() == n || config.continuous_count == 0),
          "embed_lookup: continuous block must be n x continuous_count");
  Matrix x0(n, config.input_width());
  for (std::size_t r = 0; r < n; ++r) {
    auto out = x0.row(r);
    for (std::size_t f = 0; f < fields; ++f) {
      const std::uint32_t idx = indices[r * fields + f];
      if (idx >= config.vocab_sizes[f]) {
        throw ContractViolation("embed_lookup: index " + std::to_string(idx) + " out of range for field " +
                                std::to_string(f) + " (vocab " + std::to_string(config.vocab_sizes[f]) + ")");
      }
      auto src = params.embeddings[f].row(idx);
      std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(f * dim));
    }
    for (std::size_t c = 0; c < config.continuous_count; ++c) out[fields * dim + c] = continuous(r, c);
  }
  return x0;
}

Model::Model(ModelConfig config) : config_(std::move(config)), params_(initialize(config_)) {}

Model::Model(ModelConfig config, ModelParams params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  require(params_.tower.size() == config_.depth(), "Model: parameter depth does not match config");
}

ForwardCache Model::forward(std::span<const std::uint32_t> indices, const Matrix& continuous) const {
  ForwardCache cache = run(embed_lookup(config_, params_, indices, continuous));
  cache.indices.assign(indices.begin(), indices.end());
  return cache;
}

ForwardCache Model::forward_dense(const Matrix& x0) const {
  require(x0.cols() == config_.input_width(),
          "forward: x0 width " + std::to_string(x0.cols()) + " != input width " +
              std::to_string(config_.input_width()));
  return run(x0);
}

ForwardCache Model::run(Matrix x0) const {
  ForwardCache cache;
  cache.version = version_;
  cache.batch = x0.rows();
  const std::size_t n = x0.rows();
  const Activation act = config_.hidden_act;
  cache.activations.reserve(config_.depth() + 1);
  cache.activations.push_back(std::move(x0));

  for (const DenseLayer& layer : params_.tower) {
    Matrix z = gemm(cache.activations.back(), layer.weight);
    add_row_bias(z, layer.bias);
    Matrix a = z;
    apply_inplace(act, a.data());
    cache.pre_activations.push_back(std::move(z));
    cache.activations.push_back(std::move(a));
  }

  cache.logits.assign(n, 0.0);
  cache.head_contribution.assign(n, 0.0);
  if (config_.include_tower_head) {
    const Matrix h = gemm(cache.activations.back(), params_.head.weight);
    for (std::size_t r = 0; r < n; ++r) cache.head_contribution[r] = h(r, 0) + params_.head.bias(0, 0);
  }
  for (std::size_t r = 0; r < n; ++r) cache.logits[r] = cache.head_contribution[r];

  if (config_.skip.enabled) {
    if (params_.input_skip) {
      cache.input_skip.emplace();
      skip_path_forward(cache.activations[0], *params_.input_skip, config_.skip, &*cache.input_skip);
      for (std::size_t r = 0; r < n; ++r) cache.logits[r] += cache.input_skip->contribution[r];
    }
    cache.layer_skips.resize(params_.layer_skips.size());
    for (std::size_t i = 0; i < params_.layer_skips.size(); ++i) {
      skip_path_forward(cache.activations[i + 1], params_.layer_skips[i], config_.skip, &cache.layer_skips[i]);
      for (std::size_t r = 0; r < n; ++r) cache.logits[r] += cache.layer_skips[i].contribution[r];
    }
  }
  return cache;
}

Gradients Model::backward(const ForwardCache& cache, std::span<const double> d_logit) const {
  if (cache.version != version_) {
    throw ContractViolation("backward: stale forward cache (version " + std::to_string(cache.version) +
                            ", model at " + std::to_string(version_) + ")");
  }
  require(d_logit.size() == cache.batch, "backward: d_logit length != batch size");
  const std::size_t n = cache.batch;
  const std::size_t depth = config_.depth();
  Gradients g{zeros_like(params_), Matrix()};

  Matrix d_x(n, cache.activations.back().cols());
  if (config_.include_tower_head) {
    for (std::size_t r = 0; r < n; ++r) {
      g.params.head.bias(0, 0) += d_logit[r];
      auto xr = cache.activations.back().row(r);
      auto dr = d_x.row(r);
      for (std::size_t k = 0; k < xr.size(); ++k) {
        g.params.head.weight(k, 0) += d_logit[r] * xr[k];
        dr[k] = d_logit[r] * params_.head.weight(k, 0);
      }
    }
  }

  const Activation act = config_.hidden_act;
  for (std::size_t i = depth; i >= 1; --i) {
    if (config_.skip.enabled) {
      skip_path_backward(cache.activations[i], params_.layer_skips[i - 1], config_.skip,
                         cache.layer_skips[i - 1], d_logit, g.params.layer_skips[i - 1], d_x);
    }
    Matrix dz = d_x;
    scale_by_derivative(act, cache.pre_activations[i - 1].data(), dz.data());
    g.params.tower[i - 1].weight = gemm_tn(cache.activations[i - 1], dz);
    g.params.tower[i - 1].bias = column_sums(dz);
    d_x = gemm_nt(dz, params_.tower[i - 1].weight);
  }
  if (config_.skip.enabled && params_.input_skip) {
    skip_path_backward(cache.activations[0], *params_.input_skip, config_.skip, *cache.input_skip,
                       d_logit, *g.params.input_skip, d_x);
  }

  if (!cache.indices.empty()) {
    const std::size_t fields = config_.field_count();
    const std::size_t dim = config_.embedding_dim;
    for (std::size_t r = 0; r < n; ++r) {
      auto dr = d_x.row(r);
      for (std::size_t f = 0; f < fields; ++f) {
        auto dst = g.params.embeddings[f].row(cache.indices[r * fields + f]);
        for (std::size_t k = 0; k < dim; ++k) dst[k] += dr[f * dim + k];
      }
    }
  }
  g.d_x0 = std::move(d_x);
  return g;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const SkipVariant& v) { j = v.name(); }
void from_json(const nlohmann::json& j, SkipVariant& v) { v = SkipVariant::parse(j.get<std::string>()); }

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"embedding_dim", c.embedding_dim},
                     {"vocab_sizes", c.vocab_sizes},
                     {"continuous_count", c.continuous_count},
                     {"tower_widths", c.tower_widths},
                     {"hidden_act", to_string(c.hidden_act.kind)},
                     {"hidden_alpha", c.hidden_act.alpha},
                     {"skip", c.skip},
                     {"include_input_skip", c.include_input_skip},
                     {"include_tower_head", c.include_tower_head},
                     {"leaky_alpha", c.leaky_alpha},
                     {"embedding_init_std", c.embedding_init_std},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  require(j.is_object(), "model config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "embedding_dim") c.embedding_dim = value.get<std::size_t>();
    else if (key == "vocab_sizes") c.vocab_sizes = value.get<std::vector<std::size_t>>();
    else if (key == "continuous_count") c.continuous_count = value.get<std::size_t>();
    else if (key == "tower_widths") c.tower_widths = value.get<std::vector<std::size_t>>();
    else if (key == "hidden_act") c.hidden_act.kind = parse_activation_kind(value.get<std::string>());
    else if (key == "hidden_alpha") c.hidden_act.alpha = value.get<double>();
    else if (key == "skip") c.skip = value.get<SkipVariant>();
    else if (key == "include_input_skip") c.include_input_skip = value.get<bool>();
    else if (key == "include_tower_head") c.include_tower_head = value.get<bool>();
    else if (key == "leaky_alpha") c.leaky_alpha = value.get<double>();
    else if (key == "embedding_init_std") c.embedding_init_std = value.get<double>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else throw ContractViolation("model: unknown key '" + key + "'");
  }
}

nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()},
          {"data", std::vector<double>(m.data().begin(), m.data().end())}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

nlohmann::json params_to_json(const ModelParams& params) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, m] : named_parameters(params)) j[name] = matrix_to_json(*m);
  return j;
}

ModelParams params_from_json(const nlohmann::json& j, const ModelConfig& config) {
  ModelConfig shape_config = config;
  ModelParams p = initialize(shape_config);
  auto named = named_parameters(p);
  require(j.size() == named.size(), "params: expected " + std::to_string(named.size()) +
                                        " matrices, found " + std::to_string(j.size()));
  for (auto& [name, m] : named) {
    require(j.contains(name), "params: missing '" + name + "'");
    Matrix loaded = matrix_from_json(j.at(name));
    require(loaded.same_shape(*m), "params: shape mismatch for '" + name + "'");
    *m = std::move(loaded);
  }
  return p;
}

}  // namespace sml::network
