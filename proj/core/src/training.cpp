#include "sml/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sml/activation.hpp"
#include "sml/diagnostics.hpp"
#include "sml/errors.hpp"

namespace sml::training {

using network::ModelParams;

double logloss(std::span<const double> probabilities, std::span<const std::uint8_t> labels) {
  require(probabilities.size() == labels.size(), "logloss: length mismatch");
  require(!labels.empty(), "logloss: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] <= 1, "logloss: labels must be 0 or 1");
    const double p = std::clamp(probabilities[i], kProbabilityClip, 1.0 - kProbabilityClip);
    total -= labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(labels.size());
}

double logloss_from_logits(std::span<const double> logits, std::span<const std::uint8_t> labels) {
  std::vector<double> p(logits.size());
  std::transform(logits.begin(), logits.end(), p.begin(), [](double z) { return sigmoid(z); });
  return logloss(p, labels);
}

AdamState AdamState::for_params(const ModelParams& params, const AdamConfig& config) {
  AdamState s;
  s.config = config;
  for (const auto& [name, m] : network::named_parameters(params)) {
    s.m.emplace_back(m->rows(), m->cols());
    s.v.emplace_back(m->rows(), m->cols());
  }
  return s;
}

StepStatus adam_step(AdamState& state, std::span<Matrix* const> params, std::span<const Matrix* const> grads) {
  require(params.size() == grads.size() && params.size() == state.m.size(),
          "adam_step: parameter, gradient and moment counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i]->same_shape(*grads[i]) && params[i]->same_shape(state.m[i]),
            "adam_step: shape mismatch at parameter " + std::to_string(i));
    if (!grads[i]->all_finite()) return StepStatus::NonFiniteGradient;
  }
  const AdamConfig& c = state.config;
  const std::uint64_t t = state.t + 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i]->data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p[k] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
  state.t = t;
  return StepStatus::Ok;
}

StepStatus adam_step(AdamState& state, ModelParams& params, const ModelParams& grads) {
  std::vector<Matrix*> p;
  std::vector<const Matrix*> g;
  for (auto& [name, m] : network::named_parameters(params)) p.push_back(m);
  for (const auto& [name, m] : network::named_parameters(grads)) g.push_back(m);
  return adam_step(state, p, g);
}

void TrainConfig::validate() const {
  require(batch_size >= 1, "train: batch_size must be >= 1");
  require(adam.lr > 0.0, "train: lr must be > 0");
  require(adam.beta1 >= 0.0 && adam.beta1 < 1.0, "train: beta1 must be in [0, 1)");
  require(adam.beta2 >= 0.0 && adam.beta2 < 1.0, "train: beta2 must be in [0, 1)");
  require(adam.eps > 0.0, "train: eps must be > 0");
}

TrainState make_train_state(const network::ModelConfig& model_config, const TrainConfig& config) {
  config.validate();
  network::Model model(model_config);
  AdamState adam = AdamState::for_params(model.params(), config.adam);
  return TrainState{std::move(model), std::move(adam), Rng(config.seed).split("shuffle").state()};
}

bool params_finite(const ModelParams& params) {
  for (const auto& [name, m] : network::named_parameters(params))
    if (!m->all_finite()) return false;
  return true;
}

std::vector<double> predict_logits(const network::Model& model, const data::EncodedDataset& data,
                                   std::size_t chunk) {
  std::vector<double> out;
  out.reserve(data.rows());
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < data.rows(); start += chunk) {
    const std::size_t end = std::min(data.rows(), start + chunk);
    rows.resize(end - start);
    std::iota(rows.begin(), rows.end(), start);
    const auto cache = model.forward(data.categorical_rows(rows), data.continuous_matrix(rows));
    out.insert(out.end(), cache.logits.begin(), cache.logits.end());
  }
  return out;
}

namespace {

std::vector<std::size_t> epoch_permutation(const TrainState& state, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = Rng::from_state(state.shuffle).split(static_cast<std::uint64_t>(state.epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_below(i)]);
  return perm;
}

void require_compatible(const network::ModelConfig& mc, const data::EncodedDataset& d, const char* which) {
  require(d.fields == mc.field_count() && d.continuous_count == mc.continuous_count,
          std::string("fit: ") + which + " data does not match the model's input layout");
  for (std::size_t f = 0; f < d.fields; ++f) {
    require(d.vocab_sizes[f] <= mc.vocab_sizes[f], std::string("fit: ") + which + " vocabulary exceeds the model's");
  }
}

}  // namespace

FitResult fit(TrainState& state, const data::EncodedDataset& train, const data::EncodedDataset* validation,
              const TrainConfig& config, const FitOptions& options) {
  config.validate();
  require_compatible(state.model.config(), train, "train");
  if (validation) require_compatible(state.model.config(), *validation, "validation");
  FitResult result;
  const std::size_t n = train.rows();
  if (n == 0 || state.epoch >= config.epochs) return result;
  const std::size_t batches = (n + config.batch_size - 1) / config.batch_size;

  double best_auc = -1.0;
  while (state.epoch < config.epochs) {
    const std::vector<std::size_t> perm = epoch_permutation(state, n);
    while (state.batch_in_epoch < batches) {
      if (options.stop_at_step && state.step >= *options.stop_at_step) return result;
      const std::size_t begin = state.batch_in_epoch * config.batch_size;
      const std::size_t end = std::min(n, begin + config.batch_size);
      const std::span<const std::size_t> rows(perm.data() + begin, end - begin);
      const auto cache = state.model.forward(train.categorical_rows(rows), train.continuous_matrix(rows));
      const std::size_t b = rows.size();

      double loss_sum = 0.0;
      std::vector<double> d_logit(b);
      for (std::size_t i = 0; i < b; ++i) {
        const double z = cache.logits[i];
        const double p = sigmoid(z);
        const std::uint8_t y = train.labels[rows[i]];
        const double pc = std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip);
        loss_sum -= y ? std::log(pc) : std::log(1.0 - pc);
        d_logit[i] = (p - static_cast<double>(y)) / static_cast<double>(b);
      }
      if (config.collapse.check_non_finite && !std::isfinite(loss_sum)) {
        result.collapse = {true, state.step, state.epoch, "non-finite loss"};
        return result;
      }
      const auto grads = state.model.backward(cache, d_logit);
      if (adam_step(state.adam, state.model.mutable_params(), grads.params) == StepStatus::NonFiniteGradient) {
        if (config.collapse.check_non_finite) {
          result.collapse = {true, state.step, state.epoch, "non-finite gradient"};
          return result;
        }
      }
      ++state.step;
      ++state.batch_in_epoch;
      state.epoch_loss_sum += loss_sum;
      state.epoch_samples += b;
      if (config.collapse.check_non_finite && !params_finite(state.model.params())) {
        result.collapse = {true, state.step, state.epoch, "non-finite parameters"};
        return result;
      }
    }

    EpochRecord rec;
    rec.epoch = state.epoch + 1;
    rec.step = state.step;
    rec.train_logloss = state.epoch_loss_sum / static_cast<double>(state.epoch_samples);
    if (validation && validation->rows() > 0) {
      const auto logits = predict_logits(state.model, *validation);
      rec.val_logloss = logloss_from_logits(logits, validation->labels);
      try {
        rec.val_auc = diagnostics::auc(logits, validation->labels);
      } catch (const UndefinedMetric&) {
      }
    }
    state.epoch += 1;
    state.batch_in_epoch = 0;
    state.epoch_loss_sum = 0.0;
    state.epoch_samples = 0;
    result.history.push_back(rec);
    if (rec.val_auc && *rec.val_auc > best_auc) {
      best_auc = *rec.val_auc;
      result.best_epoch = rec.epoch;
    }
    const bool non_finite_metric = (rec.val_logloss && !std::isfinite(*rec.val_logloss)) ||
                                   !std::isfinite(rec.train_logloss);
    if (config.collapse.check_non_finite && non_finite_metric) {
      result.collapse = {true, state.step, state.epoch, "non-finite epoch metric"};
      return result;
    }
    if (rec.val_auc && state.epoch >= config.collapse.min_epochs && *rec.val_auc < config.collapse.auc_floor) {
      result.collapse = {true, state.step, state.epoch, "validation AUC below floor"};
      return result;
    }
  }
  return result;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"batch_size", c.batch_size},
                     {"epochs", c.epochs},
                     {"lr", c.adam.lr},
                     {"beta1", c.adam.beta1},
                     {"beta2", c.adam.beta2},
                     {"eps", c.adam.eps},
                     {"seed", c.seed},
                     {"collapse_check_non_finite", c.collapse.check_non_finite},
                     {"collapse_auc_floor", c.collapse.auc_floor},
                     {"collapse_min_epochs", c.collapse.min_epochs}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  require(j.is_object(), "train config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "batch_size") c.batch_size = value.get<std::size_t>();
    else if (key == "epochs") c.epochs = value.get<std::size_t>();
    else if (key == "lr") c.adam.lr = value.get<double>();
    else if (key == "beta1") c.adam.beta1 = value.get<double>();
    else if (key == "beta2") c.adam.beta2 = value.get<double>();
    else if (key == "eps") c.adam.eps = value.get<double>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "collapse_check_non_finite") c.collapse.check_non_finite = value.get<bool>();
    else if (key == "collapse_auc_floor") c.collapse.auc_floor = value.get<double>();
    else if (key == "collapse_min_epochs") c.collapse.min_epochs = value.get<std::size_t>();
    else throw ContractViolation("train: unknown key '" + key + "'");
  }
}

void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = nlohmann::json{{"epoch", r.epoch}, {"step", r.step}, {"train_logloss", r.train_logloss}};
  j["val_auc"] = r.val_auc ? nlohmann::json(*r.val_auc) : nlohmann::json();
  j["val_logloss"] = r.val_logloss ? nlohmann::json(*r.val_logloss) : nlohmann::json();
}

}  // namespace sml::training
