#include <algorithm>
#include <cmath>

#include "sml/activation.hpp"
#include "sml/data.hpp"
#include "sml/errors.hpp"

namespace sml::data {

namespace {

struct Interaction {
  std::vector<std::size_t> fields;
  std::vector<double> weights;  // k*k for pairs (M row-major), k for triples
};

std::vector<std::vector<std::size_t>> sample_groups(std::size_t fields, std::size_t order, std::size_t count,
                                                    Rng& rng) {
  std::vector<std::vector<std::size_t>> all;
  if (order == 2) {
    for (std::size_t a = 0; a < fields; ++a)
      for (std::size_t b = a + 1; b < fields; ++b) all.push_back({a, b});
  } else {
    for (std::size_t a = 0; a < fields; ++a)
      for (std::size_t b = a + 1; b < fields; ++b)
        for (std::size_t c = b + 1; c < fields; ++c) all.push_back({a, b, c});
  }
  count = std::min(count, all.size());
  for (std::size_t i = 0; i < count; ++i) std::swap(all[i], all[i + rng.uniform_below(all.size() - i)]);
  all.resize(count);
  return all;
}

}  // namespace

void SyntheticSpec::validate() const {
  require(fields >= 1 || continuous_count >= 1, "synthetic: need at least one field or continuous feature");
  require(vocab_size >= 1, "synthetic: vocab_size must be >= 1");
  require(latent_dim >= 1, "synthetic: latent_dim must be >= 1");
  require(interaction_order >= 1 && interaction_order <= 3, "synthetic: interaction_order must be 1, 2 or 3");
  require(noise >= 0.0, "synthetic: noise must be >= 0");
  require(zipf_exponent >= 0.0, "synthetic: zipf_exponent must be >= 0");
  require(samples >= 1, "synthetic: samples must be >= 1");
}

SyntheticData synthesize(const SyntheticSpec& spec) {
  spec.validate();
  const Rng root(spec.seed);
  const std::size_t k = spec.latent_dim;
  const std::size_t fields = spec.fields;

  // Ground truth: latent vectors and linear directions per field.
  std::vector<Matrix> latent;
  std::vector<std::vector<double>> linear(fields, std::vector<double>(k));
  for (std::size_t f = 0; f < fields; ++f) {
    Rng r = root.split("latent").split(f);
    latent.push_back(gaussian_matrix(r, spec.vocab_size, k, 1.0 / std::sqrt(static_cast<double>(k))));
    for (double& u : linear[f]) u = r.gaussian();
  }
  std::vector<double> beta(spec.continuous_count);
  {
    Rng r = root.split("continuous_weights");
    for (double& b : beta) b = r.gaussian();
  }

  std::vector<Interaction> interactions;
  {
    Rng r = root.split("interactions");
    for (std::size_t order = 2; order <= spec.interaction_order; ++order) {
      for (auto& group : sample_groups(fields, order, spec.interaction_pairs, r)) {
        Interaction it{group, std::vector<double>(order == 2 ? k * k : k)};
        for (double& w : it.weights) w = r.gaussian();
        interactions.push_back(std::move(it));
      }
    }
  }

  // Zipf CDF shared by all fields.
  std::vector<double> cdf(spec.vocab_size);
  double total = 0.0;
  for (std::size_t c = 0; c < spec.vocab_size; ++c) {
    total += std::pow(static_cast<double>(c + 1), -spec.zipf_exponent);
    cdf[c] = total;
  }
  for (double& v : cdf) v /= total;

  SyntheticData out;
  EncodedDataset& d = out.data;
  d.fields = fields;
  d.continuous_count = spec.continuous_count;
  d.vocab_sizes.assign(fields, spec.vocab_size);
  d.categorical.resize(spec.samples * fields);
  d.continuous.resize(spec.samples * spec.continuous_count);
  d.labels.resize(spec.samples);
  out.bayes_scores.resize(spec.samples);

  const double linear_norm = fields > 0 ? spec.linear_scale / std::sqrt(static_cast<double>(fields)) : 0.0;
  const double inter_norm =
      interactions.empty() ? 0.0 : spec.interaction_scale / std::sqrt(static_cast<double>(interactions.size()));
  const double cont_norm = spec.continuous_count > 0
                               ? spec.continuous_scale / std::sqrt(static_cast<double>(spec.continuous_count))
                               : 0.0;

  Rng draws = root.split("draws");
  Rng labels = root.split("labels");
  for (std::size_t n = 0; n < spec.samples; ++n) {
    std::uint32_t* row = d.categorical.data() + n * fields;
    for (std::size_t f = 0; f < fields; ++f) {
      const double u = draws.uniform();
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      row[f] = static_cast<std::uint32_t>(std::min<std::size_t>(it - cdf.begin(), spec.vocab_size - 1));
    }
    double score = spec.bias;
    double lin = 0.0;
    for (std::size_t f = 0; f < fields; ++f) {
      auto e = latent[f].row(row[f]);
      for (std::size_t j = 0; j < k; ++j) lin += linear[f][j] * e[j];
    }
    score += linear_norm * lin;
    double inter = 0.0;
    for (const auto& it : interactions) {
      if (it.fields.size() == 2) {
        auto a = latent[it.fields[0]].row(row[it.fields[0]]);
        auto b = latent[it.fields[1]].row(row[it.fields[1]]);
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = 0; j < k; ++j) inter += a[i] * it.weights[i * k + j] * b[j];
      } else {
        auto a = latent[it.fields[0]].row(row[it.fields[0]]);
        auto b = latent[it.fields[1]].row(row[it.fields[1]]);
        auto c = latent[it.fields[2]].row(row[it.fields[2]]);
        for (std::size_t i = 0; i < k; ++i) inter += it.weights[i] * a[i] * b[i] * c[i] * static_cast<double>(k);
      }
    }
    score += inter_norm * inter;
    for (std::size_t c = 0; c < spec.continuous_count; ++c) {
      const double z = draws.gaussian();
      d.continuous[n * spec.continuous_count + c] = z;
      score += cont_norm * beta[c] * z;
    }
    out.bayes_scores[n] = score;
    if (spec.deterministic_labels) {
      d.labels[n] = score > 0.0 ? 1 : 0;
    } else {
      const double noisy = score + spec.noise * labels.gaussian();
      d.labels[n] = labels.uniform() < sigmoid(noisy) ? 1 : 0;
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
  j = nlohmann::json{{"fields", s.fields},
                     {"vocab_size", s.vocab_size},
                     {"continuous_count", s.continuous_count},
                     {"latent_dim", s.latent_dim},
                     {"interaction_order", s.interaction_order},
                     {"interaction_pairs", s.interaction_pairs},
                     {"linear_scale", s.linear_scale},
                     {"interaction_scale", s.interaction_scale},
                     {"continuous_scale", s.continuous_scale},
                     {"bias", s.bias},
                     {"noise", s.noise},
                     {"zipf_exponent", s.zipf_exponent},
                     {"samples", s.samples},
                     {"seed", s.seed},
                     {"deterministic_labels", s.deterministic_labels}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& s) {
  require(j.is_object(), "synthetic spec must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "fields") s.fields = value.get<std::size_t>();
      else if (key == "vocab_size") s.vocab_size = value.get<std::size_t>();
      else if (key == "continuous_count") s.continuous_count = value.get<std::size_t>();
      else if (key == "latent_dim") s.latent_dim = value.get<std::size_t>();
      else if (key == "interaction_order") s.interaction_order = value.get<std::size_t>();
      else if (key == "interaction_pairs") s.interaction_pairs = value.get<std::size_t>();
      else if (key == "linear_scale") s.linear_scale = value.get<double>();
      else if (key == "interaction_scale") s.interaction_scale = value.get<double>();
      else if (key == "continuous_scale") s.continuous_scale = value.get<double>();
      else if (key == "bias") s.bias = value.get<double>();
      else if (key == "noise") s.noise = value.get<double>();
      else if (key == "zipf_exponent") s.zipf_exponent = value.get<double>();
      else if (key == "samples") s.samples = value.get<std::size_t>();
      else if (key == "seed") s.seed = value.get<std::uint64_t>();
      else if (key == "deterministic_labels") s.deterministic_labels = value.get<bool>();
      else throw ContractViolation("synthetic spec: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ContractViolation("synthetic spec: field '" + key + "': " + e.what());
    }
  }
}

}  // namespace sml::data
