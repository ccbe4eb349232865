#include <cmath>
#include <numbers>

#include "sml/diagnostics.hpp"
#include "sml/errors.hpp"

namespace sml::diagnostics {

namespace {

double sample_variance(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / (n - 1.0);
}

std::vector<double> row_norms(const Matrix& m) {
  std::vector<double> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (double v : m.row(r)) s += v * v;
    out[r] = std::sqrt(s);
  }
  return out;
}

Matrix dense_input(const network::Model& model, const data::EncodedDataset& batch) {
  std::vector<std::size_t> rows(batch.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return network::embed_lookup(model.config(), model.params(), batch.categorical, batch.continuous_matrix(rows));
}

}  // namespace

VarianceProfile layer_variance_profile(const network::Model& model, const Matrix& x0, std::uint64_t probe_seed) {
  require(x0.rows() >= 2, "layer_variance_profile: need at least 2 samples");
  const auto cache = model.forward_dense(x0);
  VarianceProfile p;
  const auto& cfg = model.config();
  p.source = cfg.skip.enabled ? "skip" : "probe";
  const Rng probes = Rng(probe_seed).split("probe");
  for (std::size_t i = 0; i < cfg.depth(); ++i) {
    const Matrix& h = cache.activations[i + 1];
    LayerVariance lv;
    lv.layer = i;
    if (cfg.skip.enabled) {
      lv.contribution_variance = sample_variance(cache.layer_skips[i].contribution);
    } else {
      Rng r = probes.split(static_cast<std::uint64_t>(i));
      const Matrix w = gaussian_matrix(r, h.cols(), 1, 1.0 / std::sqrt(static_cast<double>(h.cols())));
      const Matrix out = gemm(h, w);
      lv.contribution_variance = sample_variance(out.data());
    }
    lv.activation_norm_variance = sample_variance(row_norms(h));
    p.layers.push_back(lv);
  }
  if (cache.input_skip) p.input_contribution_variance = sample_variance(cache.input_skip->contribution);
  p.logit_variance = sample_variance(cache.logits);
  return p;
}

VarianceProfile layer_variance_profile(const network::Model& model, const data::EncodedDataset& batch,
                                       std::uint64_t probe_seed) {
  require(batch.rows() >= 2, "layer_variance_profile: need at least 2 samples");
  return layer_variance_profile(model, dense_input(model, batch), probe_seed);
}

std::vector<LayerActivationRates> dead_neuron_histogram(const network::Model& model, const Matrix& x0) {
  const auto kind = model.config().hidden_act.kind;
  require(kind == ActivationKind::Relu || kind == ActivationKind::LeakyRelu,
          "dead_neuron_histogram: hidden activation must be relu or leaky_relu");
  require(x0.rows() >= 1, "dead_neuron_histogram: empty batch");
  const auto cache = model.forward_dense(x0);
  std::vector<LayerActivationRates> out;
  const double n = static_cast<double>(x0.rows());
  for (std::size_t i = 0; i < cache.pre_activations.size(); ++i) {
    const Matrix& z = cache.pre_activations[i];
    LayerActivationRates lr;
    lr.layer = i;
    std::vector<std::size_t> active(z.cols(), 0);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      const auto row = z.row(r);
      for (std::size_t c = 0; c < z.cols(); ++c) active[c] += row[c] >= 0.0 ? 1 : 0;
    }
    std::size_t polar = 0;
    for (std::size_t c = 0; c < z.cols(); ++c) {
      const double rate = static_cast<double>(active[c]) / n;
      lr.rates.push_back(rate);
      const auto bin = std::min<std::size_t>(kRateBins - 1, static_cast<std::size_t>(rate * kRateBins));
      ++lr.histogram[bin];
      if (rate < kDeadRate || rate > kSaturatedRate) ++polar;
    }
    lr.bipolarity = static_cast<double>(polar) / static_cast<double>(z.cols());
    out.push_back(std::move(lr));
  }
  return out;
}

std::vector<LayerActivationRates> dead_neuron_histogram(const network::Model& model,
                                                        const data::EncodedDataset& batch) {
  return dead_neuron_histogram(model, dense_input(model, batch));
}

CosineSimilarity mean_pairwise_cosine(const Matrix& rows) {
  require(rows.rows() >= 2, "pairwise_cosine_similarity: need at least 2 samples");
  CosineSimilarity c;
  std::vector<double> sum(rows.cols(), 0.0);
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    const auto row = rows.row(r);
    double norm = 0.0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      ++c.zero_excluded;
      continue;
    }
    ++c.used;
    for (std::size_t k = 0; k < row.size(); ++k) sum[k] += row[k] / norm;
  }
  if (c.used < 2) {
    c.degenerate = true;
    return c;
  }
  double ss = 0.0;
  for (double v : sum) ss += v * v;
  const double n = static_cast<double>(c.used);
  c.mean = (ss - n) / (n * (n - 1.0));
  return c;
}

CosineSimilarity pairwise_cosine_similarity(const network::Model& model, const Matrix& x0, std::size_t layer) {
  require(layer <= model.config().depth(), "pairwise_cosine_similarity: layer " + std::to_string(layer) +
                                               " out of range (depth " + std::to_string(model.config().depth()) + ")");
  const auto cache = model.forward_dense(x0);
  CosineSimilarity c = mean_pairwise_cosine(cache.activations[layer]);
  c.layer = layer;
  return c;
}

std::vector<CosineSimilarity> cosine_profile(const network::Model& model, const Matrix& x0) {
  const auto cache = model.forward_dense(x0);
  std::vector<CosineSimilarity> out;
  for (std::size_t i = 0; i < cache.activations.size(); ++i) {
    CosineSimilarity c = mean_pairwise_cosine(cache.activations[i]);
    c.layer = i;
    out.push_back(c);
  }
  return out;
}

ReluVarianceResult relu_variance_mc(double delta, std::size_t n, Rng& rng) {
  require(n >= 10000, "relu_variance_mc: n must be >= 10^4");
  require(delta >= 0.0 && std::isfinite(delta), "relu_variance_mc: delta must be finite and >= 0");
  const Rng start = rng;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::max(0.0, delta * rng.gaussian());
  const double mean = sum / static_cast<double>(n);
  Rng again = start;
  double m2 = 0.0;
  double m4 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::max(0.0, delta * again.gaussian()) - mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  const double nn = static_cast<double>(n);
  ReluVarianceResult r;
  r.estimate = m2 / (nn - 1.0);
  const double pop_var = m2 / nn;
  r.standard_error = std::sqrt(std::max(0.0, m4 / nn - pop_var * pop_var) / nn);
  r.bound = delta * delta * (1.0 - 2.0 / std::numbers::pi);
  r.exact = delta * delta * (0.5 - 0.5 / std::numbers::pi);
  r.within_bound = r.estimate <= r.bound + 3.0 * r.standard_error;
  return r;
}

}  // namespace sml::diagnostics
