#include <algorithm>
#include <cmath>
#include <numeric>

#include "sml/diagnostics.hpp"
#include "sml/errors.hpp"

namespace sml::diagnostics {

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  require(scores.size() == labels.size(), "auc: scores and labels differ in length");
  std::size_t positives = 0;
  for (auto y : labels) {
    require(y <= 1, "auc: labels must be 0 or 1");
    positives += y;
  }
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) throw UndefinedMetric("auc: needs at least one positive and one negative label");
  for (double s : scores) require(!std::isnan(s), "auc: NaN score");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of 1-based average ranks of the positives, kept doubled to stay integral.
  std::uint64_t rank_sum_x2 = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t pos_in_group = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) pos_in_group += labels[order[j++]];
    rank_sum_x2 += static_cast<std::uint64_t>(pos_in_group) * (i + 1 + j);
    i = j;
  }
  const double u = static_cast<double>(rank_sum_x2) / 2.0 -
                   static_cast<double>(positives) * static_cast<double>(positives + 1) / 2.0;
  return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

}  // namespace sml::diagnostics
