#include "gsae/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace gsae {

MannWhitneyResult mann_whitney_rbc(std::span<const double> present,
                                   std::span<const double> absent) {
  const std::size_t n1 = present.size();
  const std::size_t n2 = absent.size();
  if (n1 == 0 || n2 == 0) throw ValidationError("both groups must be non-empty");

  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(n1 + n2);
  for (double v : present) {
    if (!std::isfinite(v)) throw ValidationError("non-finite value in present group");
    pooled.emplace_back(v, 1);
  }
  for (double v : absent) {
    if (!std::isfinite(v)) throw ValidationError("non-finite value in absent group");
    pooled.emplace_back(v, 0);
  }
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // Midranks; U1 = R1 - n1(n1+1)/2 equals win counting with half ties.
  const std::size_t n = pooled.size();
  double rank_sum_present = 0.0;
  double tie_term = 0.0;  // sum over tie groups of t^3 - t
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    const double tied = static_cast<double>(j - i);
    const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) {
      if (pooled[t].second == 1) rank_sum_present += mid_rank;
    }
    tie_term += tied * tied * tied - tied;
    i = j;
  }

  const double dn1 = static_cast<double>(n1);
  const double dn2 = static_cast<double>(n2);
  const double dn = static_cast<double>(n);

  MannWhitneyResult result;
  result.u = rank_sum_present - dn1 * (dn1 + 1.0) / 2.0;
  result.rbc = 2.0 * result.u / (dn1 * dn2) - 1.0;

  const double mean_u = dn1 * dn2 / 2.0;
  const double variance =
      dn1 * dn2 / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (variance <= 0.0) {
    result.p_value = 1.0;  // every value tied
    return result;
  }
  const double z = std::max(0.0, std::abs(result.u - mean_u) - 0.5) / std::sqrt(variance);
  result.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return result;
}

nlohmann::json DetectionReport::to_json() const {
  nlohmann::json concepts_json = nlohmann::json::array();
  for (const ConceptDetection& c : concepts) {
    concepts_json.push_back({{"concept", c.concept_name},
                             {"n_present", c.n_present},
                             {"n_absent", c.n_absent},
                             {"U", c.u},
                             {"p_value", c.p_value},
                             {"rbc", c.rbc},
                             {"threshold", threshold},
                             {"accuracy", c.accuracy}});
  }
  return nlohmann::json{{"threshold", threshold}, {"concepts", concepts_json}};
}

DetectionReport detect_concepts(const GsaeModel& model, const ActivationDataset& dataset,
                                double threshold, int threads) {
  model.validate();
  dataset.validate();
  if (model.n_conditioned < 1) {
    throw ConfigError("detection requires a conditioned model (n_conditioned >= 1)");
  }
  if (dataset.dim() != model.input_dim()) {
    throw ValidationError("dataset dimension does not match model");
  }
  if (dataset.n_concepts() != model.n_conditioned) {
    throw ValidationError("dataset has " + std::to_string(dataset.n_concepts()) +
                          " concepts but the model conditions " +
                          std::to_string(model.n_conditioned));
  }

  const LatentBatch latents = encode(model, dataset.activations.cast<double>(), threads);
  const Eigen::Index rows = dataset.n_rows();
  const Eigen::Index c1 = model.n_conditioned;

  DetectionReport report;
  report.threshold = threshold;
  report.conditioned = latents.values.leftCols(c1);
  report.decisions.resize(rows, c1);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index j = 0; j < c1; ++j) {
      report.decisions(r, j) = report.conditioned(r, j) >= threshold ? 1 : 0;
    }
  }

  for (Eigen::Index j = 0; j < c1; ++j) {
    const std::vector<std::uint8_t> y = binarize_labels(dataset.labels, j);
    std::vector<double> present, absent;
    std::int64_t correct = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double f = report.conditioned(r, j);
      (y[static_cast<std::size_t>(r)] ? present : absent).push_back(f);
      if (report.decisions(r, j) == y[static_cast<std::size_t>(r)]) ++correct;
    }

    ConceptDetection det;
    det.concept_name = dataset.concept_names[static_cast<std::size_t>(j)];
    det.n_present = static_cast<std::int64_t>(present.size());
    det.n_absent = static_cast<std::int64_t>(absent.size());
    det.accuracy = rows == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(rows);
    if (!present.empty() && !absent.empty()) {
      const MannWhitneyResult mw = mann_whitney_rbc(present, absent);
      det.u = mw.u;
      det.p_value = mw.p_value;
      det.rbc = mw.rbc;
    } else {
      det.u = std::numeric_limits<double>::quiet_NaN();
      det.p_value = std::numeric_limits<double>::quiet_NaN();
      det.rbc = std::numeric_limits<double>::quiet_NaN();
    }
    report.concepts.push_back(std::move(det));
  }
  return report;
}

}  // namespace gsae
