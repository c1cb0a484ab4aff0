#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "advisor/error.hpp"
#include "advisor/tables.hpp"
#include "advisor/trajectory.hpp"

namespace advisor {

enum class Category { low, med, high };

inline const char* to_string(Category c) {
  switch (c) {
    case Category::low: return "Low";
    case Category::med: return "Med";
    case Category::high: return "High";
  }
  return "Med";
}

inline constexpr double kIntegerFeatureTolerance = 1e-9;

/// An interpretable feature. `quantization` is the step of real-valued
/// features; 0 marks an integer-valued feature.
struct ConceptFeature {
  std::string name;
  double quantization = 0.0;

  double tolerance() const { return quantization > 0.0 ? quantization : kIntegerFeatureTolerance; }
};

/// Feature value for the player to move and for the opponent (or, in
/// single-agent environments, a fixed reference point).
struct ConceptValue {
  double player = 0.0;
  double opponent = 0.0;
};

/// Environment-specific feature extractor; `extract` returns one value per
/// entry of `features`.
struct ConceptExtractor {
  std::vector<ConceptFeature> features;
  std::function<std::vector<ConceptValue>(StateId)> extract;
};

inline Category discretize(double player_value, double opponent_value, double tolerance = kIntegerFeatureTolerance) {
  const double diff = player_value - opponent_value;
  if (diff > tolerance) return Category::high;
  if (diff < -tolerance) return Category::low;
  return Category::med;
}

struct ConceptRow {
  std::string concept_name;
  Category category = Category::med;
  double freq_intervention = 0.0;
  double freq_non_intervention = 0.0;
  double delta_signed = 0.0;  // intervention − non-intervention
  double delta_abs = 0.0;

  std::string key() const { return concept_name + "-" + to_string(category); }
};

/// Frequency shift of each (concept, category) between intervention and
/// non-intervention state visits, sorted by |Δ| descending.
struct ConceptReport {
  std::vector<ConceptRow> rows;
  std::size_t intervention_visits = 0;
  std::size_t non_intervention_visits = 0;

  std::vector<ConceptRow> top(std::size_t k) const {
    return {rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(std::min(k, rows.size()))};
  }

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "concept,category,freq_intervention,freq_non_intervention,delta_abs,delta_signed\n";
    for (const auto& r : rows) {
      out << r.concept_name << ',' << to_string(r.category) << ',' << r.freq_intervention << ','
          << r.freq_non_intervention << ',' << r.delta_abs << ',' << r.delta_signed << '\n';
    }
    return out.str();
  }
};

/// Visits are counted with multiplicity. Counts are integers, so the result
/// does not depend on the order of trajectories or of their steps.
inline ConceptReport concept_report(const std::vector<Trajectory>& trajectories, const ConceptExtractor& extractor) {
  const std::size_t nf = extractor.features.size();
  if (nf == 0 || !extractor.extract) throw config_error("concept extractor has no features");
  // counts[feature][category][population], population 0 = intervention
  std::vector<std::array<std::array<std::size_t, 2>, 3>> counts(nf, std::array<std::array<std::size_t, 2>, 3>{});
  std::array<std::size_t, 2> visits{0, 0};
  for (const auto& traj : trajectories) {
    for (const auto& step : traj.steps) {
      const auto values = extractor.extract(step.state);
      if (values.size() != nf) throw config_error("concept extractor returned the wrong number of features");
      const std::size_t pop = step.intervened ? 0 : 1;
      ++visits[pop];
      for (std::size_t f = 0; f < nf; ++f) {
        if (!std::isfinite(values[f].player) || !std::isfinite(values[f].opponent)) {
          throw domain_error("non-finite concept value for " + extractor.features[f].name);
        }
        const auto c = discretize(values[f].player, values[f].opponent, extractor.features[f].tolerance());
        ++counts[f][static_cast<std::size_t>(c)][pop];
      }
    }
  }
  if (visits[0] == 0) {
    throw domain_error("no intervention states in the input; lower the threshold or raise the budget");
  }
  if (visits[1] == 0) throw domain_error("no non-intervention states in the input");

  ConceptReport report;
  report.intervention_visits = visits[0];
  report.non_intervention_visits = visits[1];
  for (std::size_t f = 0; f < nf; ++f) {
    for (std::size_t c = 0; c < 3; ++c) {
      ConceptRow row;
      row.concept_name = extractor.features[f].name;
      row.category = static_cast<Category>(c);
      row.freq_intervention = static_cast<double>(counts[f][c][0]) / static_cast<double>(visits[0]);
      row.freq_non_intervention = static_cast<double>(counts[f][c][1]) / static_cast<double>(visits[1]);
      row.delta_signed = row.freq_intervention - row.freq_non_intervention;
      row.delta_abs = std::abs(row.delta_signed);
      report.rows.push_back(std::move(row));
    }
  }
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const ConceptRow& a, const ConceptRow& b) {
    if (a.delta_abs != b.delta_abs) return a.delta_abs > b.delta_abs;
    return a.key() < b.key();
  });
  return report;
}

}  // namespace advisor
