#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "advisor/error.hpp"

namespace advisor {

using StateId = std::size_t;
using ActionId = std::size_t;

/// Compressed (state, action) index space. Action `a` of state `s` lives at
/// flat index `begin(s) + a`; every table over state-action pairs shares one
/// layout so that policies, Q-tables and Δ-tables can be combined without
/// re-checking shapes entry by entry.
class ActionLayout {
 public:
  explicit ActionLayout(std::vector<std::size_t> offsets) : offsets_(std::move(offsets)) {
    if (offsets_.empty() || offsets_.front() != 0) throw config_error("action layout must start at 0");
    for (std::size_t s = 0; s + 1 < offsets_.size(); ++s) {
      if (offsets_[s + 1] <= offsets_[s]) throw config_error("every state needs at least one action");
    }
  }

  std::size_t num_states() const { return offsets_.size() - 1; }
  std::size_t num_pairs() const { return offsets_.back(); }
  std::size_t num_actions(StateId s) const { return offsets_[s + 1] - offsets_[s]; }
  std::size_t begin(StateId s) const { return offsets_[s]; }
  std::size_t index(StateId s, ActionId a) const {
    assert(a < num_actions(s));
    return offsets_[s] + a;
  }
  const std::vector<std::size_t>& offsets() const { return offsets_; }

  bool operator==(const ActionLayout& other) const = default;

 private:
  std::vector<std::size_t> offsets_;
};

using LayoutPtr = std::shared_ptr<const ActionLayout>;

/// Dense table over (state, action) pairs. The tag distinguishes tables with
/// different meaning (Q-values, Δ-values, action probabilities) at compile time.
template <class Tag>
class ActionTable {
 public:
  ActionTable() = default;
  explicit ActionTable(LayoutPtr layout, double fill = 0.0)
      : layout_(std::move(layout)), data_(layout_->num_pairs(), fill) {}
  ActionTable(LayoutPtr layout, std::vector<double> data) : layout_(std::move(layout)), data_(std::move(data)) {
    if (data_.size() != layout_->num_pairs()) throw config_error("table size does not match its layout");
  }

  double operator()(StateId s, ActionId a) const { return data_[layout_->index(s, a)]; }
  double& operator()(StateId s, ActionId a) { return data_[layout_->index(s, a)]; }

  std::span<const double> row(StateId s) const {
    return {data_.data() + layout_->begin(s), layout_->num_actions(s)};
  }
  std::span<double> row(StateId s) { return {data_.data() + layout_->begin(s), layout_->num_actions(s)}; }

  std::size_t num_states() const { return layout_ ? layout_->num_states() : 0; }
  std::size_t num_actions(StateId s) const { return layout_->num_actions(s); }
  const LayoutPtr& layout() const { return layout_; }
  const std::vector<double>& values() const { return data_; }
  std::vector<double>& values() { return data_; }

  bool same_shape(const ActionLayout& other) const { return layout_ && *layout_ == other; }

  bool operator==(const ActionTable& other) const { return data_ == other.data_ && same_shape(*other.layout_); }

 private:
  LayoutPtr layout_;
  std::vector<double> data_;
};

struct QTag;
struct DeltaTag;
struct ProbabilityTag;

using QTable = ActionTable<QTag>;
using DeltaTable = ActionTable<DeltaTag>;
/// π(a|s) for every legal action. Illegal actions do not exist in the layout,
/// so "zero mass on illegal actions" holds structurally.
using StochasticPolicy = ActionTable<ProbabilityTag>;

/// Per-state scalar table (V, occupancy, ...).
class ValueTable {
 public:
  ValueTable() = default;
  explicit ValueTable(std::size_t num_states, double fill = 0.0) : data_(num_states, fill) {}
  explicit ValueTable(std::vector<double> data) : data_(std::move(data)) {}

  double operator[](StateId s) const { return data_[s]; }
  double& operator[](StateId s) { return data_[s]; }
  std::size_t size() const { return data_.size(); }
  const std::vector<double>& values() const { return data_; }
  std::vector<double>& values() { return data_; }

  bool operator==(const ValueTable&) const = default;

 private:
  std::vector<double> data_;
};

/// φ(s): probability of overriding the human at s.
class GatingFunction {
 public:
  GatingFunction() = default;
  explicit GatingFunction(std::size_t num_states, double fill = 0.0) : phi_(num_states, fill) {}
  explicit GatingFunction(std::vector<double> phi) : phi_(std::move(phi)) {}

  double operator[](StateId s) const { return phi_[s]; }
  double& operator[](StateId s) { return phi_[s]; }
  std::size_t size() const { return phi_.size(); }
  const std::vector<double>& values() const { return phi_; }

  bool operator==(const GatingFunction&) const = default;

 private:
  std::vector<double> phi_;
};

/// Lowest-index argmax of a row.
inline ActionId argmax(std::span<const double> row) {
  return static_cast<ActionId>(std::max_element(row.begin(), row.end()) - row.begin());
}

inline double row_max(std::span<const double> row) { return *std::max_element(row.begin(), row.end()); }

/// Deterministic policy putting all mass on `choice[s]`.
inline StochasticPolicy deterministic_policy(const LayoutPtr& layout, const std::vector<ActionId>& choice) {
  StochasticPolicy pi(layout, 0.0);
  for (StateId s = 0; s < layout->num_states(); ++s) pi(s, choice.at(s)) = 1.0;
  return pi;
}

/// Greedy (lowest-index tie-break) deterministic policy of any action table.
template <class Tag>
StochasticPolicy greedy_policy(const ActionTable<Tag>& table) {
  std::vector<ActionId> choice(table.num_states());
  for (StateId s = 0; s < table.num_states(); ++s) choice[s] = argmax(table.row(s));
  return deterministic_policy(table.layout(), choice);
}

}  // namespace advisor
