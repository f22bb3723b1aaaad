#include "feedloop/estimators.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "feedloop/history_io.hpp"

namespace feedloop {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

WeightAssignment base_assignment(const InteractionHistory& history,
                                 WeightScheme scheme) {
  WeightAssignment out;
  out.scheme = scheme;
  for (const auto& step : history.steps())
    for (const Observation& o : step.observations)
      out.weights.push_back(WeightedObservation{o.step, o.user, o.item, 0.0});
  return out;
}

}  // namespace

std::string weight_scheme_name(WeightScheme scheme) {
  switch (scheme) {
    case WeightScheme::naive: return "naive";
    case WeightScheme::ipw: return "ipw";
    case WeightScheme::cafl_general: return "cafl_general";
    case WeightScheme::cafl_special: return "cafl_special";
  }
  throw std::logic_error("unknown weight scheme");
}

double WeightAssignment::at(int step, int user, int item) const {
  for (const WeightedObservation& w : weights)
    if (w.step == step && w.user == user && w.item == item) return w.weight;
  throw std::out_of_range("weight assignment: no such observation");
}

CVector CVector::uniform(int horizon) {
  require(horizon >= 1, "cvector: horizon must be >= 1");
  return CVector{Vec::Ones(horizon)};
}

void CVector::validate() const {
  require(c.size() >= 1, "cvector: empty");
  for (Eigen::Index s = 0; s < c.size(); ++s)
    require(c[s] >= 0.0 && std::isfinite(c[s]),
            "cvector: coefficients must be finite and nonnegative");
  require(std::abs(c.sum() - static_cast<double>(c.size())) <= 1e-9,
          "cvector: coefficients must sum to the horizon");
}

CVector compute_c(int horizon, int total_pairs) {
  require(horizon >= 1, "compute_c: horizon must be >= 1");
  require(total_pairs >= 2, "compute_c: need at least two pairs");
  require(horizon < total_pairs,
          "compute_c: horizon exhausts the catalogue (t must be < U*I)");
  const double ui = static_cast<double>(total_pairs);
  const double t = static_cast<double>(horizon);
  CVector out{Vec(horizon)};
  for (int s = 1; s <= horizon; ++s)
    out.c[s - 1] = ui * (ui - t) / ((ui - s) * (ui - s + 1.0));
  return out;
}

WeightAssignment naive_weights(const InteractionHistory& history) {
  WeightAssignment out = base_assignment(history, WeightScheme::naive);
  for (WeightedObservation& w : out.weights) w.weight = 1.0;
  return out;
}

WeightAssignment ipw_weights(const InteractionHistory& history) {
  // Positivity check: every pair must have been recommendable at every
  // step.  A no-repeat run structurally blocks consumed pairs from step 2
  // on, and an explicit zero in a propensity table is a direct violation.
  if (history.no_repeat() && history.horizon() >= 2) {
    bool any_consumed_before_last = false;
    for (int s = 0; s + 1 < history.horizon() && !any_consumed_before_last;
         ++s)
      any_consumed_before_last = !history.steps()[s].observations.empty();
    if (any_consumed_before_last)
      throw std::invalid_argument(
          "ipw_weights: positivity violated (no-repeat run blocks consumed "
          "pairs), use CAFL");
  }
  for (const auto& step : history.steps()) {
    if (!step.propensity_table) continue;
    for (int u = 0; u < history.users(); ++u)
      for (int i = 0; i < history.items(); ++i)
        if ((*step.propensity_table)(u, i) == 0.0)
          throw std::invalid_argument(
              "ipw_weights: positivity violated (zero propensity in table), "
              "use CAFL");
  }

  WeightAssignment out = base_assignment(history, WeightScheme::ipw);
  std::size_t idx = 0;
  for (const auto& step : history.steps())
    for (const Observation& o : step.observations) {
      require(o.propensity > 0.0, "ipw_weights: zero or missing propensity");
      out.weights[idx++].weight = 1.0 / o.propensity;
    }
  return out;
}

WeightAssignment cafl_special_weights(const InteractionHistory& history) {
  const int t = history.horizon();
  require(t >= 1, "cafl_special_weights: empty history");
  return cafl_special_weights(
      history, compute_c(t, history.users() * history.items()));
}

WeightAssignment cafl_special_weights(const InteractionHistory& history,
                                      const CVector& c) {
  require(history.no_repeat(),
          "cafl_special_weights: requires the no-repeat regime");
  const int t = history.horizon();
  require(t >= 1, "cafl_special_weights: empty history");
  require(c.c.size() == t, "cafl_special_weights: c has wrong length");
  c.validate();

  // tail[s-1] = sum_{s' > s} c_{s'}.
  Vec tail = Vec::Zero(t);
  for (int s = t - 1; s >= 1; --s) tail[s - 1] = tail[s] + c.c[s];

  WeightAssignment out = base_assignment(history, WeightScheme::cafl_special);
  std::size_t idx = 0;
  for (const auto& step : history.steps())
    for (const Observation& o : step.observations) {
      require(o.propensity > 0.0,
              "cafl_special_weights: zero or missing propensity");
      out.weights[idx++].weight =
          c.c[o.step - 1] / o.propensity + tail[o.step - 1];
    }
  return out;
}

WeightAssignment cafl_general_weights(const InteractionHistory& history,
                                      CaflDiagnostics* diagnostics) {
  const int t = history.horizon();
  require(t >= 1, "cafl_general_weights: empty history");
  return cafl_general_weights(
      history, compute_c(t, history.users() * history.items()), diagnostics);
}

WeightAssignment cafl_general_weights(const InteractionHistory& history,
                                      const CVector& c,
                                      CaflDiagnostics* diagnostics) {
  const int t = history.horizon();
  require(t >= 1, "cafl_general_weights: empty history");
  require(c.c.size() == t, "cafl_general_weights: c has wrong length");
  c.validate();
  for (const auto& step : history.steps())
    require(step.propensity_table.has_value(),
            "cafl_general_weights: requires a full propensity table for "
            "every step");

  WeightAssignment out = base_assignment(history, WeightScheme::cafl_general);
  // Index observations by pair for the replacement-average bookkeeping.
  std::map<std::pair<int, int>, std::vector<std::size_t>> by_pair;
  std::size_t idx = 0;
  for (const auto& step : history.steps())
    for (const Observation& o : step.observations) {
      require(o.propensity > 0.0,
              "cafl_general_weights: zero or missing propensity");
      out.weights[idx].weight = c.c[o.step - 1] / o.propensity;
      by_pair[{o.user, o.item}].push_back(idx);
      ++idx;
    }

  CaflDiagnostics diag;
  for (int u = 0; u < history.users(); ++u)
    for (int i = 0; i < history.items(); ++i) {
      int zero_steps = 0;
      for (int s = 0; s < t; ++s) {
        if ((*history.steps()[s].propensity_table)(u, i) > 0.0) continue;
        ++zero_steps;
        const auto it = by_pair.find({u, i});
        if (it == by_pair.end()) {
          // Nothing observed for this pair: the replacement average is
          // empty and the term contributes 0.
          ++diag.empty_average_terms;
          continue;
        }
        const double share =
            c.c[s] / static_cast<double>(it->second.size());
        for (std::size_t w : it->second) out.weights[w].weight += share;
      }
      if (zero_steps == t)
        throw std::invalid_argument(
            "cafl_general_weights: pair (" + std::to_string(u) + ", " +
            std::to_string(i) +
            ") has zero propensity at every step; assumption 3 (positivity "
            "at some step) is violated");
    }
  if (diagnostics) *diagnostics = diag;
  return out;
}

void write_weights(std::ostream& out, const WeightAssignment& assignment) {
  const std::string name = weight_scheme_name(assignment.scheme);
  for (const WeightedObservation& w : assignment.weights)
    out << w.step << ' ' << w.user << ' ' << w.item << ' '
        << format_double(w.weight) << ' ' << name << '\n';
}

void write_weights_file(const std::string& path,
                        const WeightAssignment& assignment) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("write_weights: cannot open " + path);
  write_weights(out, assignment);
}

}  // namespace feedloop
