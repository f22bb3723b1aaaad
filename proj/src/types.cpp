#include "feedloop/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace feedloop {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

InteractionHistory::InteractionHistory(int users, int items, int recs_per_user,
                                       bool no_repeat)
    : users_(users),
      items_(items),
      recs_per_user_(recs_per_user),
      no_repeat_(no_repeat) {
  require(users > 0 && items > 0, "history: users and items must be positive");
  require(recs_per_user > 0 && recs_per_user <= items,
          "history: recs per user must be in [1, items]");
  consumed_.assign(static_cast<std::size_t>(users) * items, 0);
}

std::vector<Observation> InteractionHistory::observations() const {
  std::vector<Observation> all;
  for (const Step& step : steps_)
    all.insert(all.end(), step.observations.begin(), step.observations.end());
  return all;
}

bool InteractionHistory::consumed(int user, int item) const {
  require(user >= 0 && user < users_ && item >= 0 && item < items_,
          "history: user/item index out of range");
  return consumed_[static_cast<std::size_t>(user) * items_ + item] != 0;
}

void InteractionHistory::record_step(
    const RecommendationMatrix& recs, const RatingMatrix& ratings,
    const PropensityLog& props, const std::optional<LatentParams>& estimate) {
  require(recs.timestep == horizon() + 1,
          "record_step: timestep gap (expected step " +
              std::to_string(horizon() + 1) + ", got " +
              std::to_string(recs.timestep) + ")");
  require(ratings.timestep == recs.timestep &&
              props.timestep == recs.timestep,
          "record_step: timestep mismatch between step components");
  require(recs.entries.rows() == users_ && recs.entries.cols() == items_,
          "record_step: recommendation matrix dimension mismatch");
  require(ratings.entries.rows() == users_ && ratings.entries.cols() == items_,
          "record_step: rating matrix dimension mismatch");
  if (props.full_table) {
    require(props.full_table->rows() == users_ &&
                props.full_table->cols() == items_,
            "record_step: propensity table dimension mismatch");
  }

  // Index propensity records; reject duplicates and out-of-range entries.
  std::vector<double> prop(static_cast<std::size_t>(users_) * items_, -1.0);
  for (const PropensityRecord& r : props.records) {
    require(r.step == recs.timestep, "record_step: propensity step mismatch");
    require(r.user >= 0 && r.user < users_ && r.item >= 0 && r.item < items_,
            "record_step: propensity record out of range");
    require(r.propensity > 0.0 && r.propensity <= 1.0,
            "record_step: propensity must be in (0, 1]");
    double& slot = prop[static_cast<std::size_t>(r.user) * items_ + r.item];
    require(slot < 0.0, "record_step: duplicate propensity record");
    slot = r.propensity;
  }

  Step step;
  std::size_t recorded = 0;
  for (int u = 0; u < users_; ++u) {
    int row_count = 0;
    for (int i = 0; i < items_; ++i) {
      const std::uint8_t a = recs.entries(u, i);
      require(a == 0 || a == 1, "record_step: recommendations must be 0/1");
      const double r = ratings.entries(u, i);
      const std::size_t flat = static_cast<std::size_t>(u) * items_ + i;
      if (a == 0) {
        require(r == 0.0, "record_step: rating without recommendation");
        continue;
      }
      ++row_count;
      require(std::isfinite(r), "record_step: non-finite rating");
      require(prop[flat] > 0.0,
              "record_step: missing propensity for recommended pair");
      if (no_repeat_)
        require(consumed_[flat] == 0,
                "record_step: repeat recommendation of a consumed pair");
      if (props.full_table) {
        // The table must agree with the logged propensity on realized pairs.
        require(std::abs((*props.full_table)(u, i) - prop[flat]) <= 1e-12,
                "record_step: propensity table disagrees with record");
      }
      step.observations.push_back(Observation{recs.timestep, u, i, r,
                                              prop[flat]});
      ++recorded;
    }
    require(row_count == 0 || row_count == recs_per_user_,
            "record_step: per-user recommended count must be 0 or N");
  }
  require(recorded == props.records.size(),
          "record_step: propensity record without recommendation");

  if (props.full_table) {
    for (int u = 0; u < users_; ++u)
      for (int i = 0; i < items_; ++i) {
        const double p = (*props.full_table)(u, i);
        require(std::isfinite(p) && p >= 0.0 && p <= 1.0,
                "record_step: propensity table entries must be in [0, 1]");
      }
    step.propensity_table = props.full_table;
  }
  if (estimate) {
    require(estimate->user_vectors.allFinite() &&
                estimate->item_vectors.allFinite(),
            "record_step: non-finite model estimate");
    step.params_estimate = estimate;
  }

  for (const Observation& o : step.observations)
    consumed_[static_cast<std::size_t>(o.user) * items_ + o.item] = 1;
  steps_.push_back(std::move(step));
}

std::vector<ConsumedPair> InteractionHistory::consumed_pairs() const {
  std::vector<ConsumedPair> out;
  for (const Step& step : steps_)
    for (const Observation& o : step.observations)
      out.emplace_back(o.user, o.item, o.step);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<2>(a), std::get<0>(a), std::get<1>(a)) <
           std::tie(std::get<2>(b), std::get<0>(b), std::get<1>(b));
  });
  return out;
}

}  // namespace feedloop
