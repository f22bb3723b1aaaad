#include <cmath>
#include <sstream>
#include <vector>

#include <doctest.h>

#include "feedloop/estimators.hpp"
#include "feedloop/history_io.hpp"
#include "feedloop/types.hpp"

using namespace feedloop;

namespace {

// One-user worlds keep the examples readable: pair (0, i) at step t with
// rating r, propensity p, and optionally the full per-item probability row.
void record_row(InteractionHistory& h, int t, int item, double rating,
                double propensity, const std::vector<double>& table = {}) {
  RecommendationMatrix recs;
  recs.entries = BinaryMat::Zero(h.users(), h.items());
  recs.entries(0, item) = 1;
  recs.timestep = t;
  RatingMatrix ratings;
  ratings.entries = Mat::Zero(h.users(), h.items());
  ratings.entries(0, item) = rating;
  ratings.timestep = t;
  PropensityLog props;
  props.timestep = t;
  props.records.push_back(PropensityRecord{t, 0, item, propensity});
  if (!table.empty()) {
    Mat full(1, h.items());
    for (int i = 0; i < h.items(); ++i) full(0, i) = table[i];
    props.full_table = full;
  }
  h.record_step(recs, ratings, props);
}

}  // namespace

TEST_CASE("per-step coefficients telescope to the horizon") {
  // t = 1: the single coefficient is UI(UI-1)/((UI-1)UI) = 1 for any UI.
  for (int ui : {2, 7, 100}) {
    const CVector c = compute_c(1, ui);
    REQUIRE(c.c.size() == 1);
    CHECK(c.c[0] == doctest::Approx(1.0).epsilon(1e-15));
  }

  // UI = 10, t = 2: c = [8/9, 10/9], summing to exactly 2.
  const CVector c2 = compute_c(2, 10);
  REQUIRE(c2.c.size() == 2);
  CHECK(c2.c[0] == doctest::Approx(8.0 / 9.0).epsilon(1e-15));
  CHECK(c2.c[1] == doctest::Approx(10.0 / 9.0).epsilon(1e-15));
  CHECK(std::abs(c2.c.sum() - 2.0) <= 1e-12);

  // UI = 100, t = 3: endpoints 97/99 and 100/98.
  const CVector c3 = compute_c(3, 100);
  REQUIRE(c3.c.size() == 3);
  CHECK(c3.c[0] == doctest::Approx(97.0 / 99.0).epsilon(1e-15));
  CHECK(c3.c[2] == doctest::Approx(100.0 / 98.0).epsilon(1e-15));
  CHECK(std::abs(c3.c.sum() - 3.0) <= 1e-12);

  CHECK_THROWS_WITH_AS(
      (void)compute_c(10, 10),
      "compute_c: horizon exhausts the catalogue (t must be < U*I)",
      std::invalid_argument);
  c3.validate();  // positive, finite, sums to the horizon
  CVector::uniform(4).validate();
}

TEST_CASE("unit weights for every observation") {
  InteractionHistory empty(1, 5, 1, true);
  CHECK(naive_weights(empty).weights.empty());

  InteractionHistory h(1, 5, 1, true);
  record_row(h, 1, 0, 0.5, 0.2);
  record_row(h, 2, 3, 0.9, 0.25);
  const WeightAssignment w = naive_weights(h);
  CHECK(w.scheme == WeightScheme::naive);
  REQUIRE(w.weights.size() == 2);
  double sum = 0.0;
  for (const auto& x : w.weights) {
    CHECK(x.weight == 1.0);
    sum += x.weight;
  }
  CHECK(sum == 2.0);  // total equals the observation count
}

TEST_CASE("inverse-propensity weights and their positivity guard") {
  // Uniform policy over 10 items, one draw: weight 1 / (1/10) = 10.
  InteractionHistory h(1, 10, 1, false);
  record_row(h, 1, 4, 0.7, 0.1);
  const WeightAssignment w = ipw_weights(h);
  REQUIRE(w.weights.size() == 1);
  CHECK(w.weights[0].weight == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(w.at(1, 0, 4) == w.weights[0].weight);

  // A forced recommendation (propensity 1) is left at weight 1.
  InteractionHistory hf(1, 10, 1, false);
  record_row(hf, 1, 2, 0.6, 1.0);
  CHECK(ipw_weights(hf).weights[0].weight == 1.0);

  // Propensities at or below 1 never produce weights below 1.
  record_row(hf, 2, 5, 0.3, 0.04);
  for (const auto& x : ipw_weights(hf).weights) CHECK(x.weight >= 1.0);

  // A no-repeat run of two or more steps blocks consumed pairs, so the
  // scheme's positivity assumption is structurally violated.
  InteractionHistory hn(1, 10, 1, true);
  record_row(hn, 1, 0, 0.5, 0.1);
  record_row(hn, 2, 1, 0.5, 1.0 / 9.0);
  CHECK_THROWS_WITH_AS(
      (void)ipw_weights(hn),
      "ipw_weights: positivity violated (no-repeat run blocks consumed "
      "pairs), use CAFL",
      std::invalid_argument);

  // An explicit zero in a propensity table is an equally direct violation.
  InteractionHistory hz(1, 3, 1, false);
  record_row(hz, 1, 0, 0.5, 0.5, {0.5, 0.5, 0.0});
  CHECK_THROWS_WITH_AS(
      (void)ipw_weights(hz),
      "ipw_weights: positivity violated (zero propensity in table), use CAFL",
      std::invalid_argument);
}

TEST_CASE("corrected no-repeat weights match the closed form") {
  // UI = 10, horizon 2, observation at step 1 with propensity 0.1:
  // W = 10/9 * ((2-1) + (10-2)/(10-1+1) / 0.1) = 10/9 * (1 + 8) = 10.
  InteractionHistory h(1, 10, 1, true);
  record_row(h, 1, 0, 0.5, 0.1);
  record_row(h, 2, 1, 0.5, 1.0 / 9.0);
  const WeightAssignment w = cafl_special_weights(h);
  CHECK(w.scheme == WeightScheme::cafl_special);
  CHECK(w.at(1, 0, 0) == doctest::Approx(10.0).epsilon(1e-12));

  // Fresh observation (s = t): only the inverse-propensity part remains.
  // UI = 10, t = 1, p = 0.1: W = 10/9 * (0 + 9/10 * 10) = 10.
  InteractionHistory h1(1, 10, 1, true);
  record_row(h1, 1, 0, 0.5, 0.1);
  CHECK(cafl_special_weights(h1).at(1, 0, 0) ==
        doctest::Approx(10.0).epsilon(1e-12));

  // General identity W = c_s / p + sum_{s' > s} c_{s'} against an
  // independent evaluation of the decomposition, across steps.
  InteractionHistory h3(2, 4, 1, true);  // UI = 8
  const double props[3] = {0.125, 0.2, 0.5};
  record_row(h3, 1, 0, 0.5, props[0]);
  record_row(h3, 2, 1, 0.5, props[1]);
  record_row(h3, 3, 2, 0.5, props[2]);
  const int t = 3;
  const double ui = 8.0;
  const WeightAssignment w3 = cafl_special_weights(h3);
  for (int s = 1; s <= t; ++s) {
    const double direct =
        ui / (ui - s) *
        ((t - s) + (ui - t) / (ui - s + 1.0) / props[s - 1]);
    CHECK(w3.at(s, 0, s - 1) == doctest::Approx(direct).epsilon(1e-12));
  }

  // Coefficient override: with c = 1 everywhere the weight degenerates to
  // 1/p plus one unit per remaining step.
  const WeightAssignment wu = cafl_special_weights(h3, CVector::uniform(3));
  for (int s = 1; s <= t; ++s)
    CHECK(wu.at(s, 0, s - 1) ==
          doctest::Approx(1.0 / props[s - 1] + (t - s)).epsilon(1e-12));

  // The scheme is only defined for no-repeat histories.
  InteractionHistory hr(1, 10, 1, false);
  record_row(hr, 1, 0, 0.5, 0.1);
  CHECK_THROWS_WITH_AS((void)cafl_special_weights(hr),
                       "cafl_special_weights: requires the no-repeat regime",
                       std::invalid_argument);
}

TEST_CASE("general corrected weights: blocked-step bookkeeping") {
  // U*I = 3, horizon 2, c = [1/2, 3/2].  Pair 0 is consumed at step 1 with
  // propensity 1/3 and blocked at step 2; its observation carries
  // c_1 / (1/3) + c_2 = 1.5 + 1.5 = 3 (the blocked step's term is the
  // average over its single positive-propensity observation).
  InteractionHistory h(1, 3, 1, true);
  record_row(h, 1, 0, 0.5, 1.0 / 3.0, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  record_row(h, 2, 1, 0.9, 0.5, {0.0, 0.5, 0.5});

  const CVector c = compute_c(2, 3);
  CHECK(c.c[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c.c[1] == doctest::Approx(1.5).epsilon(1e-15));

  CaflDiagnostics diag;
  const WeightAssignment w = cafl_general_weights(h, &diag);
  CHECK(w.scheme == WeightScheme::cafl_general);
  CHECK(w.at(1, 0, 0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(w.at(2, 0, 1) == doctest::Approx(3.0).epsilon(1e-12));  // c_2 / 0.5
  CHECK(diag.empty_average_terms == 0);
  for (const auto& x : w.weights) CHECK(x.weight >= 0.0);
}

TEST_CASE("general corrected weights: empty averages and assumption failure") {
  // Pair 1 is blocked at step 2 without ever having been observed: its
  // replacement average is empty, contributes nothing, and is counted.
  InteractionHistory h(1, 3, 1, true);
  record_row(h, 1, 0, 0.5, 1.0 / 3.0, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  record_row(h, 2, 2, 0.9, 1.0, {0.0, 0.0, 1.0});
  CaflDiagnostics diag;
  const WeightAssignment w = cafl_general_weights(h, &diag);
  CHECK(diag.empty_average_terms == 1);  // pair 1 at step 2
  CHECK(w.at(1, 0, 0) == doctest::Approx(0.5 * 3.0 + 1.5).epsilon(1e-12));

  // A pair with zero propensity at every step cannot be corrected for.
  InteractionHistory hb(1, 3, 1, true);
  record_row(hb, 1, 0, 0.5, 0.5, {0.5, 0.5, 0.0});
  record_row(hb, 2, 1, 0.9, 1.0, {0.0, 1.0, 0.0});
  CHECK_THROWS_AS((void)cafl_general_weights(hb), std::invalid_argument);
  try {
    (void)cafl_general_weights(hb);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("assumption 3") != std::string::npos);
  }

  // Full per-step tables are mandatory for the general scheme.
  InteractionHistory hn(1, 3, 1, true);
  record_row(hn, 1, 0, 0.5, 1.0 / 3.0);
  CHECK_THROWS_AS((void)cafl_general_weights(hn), std::invalid_argument);
}

TEST_CASE("general scheme reduces to the special case and to plain IPW") {
  // No-repeat with one observation per step: both corrected schemes build
  // the same weights (each blocked step contributes its full c to the
  // pair's single observation).
  InteractionHistory h(1, 4, 1, true);
  record_row(h, 1, 1, 0.5, 0.25, {0.25, 0.25, 0.25, 0.25});
  record_row(h, 2, 3, 0.8, 1.0 / 3.0, {1.0 / 3.0, 0.0, 1.0 / 3.0, 1.0 / 3.0});
  const WeightAssignment special = cafl_special_weights(h);
  const WeightAssignment general = cafl_general_weights(h);
  REQUIRE(special.weights.size() == general.weights.size());
  for (std::size_t j = 0; j < special.weights.size(); ++j)
    CHECK(general.weights[j].weight ==
          doctest::Approx(special.weights[j].weight).epsilon(1e-12));

  // Positivity everywhere plus the uniform-coefficient override: the
  // general scheme is exactly inverse-propensity weighting.
  InteractionHistory hp(1, 3, 1, false);
  record_row(hp, 1, 0, 0.5, 0.2, {0.2, 0.3, 0.5});
  record_row(hp, 2, 0, 0.7, 0.6, {0.6, 0.2, 0.2});
  const WeightAssignment ipw = ipw_weights(hp);
  const WeightAssignment gen =
      cafl_general_weights(hp, CVector::uniform(2));
  REQUIRE(ipw.weights.size() == gen.weights.size());
  for (std::size_t j = 0; j < ipw.weights.size(); ++j)
    CHECK(gen.weights[j].weight ==
          doctest::Approx(ipw.weights[j].weight).epsilon(1e-12));
}

TEST_CASE("weight audit dump format") {
  InteractionHistory h(1, 10, 1, true);
  record_row(h, 1, 4, 0.7, 0.25);
  WeightAssignment w = cafl_special_weights(h);
  std::ostringstream out;
  write_weights(out, w);
  // One "s u i weight scheme" line per observation.
  const std::string expect =
      "1 0 4 " + format_double(w.weights[0].weight) + " cafl_special\n";
  CHECK(out.str() == expect);

  CHECK_THROWS_AS((void)w.at(2, 0, 4), std::out_of_range);
}
