#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "feedloop/types.hpp"

namespace feedloop {

// Line-delimited audit snapshot of an interaction history.
//
//   # feedloop-history v1
//   # users=U items=I recs_per_user=N mode=no_repeat|with_repeat seed=S
//   s u i a r p
//   ...
//
// One record per observed interaction (a is always 1; the column is kept
// for schema stability).  Ratings and propensities are printed in
// shortest-round-trip form, so deserialize(serialize(h)) reproduces every
// value bit-for-bit and serialize(deserialize(file)) reproduces the file
// byte-for-byte.  Propensity tables and model estimates are not part of
// the snapshot; it is the observation log only.
void write_history(std::ostream& out, const InteractionHistory& history,
                   std::uint64_t seed);
void write_history_file(const std::string& path,
                        const InteractionHistory& history, std::uint64_t seed);

struct HistorySnapshot {
  InteractionHistory history;
  std::uint64_t seed = 0;
};

HistorySnapshot read_history(std::istream& in);
HistorySnapshot read_history_file(const std::string& path);

// Locale-independent shortest-round-trip formatting used by all text
// emitters in the project (snapshots, CSV reports, weight dumps).
std::string format_double(double value);

}  // namespace feedloop
