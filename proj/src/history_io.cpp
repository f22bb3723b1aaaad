#include "feedloop/history_io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace feedloop {

namespace {

constexpr const char* kMagic = "# feedloop-history v1";

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error("history snapshot: " + msg);
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc())
    throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

void write_history(std::ostream& out, const InteractionHistory& history,
                   std::uint64_t seed) {
  out << kMagic << '\n';
  out << "# users=" << history.users() << " items=" << history.items()
      << " recs_per_user=" << history.recs_per_user()
      << " mode=" << (history.no_repeat() ? "no_repeat" : "with_repeat")
      << " seed=" << seed << '\n';
  for (const auto& step : history.steps())
    for (const Observation& o : step.observations)
      out << o.step << ' ' << o.user << ' ' << o.item << " 1 "
          << format_double(o.rating) << ' ' << format_double(o.propensity)
          << '\n';
}

void write_history_file(const std::string& path,
                        const InteractionHistory& history,
                        std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot open " + path + " for writing");
  write_history(out, history, seed);
  if (!out) fail("write to " + path + " failed");
}

HistorySnapshot read_history(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic)
    fail("missing or unrecognized magic line");
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
    fail("missing header line");

  std::map<std::string, std::string> kv;
  {
    std::istringstream hs(line.substr(2));
    std::string tok;
    while (hs >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) fail("malformed header token: " + tok);
      kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
  }
  for (const char* key : {"users", "items", "recs_per_user", "mode", "seed"})
    if (!kv.count(key)) fail(std::string("header missing ") + key);

  const int users = std::stoi(kv["users"]);
  const int items = std::stoi(kv["items"]);
  const int n = std::stoi(kv["recs_per_user"]);
  bool no_repeat;
  if (kv["mode"] == "no_repeat")
    no_repeat = true;
  else if (kv["mode"] == "with_repeat")
    no_repeat = false;
  else
    fail("unknown mode: " + kv["mode"]);
  const std::uint64_t seed = std::stoull(kv["seed"]);

  // Group records by step, then replay them through record_step so every
  // snapshot read re-runs the full validation.
  std::map<int, std::vector<Observation>> by_step;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Observation o;
    int a = 0;
    if (!(ls >> o.step >> o.user >> o.item >> a >> o.rating >> o.propensity))
      fail("malformed record: " + line);
    if (a != 1) fail("record with a != 1: " + line);
    by_step[o.step].push_back(o);
  }

  InteractionHistory history(users, items, n, no_repeat);
  for (const auto& [step, obs] : by_step) {
    RecommendationMatrix recs{BinaryMat::Zero(users, items), step};
    RatingMatrix ratings{Mat::Zero(users, items), step};
    PropensityLog props;
    props.timestep = step;
    for (const Observation& o : obs) {
      if (o.user < 0 || o.user >= users || o.item < 0 || o.item >= items)
        fail("record out of range");
      recs.entries(o.user, o.item) = 1;
      ratings.entries(o.user, o.item) = o.rating;
      props.records.push_back(
          PropensityRecord{o.step, o.user, o.item, o.propensity});
    }
    history.record_step(recs, ratings, props);
  }
  return HistorySnapshot{std::move(history), seed};
}

HistorySnapshot read_history_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path);
  return read_history(in);
}

}  // namespace feedloop
