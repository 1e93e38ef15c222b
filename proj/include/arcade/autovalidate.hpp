#pragma once

// Automatic validation of generated candidates against a human-accepted set
// using summed DTW distances and a leave-one-out comparison.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "arcade/dtw.hpp"
#include "arcade/error.hpp"
#include "arcade/rng.hpp"
#include "arcade/simenv.hpp"
#include "arcade/text_format.hpp"
#include "arcade/trajectory.hpp"

namespace arcade {

enum class Representation { ee_position, joints };

struct ValidationConfig {
  double beta = 0.95;
  Representation representation = Representation::ee_position;
  std::uint64_t seed = 0;
  std::size_t attempt_cap_factor = 20;

  void validate() const {
    // beta = 0 is allowed as the degenerate "exact match only" threshold.
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be a finite non-negative scalar");
    if (attempt_cap_factor < 1) throw ConfigError("attempt_cap_factor must be >= 1");
  }
};

using Sequence = std::vector<Eigen::VectorXd>;

inline Sequence to_sequence(const Demonstration& demo, Representation rep) {
  Sequence out;
  out.reserve(demo.steps.size());
  for (const auto& s : demo.steps) {
    if (rep == Representation::ee_position) out.emplace_back(s.pose.position);
    else out.push_back(s.joints);
  }
  return out;
}

struct AcceptedSet {
  std::vector<Demonstration> demos;
  std::vector<Sequence> sequences;
  std::vector<double> similarity;  // S_i = sum_{j != i} DTW(tau_i, tau_j)
  Representation representation = Representation::ee_position;

  std::size_t size() const noexcept { return demos.size(); }
  double min_similarity() const { return *std::min_element(similarity.begin(), similarity.end()); }
};

inline AcceptedSet build_accepted_set(const Dataset& data, const ValidationConfig& config) {
  config.validate();
  if (data.demos.size() < 2) {
    throw ValidationError("automatic validation needs at least 2 accepted demonstrations, got " +
                          std::to_string(data.demos.size()) + "; approve more candidates in review");
  }
  validate_structure(data);
  AcceptedSet set;
  set.representation = config.representation;
  set.demos = data.demos;
  for (const auto& d : set.demos) set.sequences.push_back(to_sequence(d, config.representation));
  const std::size_t h = set.demos.size();
  std::vector<double> pair(h * h, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = i + 1; j < h; ++j) {
      pair[i * h + j] = pair[j * h + i] = dtw::distance(set.sequences[i], set.sequences[j]);
    }
  }
  set.similarity.assign(h, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < h; ++j) {
      if (j != i) set.similarity[i] += pair[i * h + j];
    }
  }
  return set;
}

struct ValidationOutcome {
  bool accepted = false;
  double delta = 0.0;
  double threshold = 0.0;
  std::size_t excluded_index = 0;  // 0-based
};

/// Scores a candidate with a fixed excluded index.
inline ValidationOutcome validate_excluding(const Demonstration& candidate, const AcceptedSet& accepted, double beta,
                                            std::size_t excluded) {
  if (excluded >= accepted.size()) throw ValidationError("excluded index out of range");
  const auto seq = to_sequence(candidate, accepted.representation);
  if (!seq.empty() && !accepted.sequences.front().empty() &&
      seq.front().size() != accepted.sequences.front().front().size()) {
    throw DimensionError("candidate representation dimension differs from the accepted set");
  }
  ValidationOutcome out;
  out.excluded_index = excluded;
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    if (i != excluded) out.delta += dtw::distance(seq, accepted.sequences[i]);
  }
  out.threshold = beta * accepted.min_similarity();
  out.accepted = out.delta <= out.threshold;
  return out;
}

inline std::size_t draw_excluded_index(std::size_t h, std::uint64_t draw_seed) {
  Rng rng(draw_seed);
  return std::uniform_int_distribution<std::size_t>(0, h - 1)(rng);
}

/// Draws the excluded index from `draw_seed`, then scores the candidate.
inline ValidationOutcome validate(const Demonstration& candidate, const AcceptedSet& accepted,
                                  const ValidationConfig& config, std::uint64_t draw_seed) {
  config.validate();
  return validate_excluding(candidate, accepted, config.beta, draw_excluded_index(accepted.size(), draw_seed));
}

struct OutcomeRecord {
  std::string id;
  ValidationOutcome outcome;
};

struct ScaleResult {
  Dataset scaled;
  std::vector<OutcomeRecord> log;
  std::size_t attempts = 0;
  std::size_t target = 0;
  double acceptance_rate = 0.0;
  std::optional<std::string> shortfall;
};

/// Produces the next candidate for attempt i, or nullopt if generation failed.
using CandidateStream = std::function<std::optional<Demonstration>(std::size_t attempt)>;

inline ScaleResult scale_dataset(const CandidateStream& next, const AcceptedSet& accepted, std::size_t target_size,
                                 const ValidationConfig& config) {
  config.validate();
  if (target_size < 1) throw ConfigError("target size must be >= 1");
  ScaleResult r;
  r.target = target_size;
  r.scaled.role = DatasetRole::scaled;
  const std::size_t cap = config.attempt_cap_factor * target_size;
  std::size_t scored = 0;
  while (r.scaled.demos.size() < target_size && r.attempts < cap) {
    const std::size_t attempt = r.attempts++;
    auto candidate = next(attempt);
    if (!candidate) continue;
    auto outcome = validate(*candidate, accepted, config, derive_seed(config.seed, attempt));
    ++scored;
    r.log.push_back({candidate->id, outcome});
    if (outcome.accepted) r.scaled.demos.push_back(std::move(*candidate));
  }
  r.acceptance_rate = scored ? static_cast<double>(r.scaled.demos.size()) / static_cast<double>(scored) : 0.0;
  if (r.scaled.demos.size() < target_size) {
    r.shortfall = "attempt cap of " + std::to_string(cap) + " reached with " +
                  std::to_string(r.scaled.demos.size()) + " of " + std::to_string(target_size) +
                  " demonstrations accepted (shortfall " +
                  std::to_string(target_size - r.scaled.demos.size()) + ")";
  }
  return r;
}

// Tab-separated outcome log: id, delta, threshold, excluded index (0-based), verdict.
inline void write_outcome_log(const std::vector<OutcomeRecord>& log, std::ostream& os) {
  os << "id\tdelta\tthreshold\texcluded\tverdict\n";
  for (const auto& rec : log) {
    os << rec.id << '\t' << text::format_double(rec.outcome.delta) << '\t'
       << text::format_double(rec.outcome.threshold) << '\t' << rec.outcome.excluded_index << '\t'
       << (rec.outcome.accepted ? "accept" : "reject") << '\n';
  }
}

}  // namespace arcade
