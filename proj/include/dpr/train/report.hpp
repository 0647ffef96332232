#pragma once

#include <limits>
#include <string>
#include <vector>

#include "dpr/train/config.hpp"

namespace dpr {

// One logged optimizer step. Components that do not exist under the run's
// paradigm stay NaN and are omitted from the serialized record.
struct StepLog {
  long step = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double l_enc = std::numeric_limits<double>::quiet_NaN();
  double l_dec = std::numeric_limits<double>::quiet_NaN();
  double l_ext = std::numeric_limits<double>::quiet_NaN();
  double l_cl = std::numeric_limits<double>::quiet_NaN();
};

struct TrainReport {
  std::vector<StepLog> steps;
  long stage_boundary = 0;  // 0 when the run is single-stage
  std::string stage2_entry_digest;
  long skipped_documents = 0;  // too short for span sampling / empty contexts
  double wall_clock_s = 0.0;   // printed, never serialized

  // Line-delimited records; deterministic for identical runs (wall clock is
  // reported on stdout only).
  void save(const std::string& path) const;
  static TrainReport load(const std::string& path);
};

}  // namespace dpr
