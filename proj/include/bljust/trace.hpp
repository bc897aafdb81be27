#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bljust/param.hpp"

namespace bljust {

enum class StepSource { unsup, sup, joint };

std::string_view to_string(StepSource s);

/// One recorded optimizer step. Batch losses are NaN when not evaluated.
struct StepRecord {
  std::string phase;
  int epoch = 0;
  long step = 0;           // 1-based within the phase of this epoch
  StepSource source = StepSource::joint;
  double gamma = 0.0;
  double lr = 0.0;
  double f_batch = 0.0;
  double g_batch = 0.0;
  double gnorm_f = 0.0;
  double gnorm_g = 0.0;
  double gnorm_F = 0.0;     // norm of the applied descent direction
  // Position inside the current run of steps that share phase, source and
  // gamma, and the cumulative sum of gnorm_F^2 over that run.
  long segment_step = 0;
  double cum_sq_F = 0.0;
  std::optional<ParamVector> params_after;
};

/// Full-data evaluation at the end of an epoch.
struct EpochRecord {
  int epoch = 0;
  std::string phase;
  double gamma = 0.0;
  double f = 0.0;
  double g = 0.0;
  double p_hat = 0.0;
  double gnorm_f = 0.0;
  double gnorm_g = 0.0;
  double gnorm_F = 0.0;
};

struct RunTrace {
  std::vector<EpochRecord> epochs;
  std::vector<StepRecord> steps;
  long stride = 0;
  double v_hat = 0.0;
  std::vector<std::string> flags;
  std::vector<double> pl_agreement;  // pseudo-label accuracy per labeling pass
};

struct RunResult {
  ParamVector params;
  RunTrace trace;
};

/// epoch,gamma,f,g,p_hat,gnorm_f,gnorm_g,gnorm_F,phase
std::string trace_to_csv(const RunTrace& trace);
std::vector<EpochRecord> trace_from_csv(std::string_view text);

/// Tidy (step, series, value) rows, one per series per epoch.
std::string trace_to_tidy_csv(const std::vector<EpochRecord>& epochs);

}  // namespace bljust
