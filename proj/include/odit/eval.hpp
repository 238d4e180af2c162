#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "odit/core.hpp"
#include "odit/detectors.hpp"
#include "odit/scenarios.hpp"

namespace odit {

/// Decision-statistic trajectory of a detector on a stream; the statistic
/// update never depends on the threshold, so alarm times for every h are
/// derived from one run.
using TrajectoryFn = std::function<std::vector<double>(const Dataset& stream)>;
using StreamFn = std::function<GeneratedStream(std::uint64_t trial_seed)>;

std::vector<double> odit_trajectory(const TrainedModel& model, const Dataset& stream);
std::vector<double> odit2_trajectory(const Odit2Model& model, const Dataset& stream);

struct TrialOutcome {
    std::optional<std::int64_t> alarm_time;  // 1-based sample index
    std::int64_t true_tau = 0;
    std::optional<std::int64_t> detection_delay;  // (T - tau)+, only for true detections
    bool false_alarm = false;
};

struct TrialBatch {
    std::vector<std::vector<double>> trajectories;
    std::vector<std::int64_t> taus;

    std::size_t n_trials() const { return trajectories.size(); }
};

/// Runs one detector over n_trials independent streams. Deterministic for a
/// fixed master seed at any parallelism level: trial seeds derive from the
/// master seed and results land in per-trial slots before aggregation.
TrialBatch collect_trajectories(const TrajectoryFn& detector, const StreamFn& streams,
                                std::size_t n_trials, std::size_t jobs,
                                std::uint64_t master_seed);

std::optional<std::int64_t> alarm_time_for(const std::vector<double>& trajectory, double h);
TrialOutcome outcome_for(const std::vector<double>& trajectory, std::int64_t tau, double h);

struct DelayStats {
    double mean_delay = 0.0;  // over true detections only
    std::size_t detections = 0;
    std::size_t censored = 0;
    std::size_t false_alarms = 0;
    std::size_t n_trials = 0;

    double far() const { return n_trials ? double(false_alarms) / double(n_trials) : 0.0; }
};

DelayStats delay_at_threshold(const TrialBatch& batch, double h);

/// Smallest threshold whose estimated false-alarm rate (fraction of trials
/// alarming before tau) does not exceed target_far; taken from the order
/// statistics of per-trial pre-tau maxima.
double threshold_for_far(const TrialBatch& batch, double target_far);

/// Mean time to alarm on pure-nominal trajectories, censored at the horizon.
struct FalseAlarmPeriod {
    double mean_alarm_time = 0.0;  // over alarming trials
    std::size_t alarms = 0;
    std::size_t censored = 0;
};
FalseAlarmPeriod false_alarm_period(const TrialBatch& nominal_batch, double h);

struct ThresholdRow {
    double h = 0.0;
    double mean_delay = 0.0;
    double far = 0.0;
    std::size_t censored = 0;
    std::size_t n_trials = 0;
};

struct EvalReport {
    std::vector<ThresholdRow> rows;
    std::string metadata_json;
};

EvalReport run_trials(const TrajectoryFn& detector, const StreamFn& streams,
                      const std::vector<double>& thresholds, std::size_t n_trials,
                      std::size_t jobs, std::uint64_t master_seed);

void write_report_csv(const EvalReport& report, const std::string& path);

// --- localization ROC ----------------------------------------------------

struct RocPoint {
    double operating_point = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

/// Per-trial per-dimension scores against ground-truth anomalous sets; one
/// ROC point per distinct score threshold.
std::vector<RocPoint> roc_from_scores(const std::vector<std::vector<double>>& scores,
                                      const std::vector<std::vector<char>>& truth);

/// Largest TPR achievable at FPR <= fpr_cap (step-function convention).
double tpr_at_fpr(const std::vector<RocPoint>& roc, double fpr_cap);

void write_roc_csv(const std::vector<RocPoint>& roc, const std::string& path);

// --- timing ---------------------------------------------------------------

/// Mean wall-clock seconds per observation for evidence + statistic update.
double timing_benchmark(const TrainedModel& model, const Dataset& queries);

/// sample_delay * sampling_period + per_sample_overhead, in seconds.
double effective_delay(double sample_delay, double sampling_period, double per_sample_overhead);

// --- small statistics helpers --------------------------------------------

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

} // namespace odit
