#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odit/detectors.hpp"

namespace odit {

struct LocalizationConfig {
    std::size_t S = 2;   // post-onset samples used by the t-test
    double beta = 0.05;  // significance level
};

struct DimensionFlag {
    std::size_t dimension = 0;  // dimension index, or group id for group reports
    double t_stat = 0.0;
    bool flagged = false;
};

struct LocalizationReport {
    std::vector<DimensionFlag> per_dimension;
    std::int64_t tau_hat = 0;
    std::vector<double> mu_baseline;
    bool grouped = false;
};

/// Per-dimension squared gaps to neighbors n = k-s+1..k; sums to L_t when
/// gamma = 2.
std::vector<double> contribution_decompose(std::span<const double> x,
                                           const NeighborResult& neighbors);

/// (1 - beta) quantile of Student's t with `dof` degrees of freedom,
/// obtained by numerical CDF inversion.
double student_t_threshold(double beta, std::size_t dof);

double student_t_cdf(double t, std::size_t dof);

/// Post-alarm t-test on recorded per-dimension contributions. The state's
/// evidence log must carry contributions for the S samples after the onset
/// estimate tau_hat (run the detector with record_contributions, and keep
/// consuming samples past the alarm if T - tau_hat < S).
LocalizationReport localize(const std::vector<double>& mu_baseline, const DetectorState& state,
                            const LocalizationConfig& config);

LocalizationReport localize(const TrainedModel& model, const DetectorState& state,
                            const LocalizationConfig& config);
LocalizationReport localize(const Odit2Model& model, const DetectorState& state,
                            const LocalizationConfig& config);

/// Group-level report: contributions and baselines are summed over each
/// index range [begin, end) and the t-test is re-run per group. Groups must
/// partition 0..d-1.
LocalizationReport aggregate_dimensions(const std::vector<double>& mu_baseline,
                                        const DetectorState& state,
                                        const LocalizationConfig& config,
                                        const std::vector<std::pair<std::size_t, std::size_t>>& groups);

void write_report_csv(const LocalizationReport& report, const std::string& path);

} // namespace odit
