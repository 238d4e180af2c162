#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "odit/core.hpp"
#include "odit/knn.hpp"

namespace odit {

/// Total kNN distance L = sum of g_n^gamma over neighbors n = k-s+1..k.
double total_distance(std::span<const double> x, const Dataset& reference, std::size_t k,
                      std::size_t s, double gamma);

/// Semi-supervised ODIT model: partitioned nominal set plus the borderline
/// total distance L_(K) that summarizes the estimated minimum volume set.
struct TrainedModel {
    std::shared_ptr<const Partition> partition;
    DetectorConfig config;
    std::size_t K = 0;
    double borderline_LK = 0.0;
    std::size_t borderline_row = 0;  // part1 row achieving L_(K)
    double min_positive_L = 0.0;     // clamp for degenerate zero distances
    std::vector<double> training_L;  // L_m per part1 row (unsorted)

    // optional approximate backend for test-time queries
    std::shared_ptr<const KMeansTree> tree;
    std::size_t max_examined_B = 0;

    // optional localization baseline: mean per-dimension contribution over part1
    std::vector<double> mu_baseline;

    const Dataset& reference() const { return partition->part2; }
    std::size_t nominal_size() const {
        return partition->no_split() ? partition->part1.rows()
                                     : partition->part1.rows() + partition->part2.rows();
    }

    void use_approximate_backend(std::size_t branching_C, std::size_t max_iters,
                                 std::size_t max_examined_B, std::uint64_t seed);
    void use_exact_backend() { tree.reset(); }

    /// Test-phase kNN query against part2 via the configured backend.
    NeighborResult query(std::span<const double> x, bool want_decomposition = false) const;

    /// L_t for a test point; zero distances are clamped to min_positive_L.
    double test_total_distance(std::span<const double> x) const;
};

struct TrainOptions {
    bool with_localization_baseline = false;
};

TrainedModel train_odit(const Dataset& nominal, const DetectorConfig& config,
                        const TrainOptions& opt = {});

/// Training on a caller-supplied partition (used when N1 and N2 need to be
/// controlled independently of the ratio).
TrainedModel train_odit(Partition partition, const DetectorConfig& config,
                        const TrainOptions& opt = {});

/// Removes anomaly-set points lying inside the nominal MVS estimate
/// (total distance <= L_(K)).
Dataset clean_anomaly_set(const TrainedModel& nominal_model, const Dataset& raw_anomaly);

/// Supervised model: nominal reference plus a (cleaned) anomaly reference.
struct Odit2Model {
    TrainedModel nominal;
    std::shared_ptr<Dataset> anomaly_reference;
    std::size_t nominal_size_N = 0;
    double imbalance_correction = 0.0;  // ln(N / M)

    // optional localization baseline: mean per-dimension (delta - delta')
    std::vector<double> mu_baseline;

    void refresh_correction();
    NeighborResult anomaly_query(std::span<const double> x, bool want_decomposition = false) const;
    double anomaly_total_distance(std::span<const double> x) const;
};

struct Odit2Options {
    bool clean = true;
    bool with_localization_baseline = false;
};

Odit2Model make_odit2(TrainedModel nominal, const Dataset& raw_anomaly,
                      const Odit2Options& opt = {});

/// Anomaly evidence D_t = d (log L_t - log L_(K)).
double odit_evidence(const TrainedModel& model, std::span<const double> x);

/// Anomaly evidence D_t = d (log L_t - log L'_t) + log(N/M).
double odit2_evidence(const Odit2Model& model, std::span<const double> x);

struct EvidenceRecord {
    std::int64_t t = 0;
    double evidence = 0.0;
    double delta = 0.0;
    bool alarm = false;
    std::vector<double> contributions;  // per-dimension squared gaps, when recorded
};

struct DetectorState {
    double statistic_delta = 0.0;
    std::int64_t last_zero_time = 0;
    bool alarm = false;
    std::optional<std::int64_t> alarm_time;
    std::vector<EvidenceRecord> evidence_log;

    void reset(std::int64_t t0 = 0) {
        statistic_delta = 0.0;
        last_zero_time = t0;
        alarm = false;
        alarm_time.reset();
    }
};

/// One CUSUM-like update: delta <- max(delta + D, 0); alarm at delta >= h.
void update_statistic(DetectorState& state, double evidence, double h, std::int64_t t);

struct RunOptions {
    bool record_contributions = false;  // needed by localization
    bool stop_at_alarm = true;
    std::int64_t start_time = 1;
};

DetectorState run_detector(const TrainedModel& model, const Dataset& stream, double h,
                           const RunOptions& opt = {});
DetectorState run_detector(const Odit2Model& model, const Dataset& stream, double h,
                           const RunOptions& opt = {});

struct UniOptions {
    bool reclean_augmented = false;
    bool record_contributions = false;
    std::int64_t start_time = 1;
};

struct UniResult {
    DetectorState odit_state;
    DetectorState odit2_state;
    std::size_t augmented_count = 0;
    bool stopped_by_odit = false;
};

/// ODIT and ODIT-2 in lockstep; stops at the first alarm of either. When the
/// semi-supervised side stops first, samples after its onset estimate are
/// appended to the anomaly reference of `odit2` (modified in place).
UniResult run_odit_uni(const TrainedModel& odit, Odit2Model& odit2, const Dataset& stream,
                       double h1, double h2, const UniOptions& opt = {});

} // namespace odit
