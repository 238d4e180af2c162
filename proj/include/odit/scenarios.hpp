#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "odit/core.hpp"

namespace odit {

struct GroundTruth {
    std::int64_t tau = 0;  // first anomalous time step (1-based); 0 = never
    std::vector<std::size_t> affected;
};

/// Correlation-change experiment: i.i.d. N(mu, sigma^2 I) turns into an
/// equicorrelated block over a random subset of dimensions at time tau.
/// block_size = 0 correlates the whole affected set as one block; a positive
/// value splits the affected set into consecutive sub-blocks of that size
/// (e.g. block_size = 2 pairs the affected dimensions up), each internally
/// equicorrelated and independent of the others.
struct CorrelationScenario {
    std::size_t d = 100;
    double mu = 20.0;
    double sigma = 10.0;
    double rho = 0.6;
    double affected_fraction = 0.5;
    std::size_t block_size = 0;
    std::int64_t change_time_tau = 100;
    std::int64_t horizon = 300;
    std::uint64_t affected_set_seed = 7;
    std::optional<std::vector<std::size_t>> affected_override;

    void validate() const;
    std::vector<std::size_t> affected_set() const;
};

/// Low-rate DDoS simulation: heterogeneous device rates, a fraction of
/// devices alternating active/inactive modes, compromised devices gaining a
/// mean shift from tau onward.
struct DdosScenario {
    std::size_t d = 50;
    double bimodal_fraction = 0.3;
    std::pair<double, double> inactive_mean_range{10.0, 50.0};
    std::pair<double, double> active_mean_range{50.0, 90.0};
    std::pair<double, double> single_mean_range{10.0, 100.0};
    double sigma2 = 5.0;
    double attack_shift_sigmas = 5.0;
    std::vector<std::size_t> compromised_set;
    std::int64_t change_time_tau = 101;
    std::int64_t horizon = 200;
    std::uint64_t profile_seed = 11;

    void validate() const;
};

/// Fixed per-device parameters implied by (scenario, profile_seed).
struct DeviceProfile {
    std::vector<bool> bimodal;
    std::vector<double> mean_inactive;  // or the single-mode mean
    std::vector<double> mean_active;
    double sigma = 0.0;
};

DeviceProfile ddos_profile(const DdosScenario& sc);

struct GeneratedStream {
    Dataset data;
    GroundTruth truth;
};

GeneratedStream gen_correlation_stream(const CorrelationScenario& sc, std::uint64_t seed);
GeneratedStream gen_ddos_stream(const DdosScenario& sc, std::uint64_t seed);

/// Pure pre-change (nominal) samples.
Dataset correlation_nominal(const CorrelationScenario& sc, std::size_t n, std::uint64_t seed);
Dataset ddos_nominal(const DdosScenario& sc, std::size_t n, std::uint64_t seed);

/// Pure post-change samples (anomaly training material).
Dataset correlation_anomaly(const CorrelationScenario& sc, std::size_t n, std::uint64_t seed);
Dataset ddos_anomaly(const DdosScenario& sc, std::size_t n, std::uint64_t seed);

/// A scenario whose affected set shares exactly `overlap` indices with the
/// original's.
CorrelationScenario gen_mismatch_variant(const CorrelationScenario& sc, std::size_t overlap);

using ScenarioSpec = std::variant<CorrelationScenario, DdosScenario>;

ScenarioSpec scenario_from_json_text(const std::string& text);
std::string scenario_to_json_text(const ScenarioSpec& sc);

GeneratedStream gen_stream(const ScenarioSpec& sc, std::uint64_t seed);
std::int64_t scenario_horizon(const ScenarioSpec& sc);
std::int64_t scenario_tau(const ScenarioSpec& sc);

} // namespace odit
