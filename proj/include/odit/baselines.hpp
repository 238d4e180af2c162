#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "odit/core.hpp"

namespace odit {

/// Multivariate Gaussian with cached Cholesky factor; log densities are
/// computed through triangular solves, never explicit inverses.
class GaussianModel {
public:
    GaussianModel(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return covariance_; }
    std::size_t dim() const { return std::size_t(mean_.size()); }

    double log_density(std::span<const double> x) const;

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd covariance_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    double log_det_ = 0.0;
};

/// Oracle CUSUM step: S <- max(0, S + log f1(x) - log f0(x)).
double cusum_step(double state, std::span<const double> x, const GaussianModel& f0,
                  const GaussianModel& f1);

/// Per-stream CUSUMs under an independence assumption; the global statistic
/// is the sum over streams. The post-change model shifts each stream's mean
/// by assumed_shift standard deviations.
class GCusum {
public:
    GCusum(std::vector<double> means, std::vector<double> stddevs, double assumed_shift = 3.0);

    static GCusum from_training(const Dataset& nominal, double assumed_shift = 3.0);

    double step(std::span<const double> x);
    const std::vector<double>& stream_states() const { return states_; }
    double statistic() const { return statistic_; }
    void reset();

private:
    std::vector<double> means_, stddevs_;
    double assumed_shift_;
    std::vector<double> states_;
    double statistic_ = 0.0;
};

struct WindowDetectorConfig {
    std::size_t window_W = 5;
    double renyi_alpha = 0.5;
    double support_sigmas = 10.0;  // per-stream bins cover [0, mu + support_sigmas * sigma]
};

/// Symmetric Renyi divergence between two renormalized discrete
/// distributions on a common support.
double symmetric_renyi(std::span<const double> p, std::span<const double> q, double alpha);

/// Window-based information-metric detector: per stream, compares the
/// training Gaussian with a Poisson fitted to the last W samples, both
/// discretized onto integer bins; the statistic sums the symmetric Renyi
/// divergences over streams.
class InfoMetricDetector {
public:
    InfoMetricDetector(std::vector<double> means, std::vector<double> stddevs,
                       WindowDetectorConfig config);

    static InfoMetricDetector from_training(const Dataset& nominal, WindowDetectorConfig config);

    /// Returns 0 until the window is full.
    double step(std::span<const double> x);
    void reset();

private:
    std::vector<double> means_, stddevs_;
    WindowDetectorConfig config_;
    std::vector<std::vector<double>> gaussian_bins_;  // per stream, renormalized
    std::vector<double> window_;                      // ring buffer, W x d
    std::size_t filled_ = 0, next_ = 0;
};

/// Per-node rate thresholding; flags node i iff x[i] > threshold[i].
std::vector<bool> data_filter(std::span<const double> x, std::span<const double> per_node_threshold);

/// Per-stream empirical quantiles of a training set (for filter thresholds).
std::vector<double> per_stream_quantile(const Dataset& training, double q);

} // namespace odit
