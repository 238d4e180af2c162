#include "odit/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace odit {

GaussianModel::GaussianModel(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
    if (covariance_.rows() != covariance_.cols() || covariance_.rows() != mean_.size())
        throw std::invalid_argument("GaussianModel: covariance shape mismatch");
    if (!covariance_.isApprox(covariance_.transpose(), 1e-10))
        throw std::invalid_argument("GaussianModel: covariance not symmetric");
    llt_.compute(covariance_);
    if (llt_.info() != Eigen::Success)
        throw std::invalid_argument("GaussianModel: covariance not positive definite");
    log_det_ = 2.0 * llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

double GaussianModel::log_density(std::span<const double> x) const {
    if (x.size() != dim()) throw std::invalid_argument("GaussianModel: dimension mismatch");
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), Eigen::Index(x.size()));
    Eigen::VectorXd centered = xv - mean_;
    double quad = centered.dot(llt_.solve(centered));
    constexpr double ln2pi = 1.8378770664093454836;
    return -0.5 * (double(dim()) * ln2pi + log_det_ + quad);
}

double cusum_step(double state, std::span<const double> x, const GaussianModel& f0,
                  const GaussianModel& f1) {
    double llr = f1.log_density(x) - f0.log_density(x);
    return std::max(0.0, state + llr);
}

GCusum::GCusum(std::vector<double> means, std::vector<double> stddevs, double assumed_shift)
    : means_(std::move(means)), stddevs_(std::move(stddevs)), assumed_shift_(assumed_shift) {
    if (means_.size() != stddevs_.size())
        throw std::invalid_argument("GCusum: means/stddevs size mismatch");
    for (double s : stddevs_)
        if (s <= 0.0) throw std::invalid_argument("GCusum: zero-variance stream");
    states_.assign(means_.size(), 0.0);
}

GCusum GCusum::from_training(const Dataset& nominal, double assumed_shift) {
    const std::size_t d = nominal.dim(), n = nominal.rows();
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = nominal.row(i);
        for (std::size_t j = 0; j < d; ++j) mean[j] += r[j] / double(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto r = nominal.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            double c = r[j] - mean[j];
            var[j] += c * c / double(n - 1);
        }
    }
    std::vector<double> sd(d);
    for (std::size_t j = 0; j < d; ++j) sd[j] = std::sqrt(var[j]);
    return GCusum(std::move(mean), std::move(sd), assumed_shift);
}

double GCusum::step(std::span<const double> x) {
    if (x.size() != means_.size()) throw std::invalid_argument("GCusum: dimension mismatch");
    statistic_ = 0.0;
    for (std::size_t j = 0; j < means_.size(); ++j) {
        // LLR of N(mu + delta*sigma, sigma^2) vs N(mu, sigma^2)
        double z = (x[j] - means_[j]) / stddevs_[j];
        double llr = assumed_shift_ * z - 0.5 * assumed_shift_ * assumed_shift_;
        states_[j] = std::max(0.0, states_[j] + llr);
        statistic_ += states_[j];
    }
    return statistic_;
}

void GCusum::reset() {
    std::fill(states_.begin(), states_.end(), 0.0);
    statistic_ = 0.0;
}

double symmetric_renyi(std::span<const double> p, std::span<const double> q, double alpha) {
    if (p.size() != q.size()) throw std::invalid_argument("renyi: support size mismatch");
    if (alpha <= 0.0 || alpha == 1.0)
        throw std::invalid_argument("renyi: alpha must be positive and != 1");
    double sp = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || q[i] < 0.0) throw std::invalid_argument("renyi: negative mass");
        sp += p[i];
        sq += q[i];
    }
    if (sp <= 0.0 || sq <= 0.0) throw std::invalid_argument("renyi: empty distribution");
    auto one_sided = [&](std::span<const double> a, double sa, std::span<const double> b,
                         double sb) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            double pa = a[i] / sa, pb = b[i] / sb;
            if (pa > 0.0 && pb > 0.0)
                acc += std::pow(pa, alpha) * std::pow(pb, 1.0 - alpha);
            else if (pa > 0.0 && alpha > 1.0)
                return std::numeric_limits<double>::infinity();
        }
        return std::log(acc) / (alpha - 1.0);
    };
    return one_sided(p, sp, q, sq) + one_sided(q, sq, p, sp);
}

InfoMetricDetector::InfoMetricDetector(std::vector<double> means, std::vector<double> stddevs,
                                       WindowDetectorConfig config)
    : means_(std::move(means)), stddevs_(std::move(stddevs)), config_(config) {
    if (means_.size() != stddevs_.size())
        throw std::invalid_argument("InfoMetricDetector: means/stddevs size mismatch");
    if (config_.window_W < 2) throw std::invalid_argument("InfoMetricDetector: W must be >= 2");
    gaussian_bins_.resize(means_.size());
    for (std::size_t j = 0; j < means_.size(); ++j) {
        const double mu = means_[j], sigma = stddevs_[j];
        if (sigma <= 0.0) throw std::invalid_argument("InfoMetricDetector: zero-variance stream");
        const std::size_t bins =
            std::size_t(std::max(1.0, std::ceil(mu + config_.support_sigmas * sigma))) + 1;
        auto& g = gaussian_bins_[j];
        g.resize(bins);
        for (std::size_t b = 0; b < bins; ++b) {
            double z = (double(b) - mu) / sigma;
            g[b] = std::exp(-0.5 * z * z);
        }
    }
    window_.assign(config_.window_W * means_.size(), 0.0);
}

InfoMetricDetector InfoMetricDetector::from_training(const Dataset& nominal,
                                                     WindowDetectorConfig config) {
    const std::size_t d = nominal.dim(), n = nominal.rows();
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += nominal.at(i, j) / double(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double c = nominal.at(i, j) - mean[j];
            var[j] += c * c / double(n - 1);
        }
    std::vector<double> sd(d);
    for (std::size_t j = 0; j < d; ++j) sd[j] = std::sqrt(var[j]);
    return InfoMetricDetector(std::move(mean), std::move(sd), config);
}

double InfoMetricDetector::step(std::span<const double> x) {
    const std::size_t d = means_.size();
    if (x.size() != d) throw std::invalid_argument("InfoMetricDetector: dimension mismatch");
    std::copy(x.begin(), x.end(), window_.begin() + std::ptrdiff_t(next_ * d));
    next_ = (next_ + 1) % config_.window_W;
    if (filled_ < config_.window_W) {
        ++filled_;
        if (filled_ < config_.window_W) return 0.0;
    }

    double statistic = 0.0;
    std::vector<double> poisson;
    for (std::size_t j = 0; j < d; ++j) {
        double lambda = 0.0;
        for (std::size_t w = 0; w < config_.window_W; ++w)
            lambda += window_[w * d + j] / double(config_.window_W);
        if (lambda <= 0.0)
            throw std::runtime_error("info_metric: window mean <= 0, Poisson fit undefined");
        const auto& g = gaussian_bins_[j];
        poisson.resize(g.size());
        for (std::size_t b = 0; b < g.size(); ++b)
            poisson[b] = std::exp(double(b) * std::log(lambda) - lambda -
                                  std::lgamma(double(b) + 1.0));
        statistic += symmetric_renyi(g, poisson, config_.renyi_alpha);
    }
    return statistic;
}

void InfoMetricDetector::reset() {
    filled_ = 0;
    next_ = 0;
    std::fill(window_.begin(), window_.end(), 0.0);
}

std::vector<bool> data_filter(std::span<const double> x,
                              std::span<const double> per_node_threshold) {
    if (x.size() != per_node_threshold.size())
        throw std::invalid_argument("data_filter: dimension mismatch");
    std::vector<bool> flags(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) flags[i] = x[i] > per_node_threshold[i];
    return flags;
}

std::vector<double> per_stream_quantile(const Dataset& training, double q) {
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile: q must be in [0,1]");
    const std::size_t d = training.dim(), n = training.rows();
    if (n == 0) throw std::invalid_argument("quantile: empty training set");
    std::vector<double> out(d);
    std::vector<double> col(n);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = training.at(i, j);
        std::size_t idx = std::min(n - 1, std::size_t(std::floor(q * double(n))));
        std::nth_element(col.begin(), col.begin() + std::ptrdiff_t(idx), col.end());
        out[j] = col[idx];
    }
    return out;
}

} // namespace odit
