#include "odit/localization.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace odit {

std::vector<double> contribution_decompose(std::span<const double> x,
                                           const NeighborResult& neighbors) {
    if (!neighbors.per_dimension_sq)
        throw std::invalid_argument("contribution_decompose: decomposition absent");
    if (neighbors.per_dimension_sq->size() != x.size())
        throw std::invalid_argument("contribution_decompose: dimension mismatch");
    return *neighbors.per_dimension_sq;
}

namespace {

// regularized incomplete beta via Lentz's continued fraction
double betacf(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 3e-16;
    constexpr double fpmin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

double reg_inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                      a * std::log(x) + b * std::log(1.0 - x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

} // namespace

double student_t_cdf(double t, std::size_t dof) {
    if (dof < 1) throw std::invalid_argument("student_t_cdf: dof must be >= 1");
    double v = double(dof);
    double x = v / (v + t * t);
    double p = 0.5 * reg_inc_beta(v / 2.0, 0.5, x);
    return t >= 0.0 ? 1.0 - p : p;
}

double student_t_threshold(double beta, std::size_t dof) {
    if (dof < 1) throw std::invalid_argument("student_t_threshold: dof must be >= 1");
    if (beta <= 0.0 || beta >= 1.0)
        throw std::invalid_argument("student_t_threshold: beta must be in (0,1)");
    double target = 1.0 - beta;
    if (target == 0.5) return 0.0;
    double lo = -1.0, hi = 1.0;
    while (student_t_cdf(lo, dof) > target) lo *= 2.0;
    while (student_t_cdf(hi, dof) < target) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (student_t_cdf(mid, dof) < target)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-12 * std::max(1.0, std::fabs(hi))) break;
    }
    return 0.5 * (lo + hi);
}

namespace {

LocalizationReport localize_impl(const std::vector<double>& mu_baseline,
                                 const DetectorState& state, const LocalizationConfig& config,
                                 const std::vector<std::pair<std::size_t, std::size_t>>* groups) {
    if (config.S < 2) throw std::invalid_argument("localize: S must be >= 2");
    if (!state.alarm || !state.alarm_time)
        throw std::invalid_argument("localize: detector has not alarmed");
    if (mu_baseline.empty())
        throw std::invalid_argument("localize: model lacks a localization baseline");
    const std::size_t d = mu_baseline.size();

    // tau_hat = max{t < T : Delta_t = 0}, from the recorded trajectory
    const std::int64_t T = *state.alarm_time;
    std::int64_t tau_hat = state.evidence_log.empty() ? 0 : state.evidence_log.front().t - 1;
    for (const auto& rec : state.evidence_log) {
        if (rec.t >= T) break;
        if (rec.delta == 0.0) tau_hat = rec.t;
    }

    std::vector<const EvidenceRecord*> window;
    for (const auto& rec : state.evidence_log) {
        if (rec.t > tau_hat && rec.t <= tau_hat + std::int64_t(config.S)) {
            if (rec.contributions.size() != d)
                throw std::invalid_argument("localize: contributions were not recorded");
            window.push_back(&rec);
        }
    }
    if (window.size() < config.S)
        throw std::runtime_error("localize: extend observation before localizing (have " +
                                 std::to_string(window.size()) + " of " +
                                 std::to_string(config.S) + " post-onset samples)");

    std::vector<std::pair<std::size_t, std::size_t>> singleton;
    if (!groups) {
        singleton.reserve(d);
        for (std::size_t i = 0; i < d; ++i) singleton.emplace_back(i, i + 1);
        groups = &singleton;
    } else {
        std::vector<char> seen(d, 0);
        for (auto [b, e] : *groups) {
            if (b >= e || e > d) throw std::invalid_argument("localize: bad group range");
            for (std::size_t i = b; i < e; ++i) {
                if (seen[i]) throw std::invalid_argument("localize: overlapping groups");
                seen[i] = 1;
            }
        }
        for (std::size_t i = 0; i < d; ++i)
            if (!seen[i]) throw std::invalid_argument("localize: groups do not cover all dimensions");
    }

    const double theta = student_t_threshold(config.beta, config.S - 1);
    const double S = double(config.S);
    LocalizationReport report;
    report.tau_hat = tau_hat;
    report.mu_baseline = mu_baseline;
    report.grouped = groups != &singleton;

    for (std::size_t g = 0; g < groups->size(); ++g) {
        auto [b, e] = (*groups)[g];
        double mu = 0.0;
        for (std::size_t i = b; i < e; ++i) mu += mu_baseline[i];

        double mean = 0.0;
        std::vector<double> vals(window.size());
        for (std::size_t w = 0; w < window.size(); ++w) {
            double v = 0.0;
            for (std::size_t i = b; i < e; ++i) v += window[w]->contributions[i];
            vals[w] = v;
            mean += v / S;
        }
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        double eta = std::sqrt(var / (S - 1.0));

        double t_stat;
        if (eta == 0.0) {
            // zero-variance contributions: decide by sign of the exact shift
            t_stat = mean > mu ? std::numeric_limits<double>::infinity()
                   : mean < mu ? -std::numeric_limits<double>::infinity()
                               : 0.0;
        } else {
            t_stat = (mean - mu) / (eta / std::sqrt(S));
        }
        report.per_dimension.push_back({g, t_stat, t_stat >= theta});
    }
    return report;
}

} // namespace

LocalizationReport localize(const std::vector<double>& mu_baseline, const DetectorState& state,
                            const LocalizationConfig& config) {
    return localize_impl(mu_baseline, state, config, nullptr);
}

LocalizationReport localize(const TrainedModel& model, const DetectorState& state,
                            const LocalizationConfig& config) {
    return localize_impl(model.mu_baseline, state, config, nullptr);
}

LocalizationReport localize(const Odit2Model& model, const DetectorState& state,
                            const LocalizationConfig& config) {
    return localize_impl(model.mu_baseline, state, config, nullptr);
}

LocalizationReport aggregate_dimensions(
    const std::vector<double>& mu_baseline, const DetectorState& state,
    const LocalizationConfig& config,
    const std::vector<std::pair<std::size_t, std::size_t>>& groups) {
    return localize_impl(mu_baseline, state, config, &groups);
}

void write_report_csv(const LocalizationReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << (report.grouped ? "group_id" : "dimension") << ",t_stat,flagged\n";
    for (const auto& f : report.per_dimension)
        out << f.dimension << ',' << f.t_stat << ',' << (f.flagged ? 1 : 0) << '\n';
}

} // namespace odit
