#include "odit/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace odit {

std::vector<double> odit_trajectory(const TrainedModel& model, const Dataset& stream) {
    std::vector<double> traj;
    traj.reserve(stream.rows());
    DetectorState state;
    state.reset(0);
    for (std::size_t t = 0; t < stream.rows(); ++t) {
        double ev = odit_evidence(model, stream.row(t));
        update_statistic(state, ev, std::numeric_limits<double>::infinity(),
                         std::int64_t(t) + 1);
        traj.push_back(state.statistic_delta);
    }
    return traj;
}

std::vector<double> odit2_trajectory(const Odit2Model& model, const Dataset& stream) {
    std::vector<double> traj;
    traj.reserve(stream.rows());
    DetectorState state;
    state.reset(0);
    for (std::size_t t = 0; t < stream.rows(); ++t) {
        double ev = odit2_evidence(model, stream.row(t));
        update_statistic(state, ev, std::numeric_limits<double>::infinity(),
                         std::int64_t(t) + 1);
        traj.push_back(state.statistic_delta);
    }
    return traj;
}

TrialBatch collect_trajectories(const TrajectoryFn& detector, const StreamFn& streams,
                                std::size_t n_trials, std::size_t jobs,
                                std::uint64_t master_seed) {
    if (n_trials == 0) throw std::invalid_argument("collect_trajectories: n_trials must be > 0");
    if (jobs == 0) jobs = 1;

    TrialBatch batch;
    batch.trajectories.resize(n_trials);
    batch.taus.resize(n_trials);

    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n_trials) return;
            try {
                GeneratedStream gs = streams(sub_seed(master_seed, i));
                batch.taus[i] = gs.truth.tau;
                batch.trajectories[i] = detector(gs.data);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(n_trials);
                return;
            }
        }
    };

    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(jobs);
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return batch;
}

std::optional<std::int64_t> alarm_time_for(const std::vector<double>& trajectory, double h) {
    for (std::size_t t = 0; t < trajectory.size(); ++t)
        if (trajectory[t] >= h) return std::int64_t(t) + 1;
    return std::nullopt;
}

TrialOutcome outcome_for(const std::vector<double>& trajectory, std::int64_t tau, double h) {
    TrialOutcome out;
    out.true_tau = tau;
    out.alarm_time = alarm_time_for(trajectory, h);
    if (out.alarm_time) {
        if (tau > 0 && *out.alarm_time >= tau)
            out.detection_delay = *out.alarm_time - tau;
        else
            out.false_alarm = true;
    }
    return out;
}

DelayStats delay_at_threshold(const TrialBatch& batch, double h) {
    DelayStats stats;
    stats.n_trials = batch.n_trials();
    double delay_sum = 0.0;
    for (std::size_t i = 0; i < batch.n_trials(); ++i) {
        TrialOutcome out = outcome_for(batch.trajectories[i], batch.taus[i], h);
        if (out.false_alarm) {
            ++stats.false_alarms;
        } else if (out.detection_delay) {
            ++stats.detections;
            delay_sum += double(*out.detection_delay);
        } else {
            ++stats.censored;
        }
    }
    if (stats.detections) stats.mean_delay = delay_sum / double(stats.detections);
    return stats;
}

double threshold_for_far(const TrialBatch& batch, double target_far) {
    if (target_far < 0.0 || target_far >= 1.0)
        throw std::invalid_argument("threshold_for_far: target_far must be in [0,1)");
    std::vector<double> pre_tau_max;
    pre_tau_max.reserve(batch.n_trials());
    for (std::size_t i = 0; i < batch.n_trials(); ++i) {
        const auto& traj = batch.trajectories[i];
        const std::int64_t tau = batch.taus[i];
        // a false alarm occurs at time t < tau, i.e. trajectory index t-1
        std::size_t limit = tau > 0 ? std::size_t(tau - 1) : traj.size();
        limit = std::min(limit, traj.size());
        double m = 0.0;
        for (std::size_t t = 0; t < limit; ++t) m = std::max(m, traj[t]);
        pre_tau_max.push_back(m);
    }
    const std::size_t allowed =
        std::size_t(std::floor(target_far * double(pre_tau_max.size())));
    std::sort(pre_tau_max.begin(), pre_tau_max.end(), std::greater<double>());
    // exceeding this value is permitted for at most `allowed` trials
    return std::nextafter(pre_tau_max[allowed], std::numeric_limits<double>::infinity());
}

FalseAlarmPeriod false_alarm_period(const TrialBatch& nominal_batch, double h) {
    FalseAlarmPeriod out;
    double sum = 0.0;
    for (const auto& traj : nominal_batch.trajectories) {
        auto at = alarm_time_for(traj, h);
        if (at) {
            ++out.alarms;
            sum += double(*at);
        } else {
            ++out.censored;
        }
    }
    if (out.alarms) out.mean_alarm_time = sum / double(out.alarms);
    return out;
}

EvalReport run_trials(const TrajectoryFn& detector, const StreamFn& streams,
                      const std::vector<double>& thresholds, std::size_t n_trials,
                      std::size_t jobs, std::uint64_t master_seed) {
    if (thresholds.empty()) throw std::invalid_argument("run_trials: no thresholds given");
    TrialBatch batch = collect_trajectories(detector, streams, n_trials, jobs, master_seed);

    EvalReport report;
    for (double h : thresholds) {
        DelayStats stats = delay_at_threshold(batch, h);
        ThresholdRow row;
        row.h = h;
        row.mean_delay = stats.mean_delay;
        row.far = stats.far();
        row.censored = stats.censored;
        row.n_trials = stats.n_trials;
        report.rows.push_back(row);
    }

    nlohmann::json meta;
    meta["n_trials"] = n_trials;
    meta["master_seed"] = master_seed;
    meta["thresholds"] = thresholds;
    report.metadata_json = meta.dump(2);
    return report;
}

void write_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "h,mean_delay,far,censored,n_trials\n";
    char buf[160];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%zu,%zu\n", r.h, r.mean_delay,
                      r.far, r.censored, r.n_trials);
        out << buf;
    }
    if (!out) throw std::runtime_error("write failed: " + path);
    std::ofstream meta(path + ".meta.json");
    if (meta && !report.metadata_json.empty()) meta << report.metadata_json << '\n';
}

std::vector<RocPoint> roc_from_scores(const std::vector<std::vector<double>>& scores,
                                      const std::vector<std::vector<char>>& truth) {
    if (scores.size() != truth.size())
        throw std::invalid_argument("roc: scores/truth trial count mismatch");
    std::vector<std::pair<double, bool>> pooled;
    std::size_t positives = 0, negatives = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i].size() != truth[i].size())
            throw std::invalid_argument("roc: scores/truth dimension mismatch");
        for (std::size_t j = 0; j < scores[i].size(); ++j) {
            bool pos = truth[i][j] != 0;
            pooled.emplace_back(scores[i][j], pos);
            (pos ? positives : negatives) += 1;
        }
    }
    if (positives == 0 || negatives == 0)
        throw std::invalid_argument("roc: need both positive and negative examples");

    std::sort(pooled.begin(), pooled.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    std::vector<RocPoint> roc;
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
        (pooled[i].second ? tp : fp) += 1;
        // emit one point per distinct score (flag rule is score >= threshold)
        if (i + 1 < pooled.size() && pooled[i + 1].first == pooled[i].first) continue;
        RocPoint p;
        p.operating_point = pooled[i].first;
        p.tpr = double(tp) / double(positives);
        p.fpr = double(fp) / double(negatives);
        roc.push_back(p);
    }
    return roc;
}

double tpr_at_fpr(const std::vector<RocPoint>& roc, double fpr_cap) {
    double best = 0.0;
    for (const auto& p : roc)
        if (p.fpr <= fpr_cap) best = std::max(best, p.tpr);
    return best;
}

void write_roc_csv(const std::vector<RocPoint>& roc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "operating_point,fpr,tpr\n";
    char buf[160];
    for (const auto& p : roc) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.operating_point, p.fpr,
                      p.tpr);
        out << buf;
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

double timing_benchmark(const TrainedModel& model, const Dataset& queries) {
    if (queries.empty()) throw std::invalid_argument("timing_benchmark: empty query set");
    DetectorState state;
    state.reset(0);
    volatile double sink = 0.0;
    auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < queries.rows(); ++i) {
        double ev = odit_evidence(model, queries.row(i));
        update_statistic(state, ev, std::numeric_limits<double>::infinity(),
                         std::int64_t(i) + 1);
        sink = sink + state.statistic_delta;
    }
    auto t1 = std::chrono::steady_clock::now();
    (void)sink;
    return std::chrono::duration<double>(t1 - t0).count() / double(queries.rows());
}

double effective_delay(double sample_delay, double sampling_period, double per_sample_overhead) {
    if (sample_delay < 0.0 || sampling_period <= 0.0 || per_sample_overhead < 0.0)
        throw std::invalid_argument("effective_delay: invalid arguments");
    return sample_delay * sampling_period + per_sample_overhead;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        double r = 0.5 * double(i + j) + 1.0;  // average rank of the tie group
        for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = r;
        i = j + 1;
    }
    return ranks;
}

} // namespace

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("spearman_rho: need two equal-length series, n >= 2");
    auto rx = average_ranks(x), ry = average_ranks(y);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= double(rx.size());
    my /= double(ry.size());
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        double a = rx[i] - mx, b = ry[i] - my;
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw std::invalid_argument("spearman_rho: constant series has no rank correlation");
    return sxy / std::sqrt(sxx * syy);
}

} // namespace odit
