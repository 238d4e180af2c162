#include "odit/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace odit {

namespace {

double total_from_result(const NeighborResult& nn, std::size_t k, std::size_t s, double gamma) {
    double L = 0.0;
    for (std::size_t n = k - s; n < k; ++n) L += std::pow(nn.distances[n], gamma);
    return L;
}

constexpr double kFallbackClamp = 1e-12;

} // namespace

double total_distance(std::span<const double> x, const Dataset& reference, std::size_t k,
                      std::size_t s, double gamma) {
    if (s < 1 || s > k) throw std::invalid_argument("total_distance: s must be in [1, k]");
    auto nn = exact_knn(x, reference, k);
    return total_from_result(nn, k, s, gamma);
}

void TrainedModel::use_approximate_backend(std::size_t branching_C, std::size_t max_iters,
                                           std::size_t B, std::uint64_t seed) {
    if (B < config.k) throw std::invalid_argument("backend: B must be >= k");
    tree = std::make_shared<KMeansTree>(
        build_kmeans_tree(partition->part2, branching_C, max_iters, seed));
    max_examined_B = B;

    // Re-rank the training distances with the approximate backend so the
    // borderline statistic is measured by the same distance oracle the
    // detector uses at query time; approximate distances are upper bounds,
    // so keeping the exactly-computed borderline would bias every evidence
    // value upward. No-split models keep the exact ranking (the tree search
    // cannot exclude the query row from its own reference set).
    // (a full search budget reproduces the exact distances, so the exact
    // ranking is already consistent)
    if (partition->no_split() || max_examined_B >= partition->part2.rows()) return;
    const Dataset& p1 = partition->part1;
    for (std::size_t m = 0; m < p1.rows(); ++m) {
        auto nn = tree->search(p1.row(m), config.k, max_examined_B, false, config.s);
        training_L[m] = total_from_result(nn, config.k, config.s, config.gamma);
    }
    std::vector<std::size_t> order(p1.rows());
    std::iota(order.begin(), order.end(), 0);
    std::nth_element(order.begin(), order.begin() + (K - 1), order.end(),
                     [&](std::size_t a, std::size_t b) {
                         return training_L[a] < training_L[b] ||
                                (training_L[a] == training_L[b] && a < b);
                     });
    borderline_row = order[K - 1];
    borderline_LK = training_L[borderline_row];
    double min_pos = 0.0;
    for (double L : training_L)
        if (L > 0.0 && (min_pos == 0.0 || L < min_pos)) min_pos = L;
    min_positive_L = min_pos;
}

NeighborResult TrainedModel::query(std::span<const double> x, bool want_decomposition) const {
    if (tree)
        return tree->search(x, config.k, max_examined_B, want_decomposition, config.s);
    return exact_knn(x, partition->part2,
                     KnnOptions{config.k, want_decomposition, config.s, SIZE_MAX});
}

double TrainedModel::test_total_distance(std::span<const double> x) const {
    double L = total_from_result(query(x), config.k, config.s, config.gamma);
    if (L <= 0.0) L = min_positive_L > 0.0 ? min_positive_L : kFallbackClamp;
    return L;
}

TrainedModel train_odit(const Dataset& nominal, const DetectorConfig& config,
                        const TrainOptions& opt) {
    config.validate();
    return train_odit(partition_dataset(nominal, config.partition_ratio,
                                        sub_seed(config.rng_seed, 0)),
                      config, opt);
}

TrainedModel train_odit(Partition partition, const DetectorConfig& config,
                        const TrainOptions& opt) {
    config.validate();
    const std::size_t n1 = partition.part1.rows();
    const std::size_t n2 = partition.part2.rows();
    const bool no_split = partition.no_split();
    const std::size_t usable = no_split ? n2 - 1 : n2;
    if (config.k > usable)
        throw std::invalid_argument("train_odit: k exceeds reference size");

    const std::size_t K = static_cast<std::size_t>(std::floor(double(n1) * (1.0 - config.alpha)));
    if (K < 1)
        throw std::invalid_argument("train_odit: alpha too large for N1 (K < 1)");

    TrainedModel model;
    model.partition = std::make_shared<Partition>(std::move(partition));
    model.config = config;
    model.K = K;
    model.training_L.resize(n1);

    const Dataset& p1 = model.partition->part1;
    const Dataset& p2 = model.partition->part2;
    const bool baseline = opt.with_localization_baseline;
    if (baseline) model.mu_baseline.assign(p1.dim(), 0.0);

    for (std::size_t m = 0; m < n1; ++m) {
        KnnOptions q{config.k, baseline, config.s, no_split ? m : SIZE_MAX};
        auto nn = exact_knn(p1.row(m), p2, q);
        model.training_L[m] = total_from_result(nn, config.k, config.s, config.gamma);
        if (baseline)
            for (std::size_t i = 0; i < p1.dim(); ++i)
                model.mu_baseline[i] += (*nn.per_dimension_sq)[i] / double(n1);
    }

    std::vector<std::size_t> order(n1);
    std::iota(order.begin(), order.end(), 0);
    std::nth_element(order.begin(), order.begin() + (K - 1), order.end(),
                     [&](std::size_t a, std::size_t b) {
                         return model.training_L[a] < model.training_L[b] ||
                                (model.training_L[a] == model.training_L[b] && a < b);
                     });
    model.borderline_row = order[K - 1];
    model.borderline_LK = model.training_L[model.borderline_row];

    double min_pos = 0.0;
    for (double L : model.training_L)
        if (L > 0.0 && (min_pos == 0.0 || L < min_pos)) min_pos = L;
    model.min_positive_L = min_pos;
    return model;
}

Dataset clean_anomaly_set(const TrainedModel& nominal_model, const Dataset& raw_anomaly) {
    if (raw_anomaly.dim() != nominal_model.reference().dim())
        throw std::invalid_argument("clean_anomaly_set: dimension mismatch");
    Dataset kept(raw_anomaly.dim(), raw_anomaly.name() + "/clean", Label::anomalous);
    const auto& cfg = nominal_model.config;
    const Dataset& ref = nominal_model.reference();
    for (std::size_t i = 0; i < raw_anomaly.rows(); ++i) {
        auto nn = exact_knn(raw_anomaly.row(i), ref, cfg.k);
        double L = total_from_result(nn, cfg.k, cfg.s, cfg.gamma);
        if (L > nominal_model.borderline_LK) kept.append_row(raw_anomaly.row(i));
    }
    if (kept.rows() == 0)
        throw std::runtime_error("clean_anomaly_set: anomaly set indistinguishable from nominal");
    return kept;
}

void Odit2Model::refresh_correction() {
    imbalance_correction =
        std::log(double(nominal_size_N) / double(anomaly_reference->rows()));
}

NeighborResult Odit2Model::anomaly_query(std::span<const double> x,
                                         bool want_decomposition) const {
    return exact_knn(x, *anomaly_reference,
                     KnnOptions{nominal.config.k, want_decomposition, nominal.config.s, SIZE_MAX});
}

double Odit2Model::anomaly_total_distance(std::span<const double> x) const {
    const auto& cfg = nominal.config;
    double L = total_from_result(anomaly_query(x), cfg.k, cfg.s, cfg.gamma);
    if (L <= 0.0)
        L = nominal.min_positive_L > 0.0 ? nominal.min_positive_L : kFallbackClamp;
    return L;
}

Odit2Model make_odit2(TrainedModel nominal, const Dataset& raw_anomaly,
                      const Odit2Options& opt) {
    if (raw_anomaly.rows() == 0)
        throw std::invalid_argument("make_odit2: empty anomaly set");
    Odit2Model model;
    model.nominal_size_N = nominal.nominal_size();
    model.anomaly_reference = std::make_shared<Dataset>(
        opt.clean ? clean_anomaly_set(nominal, raw_anomaly) : raw_anomaly);
    model.anomaly_reference->set_label(Label::anomalous);
    if (model.anomaly_reference->rows() < nominal.config.k)
        throw std::invalid_argument("make_odit2: anomaly reference smaller than k");
    model.nominal = std::move(nominal);
    model.refresh_correction();

    if (opt.with_localization_baseline) {
        if (model.nominal.mu_baseline.empty())
            throw std::invalid_argument(
                "make_odit2: nominal model lacks a localization baseline");
        const Dataset& p1 = model.nominal.partition->part1;
        std::vector<double> mean_dp(p1.dim(), 0.0);
        for (std::size_t m = 0; m < p1.rows(); ++m) {
            auto nn = model.anomaly_query(p1.row(m), true);
            for (std::size_t i = 0; i < p1.dim(); ++i)
                mean_dp[i] += (*nn.per_dimension_sq)[i] / double(p1.rows());
        }
        model.mu_baseline.resize(p1.dim());
        for (std::size_t i = 0; i < p1.dim(); ++i)
            model.mu_baseline[i] = model.nominal.mu_baseline[i] - mean_dp[i];
    }
    return model;
}

double odit_evidence(const TrainedModel& model, std::span<const double> x) {
    if (x.size() != model.reference().dim())
        throw std::invalid_argument("odit_evidence: dimension mismatch");
    double L = model.test_total_distance(x);
    double LK = model.borderline_LK;
    if (LK <= 0.0) LK = model.min_positive_L > 0.0 ? model.min_positive_L : kFallbackClamp;
    return double(x.size()) * (std::log(L) - std::log(LK));
}

double odit2_evidence(const Odit2Model& model, std::span<const double> x) {
    if (x.size() != model.nominal.reference().dim())
        throw std::invalid_argument("odit2_evidence: dimension mismatch");
    double L = model.nominal.test_total_distance(x);
    double Lp = model.anomaly_total_distance(x);
    return double(x.size()) * (std::log(L) - std::log(Lp)) + model.imbalance_correction;
}

void update_statistic(DetectorState& state, double evidence, double h, std::int64_t t) {
    state.statistic_delta = std::max(state.statistic_delta + evidence, 0.0);
    if (state.statistic_delta == 0.0) state.last_zero_time = t;
    if (!state.alarm && state.statistic_delta >= h) {
        state.alarm = true;
        state.alarm_time = t;
    }
}

namespace {

template <typename EvidenceFn>
DetectorState run_loop(const Dataset& stream, double h, const RunOptions& opt,
                       EvidenceFn&& evidence_at) {
    DetectorState state;
    state.reset(opt.start_time - 1);
    state.evidence_log.reserve(stream.rows());
    for (std::size_t i = 0; i < stream.rows(); ++i) {
        const std::int64_t t = opt.start_time + std::int64_t(i);
        EvidenceRecord rec;
        rec.t = t;
        rec.evidence = evidence_at(i, rec.contributions);
        update_statistic(state, rec.evidence, h, t);
        rec.delta = state.statistic_delta;
        rec.alarm = state.alarm;
        state.evidence_log.push_back(std::move(rec));
        if (state.alarm && opt.stop_at_alarm) break;
    }
    return state;
}

} // namespace

DetectorState run_detector(const TrainedModel& model, const Dataset& stream, double h,
                           const RunOptions& opt) {
    const auto& cfg = model.config;
    return run_loop(stream, h, opt, [&](std::size_t i, std::vector<double>& contrib) {
        if (!opt.record_contributions) return odit_evidence(model, stream.row(i));
        auto nn = model.query(stream.row(i), true);
        contrib = std::move(*nn.per_dimension_sq);
        double L = total_from_result(nn, cfg.k, cfg.s, cfg.gamma);
        if (L <= 0.0)
            L = model.min_positive_L > 0.0 ? model.min_positive_L : kFallbackClamp;
        double LK = model.borderline_LK;
        if (LK <= 0.0) LK = model.min_positive_L > 0.0 ? model.min_positive_L : kFallbackClamp;
        return double(stream.dim()) * (std::log(L) - std::log(LK));
    });
}

DetectorState run_detector(const Odit2Model& model, const Dataset& stream, double h,
                           const RunOptions& opt) {
    const auto& cfg = model.nominal.config;
    return run_loop(stream, h, opt, [&](std::size_t i, std::vector<double>& contrib) {
        if (!opt.record_contributions) return odit2_evidence(model, stream.row(i));
        auto nn = model.nominal.query(stream.row(i), true);
        auto nnp = model.anomaly_query(stream.row(i), true);
        double L = total_from_result(nn, cfg.k, cfg.s, cfg.gamma);
        double Lp = total_from_result(nnp, cfg.k, cfg.s, cfg.gamma);
        if (L <= 0.0)
            L = model.nominal.min_positive_L > 0.0 ? model.nominal.min_positive_L
                                                   : kFallbackClamp;
        if (Lp <= 0.0)
            Lp = model.nominal.min_positive_L > 0.0 ? model.nominal.min_positive_L
                                                    : kFallbackClamp;
        contrib.resize(stream.dim());
        for (std::size_t j = 0; j < stream.dim(); ++j)
            contrib[j] = (*nn.per_dimension_sq)[j] - (*nnp.per_dimension_sq)[j];
        return double(stream.dim()) * (std::log(L) - std::log(Lp)) +
               model.imbalance_correction;
    });
}

UniResult run_odit_uni(const TrainedModel& odit, Odit2Model& odit2, const Dataset& stream,
                       double h1, double h2, const UniOptions& opt) {
    UniResult res;
    res.odit_state.reset(opt.start_time - 1);
    res.odit2_state.reset(opt.start_time - 1);
    std::int64_t stop_t = -1;
    for (std::size_t i = 0; i < stream.rows(); ++i) {
        const std::int64_t t = opt.start_time + std::int64_t(i);
        auto x = stream.row(i);

        EvidenceRecord r1;
        r1.t = t;
        r1.evidence = odit_evidence(odit, x);
        update_statistic(res.odit_state, r1.evidence, h1, t);
        r1.delta = res.odit_state.statistic_delta;
        r1.alarm = res.odit_state.alarm;
        res.odit_state.evidence_log.push_back(std::move(r1));

        EvidenceRecord r2;
        r2.t = t;
        r2.evidence = odit2_evidence(odit2, x);
        update_statistic(res.odit2_state, r2.evidence, h2, t);
        r2.delta = res.odit2_state.statistic_delta;
        r2.alarm = res.odit2_state.alarm;
        res.odit2_state.evidence_log.push_back(std::move(r2));

        if (res.odit_state.alarm || res.odit2_state.alarm) {
            stop_t = t;
            break;
        }
    }
    if (stop_t < 0) return res;

    // a simultaneous stop counts as an ODIT-2 detection (known anomaly type)
    res.stopped_by_odit = res.odit_state.alarm && !res.odit2_state.alarm;
    if (res.stopped_by_odit) {
        const std::int64_t tau_hat = res.odit_state.last_zero_time;
        Dataset detected(stream.dim(), "augmented", Label::anomalous);
        for (std::int64_t t = tau_hat + 1; t <= stop_t; ++t) {
            std::size_t i = std::size_t(t - opt.start_time);
            detected.append_row(stream.row(i));
        }
        if (opt.reclean_augmented && detected.rows() > 0) {
            Dataset filtered(stream.dim(), "augmented", Label::anomalous);
            const auto& cfg = odit2.nominal.config;
            for (std::size_t i = 0; i < detected.rows(); ++i) {
                double L = total_distance(detected.row(i), odit2.nominal.reference(), cfg.k,
                                          cfg.s, cfg.gamma);
                if (L > odit2.nominal.borderline_LK) filtered.append_row(detected.row(i));
            }
            detected = std::move(filtered);
        }
        if (detected.rows() > 0) {
            odit2.anomaly_reference->append_rows(detected);
            odit2.refresh_correction();
            res.augmented_count = detected.rows();
        }
    }
    return res;
}

} // namespace odit
