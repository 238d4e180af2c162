#include "odit/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace odit {

void CorrelationScenario::validate() const {
    if (d < 2) throw std::invalid_argument("correlation scenario: d must be >= 2");
    if (sigma <= 0) throw std::invalid_argument("correlation scenario: sigma must be positive");
    if (rho <= -1.0 || rho >= 1.0)
        throw std::invalid_argument("correlation scenario: rho must be in (-1,1)");
    if (affected_fraction <= 0 || affected_fraction > 1)
        throw std::invalid_argument("correlation scenario: affected_fraction must be in (0,1]");
    const std::size_t m = affected_set().size();
    const std::size_t b = block_size == 0 ? m : std::min(block_size, m);
    if (b >= 2 && 1.0 + (double(b) - 1.0) * rho <= 0.0)
        throw std::invalid_argument("correlation scenario: block covariance not PSD");
    if (horizon < 1) throw std::invalid_argument("correlation scenario: horizon must be >= 1");
}

std::vector<std::size_t> CorrelationScenario::affected_set() const {
    if (affected_override) return *affected_override;
    const std::size_t m =
        std::max<std::size_t>(1, std::size_t(std::llround(affected_fraction * double(d))));
    auto order = shuffled_indices(d, affected_set_seed);
    std::vector<std::size_t> set(order.begin(), order.begin() + m);
    std::sort(set.begin(), set.end());
    return set;
}

namespace {

/// Samples one post-change observation: the affected dimensions get an
/// equicorrelated structure (rho off-diagonal, unit diagonal before the
/// sigma scaling) within each sub-block, off-block dimensions stay
/// independent. The structure is realized through a Cholesky factor of the
/// (block-diagonal) m x m correlation matrix.
struct CorrelatedSampler {
    const CorrelationScenario& sc;
    std::vector<std::size_t> block;
    std::vector<double> chol;  // m x m lower triangle, row-major
    mutable std::vector<double> z;

    explicit CorrelatedSampler(const CorrelationScenario& s) : sc(s), block(s.affected_set()) {
        const std::size_t m = block.size();
        const std::size_t b = sc.block_size == 0 ? m : sc.block_size;
        chol.assign(m * m, 0.0);
        std::vector<double> a(m * m, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                a[i * m + j] = i == j ? 1.0 : (i / b == j / b ? sc.rho : 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double sum = a[i * m + j];
                for (std::size_t q = 0; q < j; ++q) sum -= chol[i * m + q] * chol[j * m + q];
                if (i == j) {
                    if (sum <= 0.0)
                        throw std::invalid_argument("correlation scenario: block not PSD");
                    chol[i * m + i] = std::sqrt(sum);
                } else {
                    chol[i * m + j] = sum / chol[j * m + j];
                }
            }
        }
        z.resize(m);
    }

    void sample(std::mt19937_64& rng, std::normal_distribution<double>& gauss,
                std::vector<double>& out) const {
        const std::size_t m = block.size();
        for (std::size_t i = 0; i < sc.d; ++i) out[i] = sc.mu + sc.sigma * gauss(rng);
        for (std::size_t i = 0; i < m; ++i) z[i] = gauss(rng);
        for (std::size_t i = 0; i < m; ++i) {
            double u = 0.0;
            for (std::size_t q = 0; q <= i; ++q) u += chol[i * m + q] * z[q];
            out[block[i]] = sc.mu + sc.sigma * u;
        }
    }
};

} // namespace

GeneratedStream gen_correlation_stream(const CorrelationScenario& sc, std::uint64_t seed) {
    sc.validate();
    GeneratedStream out;
    out.data = Dataset(sc.d, "correlation_stream");
    out.truth.tau = sc.change_time_tau;
    out.truth.affected = sc.affected_set();

    CorrelatedSampler sampler(sc);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::vector<double> row(sc.d);
    out.data.reserve(std::size_t(sc.horizon));
    for (std::int64_t t = 1; t <= sc.horizon; ++t) {
        if (t < sc.change_time_tau) {
            for (std::size_t i = 0; i < sc.d; ++i) row[i] = sc.mu + sc.sigma * gauss(rng);
        } else {
            sampler.sample(rng, gauss, row);
        }
        out.data.append_row(row);
    }
    return out;
}

Dataset correlation_nominal(const CorrelationScenario& sc, std::size_t n, std::uint64_t seed) {
    sc.validate();
    Dataset out(sc.d, "correlation_nominal", Label::nominal);
    out.reserve(n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::vector<double> row(sc.d);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t i = 0; i < sc.d; ++i) row[i] = sc.mu + sc.sigma * gauss(rng);
        out.append_row(row);
    }
    return out;
}

Dataset correlation_anomaly(const CorrelationScenario& sc, std::size_t n, std::uint64_t seed) {
    sc.validate();
    Dataset out(sc.d, "correlation_anomaly", Label::anomalous);
    out.reserve(n);
    CorrelatedSampler sampler(sc);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::vector<double> row(sc.d);
    for (std::size_t t = 0; t < n; ++t) {
        sampler.sample(rng, gauss, row);
        out.append_row(row);
    }
    return out;
}

CorrelationScenario gen_mismatch_variant(const CorrelationScenario& sc, std::size_t overlap) {
    auto original = sc.affected_set();
    if (overlap > original.size())
        throw std::invalid_argument("mismatch variant: overlap exceeds affected set size");
    const std::size_t fresh_needed = original.size() - overlap;
    std::vector<std::size_t> complement;
    std::vector<char> in_set(sc.d, 0);
    for (auto i : original) in_set[i] = 1;
    for (std::size_t i = 0; i < sc.d; ++i)
        if (!in_set[i]) complement.push_back(i);
    if (fresh_needed > complement.size())
        throw std::invalid_argument("mismatch variant: not enough unaffected dimensions");

    auto keep_order = shuffled_indices(original.size(), sc.affected_set_seed + 1);
    auto fresh_order = shuffled_indices(complement.size(), sc.affected_set_seed + 2);
    std::vector<std::size_t> chosen;
    for (std::size_t i = 0; i < overlap; ++i) chosen.push_back(original[keep_order[i]]);
    for (std::size_t i = 0; i < fresh_needed; ++i) chosen.push_back(complement[fresh_order[i]]);
    std::sort(chosen.begin(), chosen.end());

    CorrelationScenario variant = sc;
    variant.affected_override = std::move(chosen);
    return variant;
}

// --- DDoS ----------------------------------------------------------------

void DdosScenario::validate() const {
    if (d < 1) throw std::invalid_argument("ddos scenario: d must be >= 1");
    if (bimodal_fraction < 0 || bimodal_fraction > 1)
        throw std::invalid_argument("ddos scenario: bimodal_fraction must be in [0,1]");
    if (sigma2 <= 0) throw std::invalid_argument("ddos scenario: sigma2 must be positive");
    auto check_range = [](std::pair<double, double> r, const char* name) {
        if (r.first > r.second)
            throw std::invalid_argument(std::string("ddos scenario: bad range ") + name);
    };
    check_range(inactive_mean_range, "inactive_mean_range");
    check_range(active_mean_range, "active_mean_range");
    check_range(single_mean_range, "single_mean_range");
    for (auto i : compromised_set)
        if (i >= d) throw std::invalid_argument("ddos scenario: compromised index out of range");
    if (horizon < 1) throw std::invalid_argument("ddos scenario: horizon must be >= 1");
}

DeviceProfile ddos_profile(const DdosScenario& sc) {
    sc.validate();
    DeviceProfile p;
    p.bimodal.assign(sc.d, false);
    p.mean_inactive.resize(sc.d);
    p.mean_active.resize(sc.d);
    p.sigma = std::sqrt(sc.sigma2);

    const std::size_t n_bimodal = std::size_t(std::llround(sc.bimodal_fraction * double(sc.d)));
    auto order = shuffled_indices(sc.d, sc.profile_seed);
    for (std::size_t i = 0; i < n_bimodal; ++i) p.bimodal[order[i]] = true;

    std::mt19937_64 rng(sub_seed(sc.profile_seed, 1));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto draw = [&](std::pair<double, double> r) {
        return r.first + (r.second - r.first) * u01(rng);
    };
    for (std::size_t i = 0; i < sc.d; ++i) {
        if (p.bimodal[i]) {
            p.mean_inactive[i] = draw(sc.inactive_mean_range);
            p.mean_active[i] = draw(sc.active_mean_range);
        } else {
            p.mean_inactive[i] = p.mean_active[i] = draw(sc.single_mean_range);
        }
    }
    return p;
}

namespace {

void ddos_sample(const DdosScenario& sc, const DeviceProfile& p, bool attacking,
                 const std::vector<char>& compromised, std::mt19937_64& rng,
                 std::normal_distribution<double>& gauss,
                 std::uniform_real_distribution<double>& u01, std::vector<double>& out) {
    for (std::size_t i = 0; i < sc.d; ++i) {
        double mean = p.mean_inactive[i];
        if (p.bimodal[i] && u01(rng) < 0.5) mean = p.mean_active[i];
        if (attacking && compromised[i]) mean += sc.attack_shift_sigmas * p.sigma;
        out[i] = mean + p.sigma * gauss(rng);
    }
}

std::vector<char> compromised_mask(const DdosScenario& sc) {
    std::vector<char> mask(sc.d, 0);
    for (auto i : sc.compromised_set) mask[i] = 1;
    return mask;
}

} // namespace

GeneratedStream gen_ddos_stream(const DdosScenario& sc, std::uint64_t seed) {
    auto profile = ddos_profile(sc);
    auto mask = compromised_mask(sc);
    GeneratedStream out;
    out.data = Dataset(sc.d, "ddos_stream");
    out.truth.tau = sc.change_time_tau;
    out.truth.affected = sc.compromised_set;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<double> row(sc.d);
    out.data.reserve(std::size_t(sc.horizon));
    for (std::int64_t t = 1; t <= sc.horizon; ++t) {
        ddos_sample(sc, profile, t >= sc.change_time_tau, mask, rng, gauss, u01, row);
        out.data.append_row(row);
    }
    return out;
}

Dataset ddos_nominal(const DdosScenario& sc, std::size_t n, std::uint64_t seed) {
    auto profile = ddos_profile(sc);
    auto mask = compromised_mask(sc);
    Dataset out(sc.d, "ddos_nominal", Label::nominal);
    out.reserve(n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<double> row(sc.d);
    for (std::size_t t = 0; t < n; ++t) {
        ddos_sample(sc, profile, false, mask, rng, gauss, u01, row);
        out.append_row(row);
    }
    return out;
}

Dataset ddos_anomaly(const DdosScenario& sc, std::size_t n, std::uint64_t seed) {
    auto profile = ddos_profile(sc);
    auto mask = compromised_mask(sc);
    Dataset out(sc.d, "ddos_anomaly", Label::anomalous);
    out.reserve(n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<double> row(sc.d);
    for (std::size_t t = 0; t < n; ++t) {
        ddos_sample(sc, profile, true, mask, rng, gauss, u01, row);
        out.append_row(row);
    }
    return out;
}

// --- JSON ----------------------------------------------------------------

namespace {

using nlohmann::json;

json correlation_to_json(const CorrelationScenario& sc) {
    json j;
    j["type"] = "correlation";
    j["d"] = sc.d;
    j["mu"] = sc.mu;
    j["sigma"] = sc.sigma;
    j["rho"] = sc.rho;
    j["affected_fraction"] = sc.affected_fraction;
    j["block_size"] = sc.block_size;
    j["change_time_tau"] = sc.change_time_tau;
    j["horizon"] = sc.horizon;
    j["affected_set_seed"] = sc.affected_set_seed;
    if (sc.affected_override) j["affected_override"] = *sc.affected_override;
    return j;
}

json ddos_to_json(const DdosScenario& sc) {
    json j;
    j["type"] = "ddos";
    j["d"] = sc.d;
    j["bimodal_fraction"] = sc.bimodal_fraction;
    j["inactive_mean_range"] = {sc.inactive_mean_range.first, sc.inactive_mean_range.second};
    j["active_mean_range"] = {sc.active_mean_range.first, sc.active_mean_range.second};
    j["single_mean_range"] = {sc.single_mean_range.first, sc.single_mean_range.second};
    j["sigma2"] = sc.sigma2;
    j["attack_shift_sigmas"] = sc.attack_shift_sigmas;
    j["compromised_set"] = sc.compromised_set;
    j["change_time_tau"] = sc.change_time_tau;
    j["horizon"] = sc.horizon;
    j["profile_seed"] = sc.profile_seed;
    return j;
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::pair<double, double> range_from(const json& j) {
    if (!j.is_array() || j.size() != 2) throw std::invalid_argument("scenario: range needs 2 values");
    return {j[0].get<double>(), j[1].get<double>()};
}

} // namespace

ScenarioSpec scenario_from_json_text(const std::string& text) {
    json j = json::parse(text);
    const std::string type = j.at("type").get<std::string>();
    if (type == "correlation") {
        CorrelationScenario sc;
        maybe(j, "d", sc.d);
        maybe(j, "mu", sc.mu);
        maybe(j, "sigma", sc.sigma);
        maybe(j, "rho", sc.rho);
        maybe(j, "affected_fraction", sc.affected_fraction);
        maybe(j, "block_size", sc.block_size);
        maybe(j, "change_time_tau", sc.change_time_tau);
        maybe(j, "horizon", sc.horizon);
        maybe(j, "affected_set_seed", sc.affected_set_seed);
        if (j.contains("affected_override"))
            sc.affected_override = j.at("affected_override").get<std::vector<std::size_t>>();
        sc.validate();
        return sc;
    }
    if (type == "ddos") {
        DdosScenario sc;
        maybe(j, "d", sc.d);
        maybe(j, "bimodal_fraction", sc.bimodal_fraction);
        if (j.contains("inactive_mean_range")) sc.inactive_mean_range = range_from(j["inactive_mean_range"]);
        if (j.contains("active_mean_range")) sc.active_mean_range = range_from(j["active_mean_range"]);
        if (j.contains("single_mean_range")) sc.single_mean_range = range_from(j["single_mean_range"]);
        maybe(j, "sigma2", sc.sigma2);
        maybe(j, "attack_shift_sigmas", sc.attack_shift_sigmas);
        maybe(j, "compromised_set", sc.compromised_set);
        maybe(j, "change_time_tau", sc.change_time_tau);
        maybe(j, "horizon", sc.horizon);
        maybe(j, "profile_seed", sc.profile_seed);
        sc.validate();
        return sc;
    }
    throw std::invalid_argument("scenario: unknown type '" + type + "'");
}

std::string scenario_to_json_text(const ScenarioSpec& sc) {
    return std::visit(
               [](const auto& s) {
                   if constexpr (std::is_same_v<std::decay_t<decltype(s)>, CorrelationScenario>)
                       return correlation_to_json(s);
                   else
                       return ddos_to_json(s);
               },
               sc)
        .dump(2);
}

GeneratedStream gen_stream(const ScenarioSpec& sc, std::uint64_t seed) {
    return std::visit(
        [&](const auto& s) {
            if constexpr (std::is_same_v<std::decay_t<decltype(s)>, CorrelationScenario>)
                return gen_correlation_stream(s, seed);
            else
                return gen_ddos_stream(s, seed);
        },
        sc);
}

std::int64_t scenario_horizon(const ScenarioSpec& sc) {
    return std::visit([](const auto& s) { return s.horizon; }, sc);
}

std::int64_t scenario_tau(const ScenarioSpec& sc) {
    return std::visit([](const auto& s) { return s.change_time_tau; }, sc);
}

} // namespace odit
