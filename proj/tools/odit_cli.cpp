#include <chrono>
#include <cinttypes>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "odit/baselines.hpp"
#include "odit/core.hpp"
#include "odit/detectors.hpp"
#include "odit/eval.hpp"
#include "odit/localization.hpp"
#include "odit/scenarios.hpp"

namespace {

constexpr const char* kToolVersion = "0.1.0";
constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitAlarm = 2;

using nlohmann::json;

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_manifest(const std::string& primary_output, const std::string& command,
                    const std::string& config_path, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, std::uint64_t seed) {
    json m;
    m["command"] = command;
    m["config"] = config_path;
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["seed"] = seed;
    auto now = std::chrono::system_clock::now();
    std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
    m["timestamp"] = buf;
    m["version"] = kToolVersion;
    std::ofstream out(primary_output + ".manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest for: " + primary_output);
    out << m.dump(2) << '\n';
}

// Model files store the partition as row indices into the training CSV plus
// a content hash, not data copies; loading re-reads the CSV and fails on a
// hash mismatch.
void save_model(const odit::TrainedModel& m, const std::string& csv_path, bool has_header,
                const std::string& out_path) {
    json j;
    j["format"] = "odit-model";
    j["version"] = kToolVersion;
    j["config"] = json::parse(odit::config_to_json_text(m.config));
    j["csv_path"] = csv_path;
    j["csv_has_header"] = has_header;
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016" PRIx64, odit::fnv1a_file(csv_path));
    j["csv_fnv1a"] = hash;
    j["ratio"] = m.partition->ratio;
    j["part1_indices"] = m.partition->part1_indices;
    j["part2_indices"] = m.partition->part2_indices;
    j["K"] = m.K;
    j["borderline_LK"] = m.borderline_LK;
    j["borderline_row"] = m.borderline_row;
    j["min_positive_L"] = m.min_positive_L;
    j["mu_baseline"] = m.mu_baseline;
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open for writing: " + out_path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + out_path);
}

odit::TrainedModel load_model(const std::string& model_path) {
    json j = json::parse(read_text_file(model_path));
    if (j.value("format", "") != "odit-model")
        throw std::runtime_error("not a model file: " + model_path);
    const std::string csv_path = j.at("csv_path").get<std::string>();
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016" PRIx64, odit::fnv1a_file(csv_path));
    if (j.at("csv_fnv1a").get<std::string>() != hash)
        throw std::runtime_error("training CSV changed since the model was written: " +
                                 csv_path);
    odit::Dataset full = odit::load_csv(csv_path, j.value("csv_has_header", false));

    auto part = std::make_shared<odit::Partition>();
    part->ratio = j.at("ratio").get<double>();
    part->part1_indices = j.at("part1_indices").get<std::vector<std::size_t>>();
    part->part2_indices = j.at("part2_indices").get<std::vector<std::size_t>>();
    part->part1 = odit::Dataset(full.dim(), "part1");
    part->part2 = odit::Dataset(full.dim(), "part2");
    for (std::size_t i : part->part1_indices) part->part1.append_row(full.row(i));
    for (std::size_t i : part->part2_indices) part->part2.append_row(full.row(i));

    odit::TrainedModel m;
    m.partition = std::move(part);
    m.config = odit::config_from_json_text(j.at("config").dump());
    m.K = j.at("K").get<std::size_t>();
    m.borderline_LK = j.at("borderline_LK").get<double>();
    m.borderline_row = j.at("borderline_row").get<std::size_t>();
    m.min_positive_L = j.at("min_positive_L").get<double>();
    m.mu_baseline = j.value("mu_baseline", std::vector<double>{});
    return m;
}

/// Incremental CSV reader so detection keeps bounded memory on long streams.
class CsvStream {
public:
    CsvStream(const std::string& path, bool has_header) : in_(path) {
        if (!in_) throw std::runtime_error("cannot open: " + path);
        if (has_header) {
            std::string line;
            std::getline(in_, line);
            ++line_no_;
        }
    }

    bool next(std::vector<double>& row) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (line.empty()) continue;
            row.clear();
            std::size_t pos = 0;
            while (pos <= line.size()) {
                std::size_t comma = line.find(',', pos);
                std::size_t end = comma == std::string::npos ? line.size() : comma;
                double v = 0.0;
                auto [p, ec] = std::from_chars(line.data() + pos, line.data() + end, v);
                if (ec != std::errc{} || p != line.data() + end)
                    throw std::runtime_error("bad number at line " + std::to_string(line_no_));
                row.push_back(v);
                if (comma == std::string::npos) break;
                pos = comma + 1;
            }
            return true;
        }
        return false;
    }

private:
    std::ifstream in_;
    std::size_t line_no_ = 0;
};

struct GlobalOpts {
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
    std::string config_path;
};

int cmd_train(const GlobalOpts& g, const std::string& nominal_csv, const std::string& model_out,
              bool has_header, bool with_baseline) {
    odit::DetectorConfig cfg;
    if (!g.config_path.empty())
        cfg = odit::config_from_json_text(read_text_file(g.config_path));
    cfg.rng_seed = g.seed;
    cfg.validate();

    odit::Dataset nominal = odit::load_csv(nominal_csv, has_header);
    odit::TrainOptions topt;
    topt.with_localization_baseline = with_baseline;
    odit::TrainedModel model = odit::train_odit(nominal, cfg, topt);
    save_model(model, nominal_csv, has_header, model_out);
    write_manifest(model_out, "train", g.config_path, {nominal_csv}, {model_out}, g.seed);
    std::cout << "trained: N=" << nominal.rows() << " K=" << model.K
              << " L_(K)=" << model.borderline_LK << '\n';
    return kExitOk;
}

int cmd_detect(const GlobalOpts& g, const std::string& model_path, const std::string& stream_csv,
               double h, const std::string& variant, const std::string& anomaly_csv,
               bool has_header, const std::string& event_log_out,
               std::optional<std::pair<std::size_t, double>> localize_args,
               const std::string& localization_out) {
    odit::TrainedModel model = load_model(model_path);
    const bool record = localize_args.has_value();

    std::optional<odit::Odit2Model> odit2;
    if (variant == "odit2" || variant == "uni") {
        if (anomaly_csv.empty())
            throw std::runtime_error("variant '" + variant + "' needs --anomaly-csv");
        odit::Dataset raw = odit::load_csv(anomaly_csv, has_header);
        odit::Odit2Options o2;
        o2.with_localization_baseline = record;
        odit2 = odit::make_odit2(model, raw, o2);
    } else if (variant != "odit") {
        throw std::runtime_error("unknown variant: " + variant);
    }

    if (variant == "uni") {
        // the lockstep variant needs both statistics over the same horizon;
        // read the stream in one go
        odit::Dataset stream_all = odit::load_csv(stream_csv, has_header);
        odit::UniOptions uo;
        uo.record_contributions = record;
        odit::UniResult res = odit::run_odit_uni(model, *odit2, stream_all, h, h, uo);
        const odit::DetectorState& winner =
            res.stopped_by_odit ? res.odit_state : res.odit2_state;
        if (!event_log_out.empty()) {
            std::ofstream log(event_log_out);
            if (!log) throw std::runtime_error("cannot open for writing: " + event_log_out);
            log << "t,evidence,delta,alarm\n";
            char buf[96];
            for (const auto& rec : res.odit2_state.evidence_log) {
                std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%d\n", (long long)rec.t,
                              rec.evidence, rec.delta, int(rec.alarm));
                log << buf;
            }
            write_manifest(event_log_out, "detect", g.config_path, {model_path, stream_csv},
                           {event_log_out}, g.seed);
        }
        if (winner.alarm) {
            std::cout << "alarm at t=" << *winner.alarm_time
                      << (res.stopped_by_odit ? " (semi-supervised side)" : "")
                      << ", anomaly reference grew by " << res.augmented_count << '\n';
            return kExitAlarm;
        }
        std::cout << "no alarm in " << stream_all.rows() << " samples\n";
        return kExitOk;
    }

    std::ofstream log;
    if (!event_log_out.empty()) {
        log.open(event_log_out);
        if (!log) throw std::runtime_error("cannot open for writing: " + event_log_out);
        log << "t,evidence,delta,alarm\n";
    }

    // Streams one sample at a time. Past an alarm we keep reading only while
    // the localization window still needs samples.
    odit::DetectorState state;
    state.reset(0);
    CsvStream stream(stream_csv, has_header);
    std::vector<double> row;
    std::int64_t t = 0;
    const std::size_t S = record ? localize_args->first : 0;
    while (stream.next(row)) {
        ++t;
        if (row.size() != model.reference().dim())
            throw std::runtime_error("stream dimension mismatch at t=" + std::to_string(t));
        double ev;
        std::vector<double> contributions;
        if (variant == "odit2") {
            if (record) {
                auto nn = model.query(row, true);
                auto an = odit2->anomaly_query(row, true);
                for (std::size_t i = 0; i < row.size(); ++i)
                    contributions.push_back((*nn.per_dimension_sq)[i] -
                                            (*an.per_dimension_sq)[i]);
            }
            ev = odit::odit2_evidence(*odit2, row);
        } else {
            if (record) {
                auto nn = model.query(row, true);
                contributions = *nn.per_dimension_sq;
            }
            ev = odit::odit_evidence(model, row);
        }
        bool was_alarmed = state.alarm;
        odit::update_statistic(state, ev, h, t);
        if (record) {
            odit::EvidenceRecord rec;
            rec.t = t;
            rec.evidence = ev;
            rec.delta = state.statistic_delta;
            rec.alarm = state.alarm;
            rec.contributions = std::move(contributions);
            state.evidence_log.push_back(std::move(rec));
        }
        if (log) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%d\n", (long long)t, ev,
                          state.statistic_delta, int(state.alarm));
            log << buf;
        }
        if (state.alarm) {
            if (!record) break;
            // keep consuming until S post-onset samples are available
            if (std::int64_t(t) >= state.last_zero_time + std::int64_t(S)) break;
        }
        (void)was_alarmed;
    }

    if (!event_log_out.empty())
        write_manifest(event_log_out, "detect", g.config_path, {model_path, stream_csv},
                       {event_log_out}, g.seed);

    if (state.alarm) {
        std::cout << "alarm at t=" << *state.alarm_time << '\n';
        if (record) {
            odit::LocalizationConfig lc{localize_args->first, localize_args->second};
            odit::LocalizationReport rep =
                variant == "odit2" ? odit::localize(*odit2, state, lc)
                                   : odit::localize(model, state, lc);
            for (const auto& f : rep.per_dimension)
                if (f.flagged) std::cout << "anomalous dimension " << f.dimension << '\n';
            if (!localization_out.empty()) odit::write_report_csv(rep, localization_out);
        }
        return kExitAlarm;
    }
    std::cout << "no alarm in " << t << " samples\n";
    return kExitOk;
}

int cmd_simulate(const GlobalOpts& g, const std::string& scenario_json,
                 const std::string& out_csv) {
    odit::ScenarioSpec spec = odit::scenario_from_json_text(read_text_file(scenario_json));
    odit::GeneratedStream gs = odit::gen_stream(spec, g.seed);
    odit::write_csv(gs.data, out_csv);
    json truth;
    truth["tau"] = gs.truth.tau;
    truth["affected"] = gs.truth.affected;
    std::ofstream side(out_csv + ".truth.json");
    if (!side) throw std::runtime_error("cannot write sidecar for: " + out_csv);
    side << truth.dump(2) << '\n';
    write_manifest(out_csv, "simulate", g.config_path, {scenario_json},
                   {out_csv, out_csv + ".truth.json"}, g.seed);
    std::cout << "wrote " << gs.data.rows() << "x" << gs.data.dim() << " stream, tau="
              << gs.truth.tau << '\n';
    return kExitOk;
}

odit::TrajectoryFn make_trajectory_fn(const json& det, const odit::ScenarioSpec& spec,
                                      std::uint64_t train_seed) {
    const std::string type = det.at("type").get<std::string>();
    const std::size_t train_size = det.value("train_size", std::size_t{2000});

    auto nominal_training = [&](std::uint64_t seed) {
        if (const auto* c = std::get_if<odit::CorrelationScenario>(&spec))
            return odit::correlation_nominal(*c, train_size, seed);
        return odit::ddos_nominal(std::get<odit::DdosScenario>(spec), train_size, seed);
    };

    if (type == "odit" || type == "odit2") {
        odit::DetectorConfig cfg;
        if (det.contains("config")) cfg = odit::config_from_json_text(det["config"].dump());
        cfg.rng_seed = train_seed;
        odit::Dataset nominal = nominal_training(odit::sub_seed(train_seed, 1));
        odit::TrainedModel model = odit::train_odit(nominal, cfg);
        if (type == "odit")
            return [m = std::make_shared<odit::TrainedModel>(std::move(model))](
                       const odit::Dataset& stream) { return odit_trajectory(*m, stream); };
        const std::size_t anomaly_size = det.value("anomaly_size", std::size_t{2000});
        odit::Dataset raw =
            std::holds_alternative<odit::CorrelationScenario>(spec)
                ? odit::correlation_anomaly(std::get<odit::CorrelationScenario>(spec),
                                            anomaly_size, odit::sub_seed(train_seed, 2))
                : odit::ddos_anomaly(std::get<odit::DdosScenario>(spec), anomaly_size,
                                     odit::sub_seed(train_seed, 2));
        odit::Odit2Options o2;
        o2.clean = det.value("clean", true);
        auto m2 = std::make_shared<odit::Odit2Model>(
            odit::make_odit2(std::move(model), raw, o2));
        return [m2](const odit::Dataset& stream) { return odit2_trajectory(*m2, stream); };
    }
    if (type == "gcusum") {
        odit::Dataset nominal = nominal_training(odit::sub_seed(train_seed, 1));
        auto base = std::make_shared<odit::GCusum>(
            odit::GCusum::from_training(nominal, det.value("assumed_shift", 3.0)));
        return [base](const odit::Dataset& stream) {
            odit::GCusum g = *base;
            g.reset();
            std::vector<double> traj;
            traj.reserve(stream.rows());
            for (std::size_t t = 0; t < stream.rows(); ++t) traj.push_back(g.step(stream.row(t)));
            return traj;
        };
    }
    if (type == "info_metric") {
        odit::WindowDetectorConfig wc;
        wc.window_W = det.value("window_W", std::size_t{5});
        wc.renyi_alpha = det.value("renyi_alpha", 0.5);
        odit::Dataset nominal = nominal_training(odit::sub_seed(train_seed, 1));
        auto base = std::make_shared<odit::InfoMetricDetector>(
            odit::InfoMetricDetector::from_training(nominal, wc));
        return [base](const odit::Dataset& stream) {
            odit::InfoMetricDetector d = *base;
            d.reset();
            std::vector<double> traj;
            traj.reserve(stream.rows());
            for (std::size_t t = 0; t < stream.rows(); ++t) traj.push_back(d.step(stream.row(t)));
            return traj;
        };
    }
    throw std::runtime_error("unknown detector type: " + type);
}

int cmd_eval(const GlobalOpts& g, const std::string& experiment_json) {
    json exp = json::parse(read_text_file(experiment_json));
    odit::ScenarioSpec spec = odit::scenario_from_json_text(exp.at("scenario").dump());
    const std::size_t n_trials = exp.value("n_trials", std::size_t{200});
    const std::string prefix = exp.value("output_prefix", std::string{"eval"});
    const std::uint64_t master = exp.value("seed", g.seed);

    odit::StreamFn streams = [&spec](std::uint64_t seed) { return odit::gen_stream(spec, seed); };

    std::vector<std::string> outputs;
    for (const auto& det : exp.at("detectors")) {
        const std::string name = det.value("name", det.at("type").get<std::string>());
        std::vector<double> thresholds = det.at("thresholds").get<std::vector<double>>();
        odit::TrajectoryFn fn = make_trajectory_fn(det, spec, odit::sub_seed(master, 1000));
        odit::EvalReport report =
            odit::run_trials(fn, streams, thresholds, n_trials, g.jobs, master);
        std::string path = prefix + "_" + name + ".csv";
        odit::write_report_csv(report, path);
        outputs.push_back(path);
        std::cout << name << " -> " << path << '\n';
    }
    write_manifest(prefix, "eval", g.config_path, {experiment_json}, outputs, master);
    return kExitOk;
}

int cmd_bench(const GlobalOpts& g, std::size_t n2, std::size_t dim, std::size_t n_queries,
              std::size_t branching, std::size_t max_iters, std::size_t max_examined) {
    std::mt19937_64 rng(g.seed);
    std::normal_distribution<double> normal;
    odit::Dataset reference(dim, "bench-reference");
    reference.reserve(n2);
    std::vector<double> row(dim);
    for (std::size_t i = 0; i < n2; ++i) {
        for (auto& v : row) v = normal(rng);
        reference.append_row(row);
    }
    odit::Dataset queries(dim, "bench-queries");
    queries.reserve(n_queries);
    for (std::size_t i = 0; i < n_queries; ++i) {
        for (auto& v : row) v = normal(rng);
        queries.append_row(row);
    }

    odit::Partition part;
    part.ratio = 1.0;
    part.part1 = reference;
    part.part2 = reference;
    for (std::size_t i = 0; i < n2; ++i) {
        part.part1_indices.push_back(i);
        part.part2_indices.push_back(i);
    }
    odit::DetectorConfig cfg;
    cfg.partition_ratio = 1.0;
    cfg.rng_seed = g.seed;
    odit::TrainedModel model = odit::train_odit(std::move(part), cfg);

    double exact = odit::timing_benchmark(model, queries);
    model.use_approximate_backend(branching, max_iters, max_examined,
                                  odit::sub_seed(g.seed, 7));
    double approx = odit::timing_benchmark(model, queries);
    std::printf("exact  %.6g s/sample\napprox %.6g s/sample\nspeedup %.3gx\n", exact, approx,
                exact / approx);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"streaming kNN-based anomaly detection toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "master RNG seed");
    app.add_option("--jobs", g.jobs, "worker threads for eval");
    app.add_option("--config", g.config_path, "detector config JSON");

    auto* train = app.add_subcommand("train", "train a semi-supervised model");
    std::string nominal_csv, model_out;
    bool train_header = false, train_baseline = false;
    train->add_option("nominal_csv", nominal_csv)->required();
    train->add_option("model_out", model_out)->required();
    train->add_flag("--has-header", train_header, "skip a CSV header row");
    train->add_flag("--localization-baseline", train_baseline,
                    "store per-dimension training means for localization");

    auto* detect = app.add_subcommand("detect", "run a detector over a stream CSV");
    std::string model_path, stream_csv, variant = "odit", anomaly_csv, event_log, loc_out;
    double threshold_h = 10.0;
    bool detect_header = false;
    std::vector<double> localize_sb;
    detect->add_option("model", model_path)->required();
    detect->add_option("stream_csv", stream_csv)->required();
    detect->add_option("--threshold", threshold_h, "alarm threshold h");
    detect->add_option("--variant", variant, "odit | odit2 | uni");
    detect->add_option("--anomaly-csv", anomaly_csv, "raw anomaly reference (odit2/uni)");
    detect->add_option("--event-log", event_log, "per-sample event log CSV");
    detect->add_option("--localize", localize_sb, "S beta: post-alarm localization")
        ->expected(2);
    detect->add_option("--localization-report", loc_out, "localization report CSV");
    detect->add_flag("--has-header", detect_header, "skip a CSV header row");

    auto* simulate = app.add_subcommand("simulate", "generate a scenario stream");
    std::string scenario_json, sim_out;
    simulate->add_option("scenario_json", scenario_json)->required();
    simulate->add_option("out_csv", sim_out)->required();

    auto* eval = app.add_subcommand("eval", "Monte-Carlo evaluation from an experiment file");
    std::string experiment_json;
    eval->add_option("experiment_json", experiment_json)->required();

    auto* bench = app.add_subcommand("bench", "time exact vs approximate query backends");
    std::size_t bench_n2 = 10000, bench_dim = 50, bench_queries = 200, bench_c = 100,
                bench_iters = 10, bench_b = 1000;
    bench->add_option("--n2", bench_n2, "reference set size");
    bench->add_option("--dim", bench_dim, "dimension");
    bench->add_option("--queries", bench_queries, "query count");
    bench->add_option("--branching", bench_c, "tree branching factor");
    bench->add_option("--max-iters", bench_iters, "k-means iterations");
    bench->add_option("--max-examined", bench_b, "points examined per search");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // collapse CLI11's per-error exit codes onto the documented 0/1 contract
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitError;
    }

    try {
        if (*train) return cmd_train(g, nominal_csv, model_out, train_header, train_baseline);
        if (*detect) {
            std::optional<std::pair<std::size_t, double>> loc;
            if (!localize_sb.empty())
                loc = {std::size_t(localize_sb[0]), localize_sb[1]};
            return cmd_detect(g, model_path, stream_csv, threshold_h, variant, anomaly_csv,
                              detect_header, event_log, loc, loc_out);
        }
        if (*simulate) return cmd_simulate(g, scenario_json, sim_out);
        if (*eval) return cmd_eval(g, experiment_json);
        if (*bench)
            return cmd_bench(g, bench_n2, bench_dim, bench_queries, bench_c, bench_iters,
                             bench_b);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
