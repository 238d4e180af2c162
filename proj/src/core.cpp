#include "odit/core.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace odit {

Dataset::Dataset(std::size_t dim, std::string name, Label label)
    : dim_(dim), name_(std::move(name)), label_(label) {
    if (dim == 0) throw std::invalid_argument("Dataset: dimension must be positive");
}

void Dataset::append_row(std::span<const double> values) {
    if (values.size() != dim_)
        throw std::invalid_argument("Dataset: row length " + std::to_string(values.size()) +
                                    " does not match dimension " + std::to_string(dim_));
    for (double v : values)
        if (!std::isfinite(v))
            throw std::invalid_argument("Dataset: non-finite value in row " +
                                        std::to_string(rows_));
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

void Dataset::append_rows(const Dataset& other) {
    if (other.dim_ != dim_)
        throw std::invalid_argument("Dataset: dimension mismatch in append_rows");
    data_.insert(data_.end(), other.data_.begin(), other.data_.end());
    rows_ += other.rows_;
}

void DetectorConfig::validate() const {
    if (k < 1) throw std::invalid_argument("config: k must be >= 1");
    if (s < 1 || s > k) throw std::invalid_argument("config: s must be in [1, k]");
    if (gamma <= 0) throw std::invalid_argument("config: gamma must be positive");
    if (alpha < 0 || alpha >= 1) throw std::invalid_argument("config: alpha must be in [0,1)");
    if (threshold_h <= 0) throw std::invalid_argument("config: threshold_h must be positive");
    if (partition_ratio <= 0 || partition_ratio > 1)
        throw std::invalid_argument("config: partition_ratio must be in (0,1]");
}

DetectorConfig config_from_json_text(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    DetectorConfig cfg;
    if (j.contains("k")) cfg.k = j.at("k").get<std::size_t>();
    if (j.contains("s")) cfg.s = j.at("s").get<std::size_t>();
    if (j.contains("gamma")) cfg.gamma = j.at("gamma").get<double>();
    if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
    if (j.contains("threshold_h")) cfg.threshold_h = j.at("threshold_h").get<double>();
    if (j.contains("partition_ratio")) cfg.partition_ratio = j.at("partition_ratio").get<double>();
    if (j.contains("rng_seed")) cfg.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    cfg.validate();
    return cfg;
}

std::string config_to_json_text(const DetectorConfig& cfg) {
    nlohmann::json j;
    j["k"] = cfg.k;
    j["s"] = cfg.s;
    j["gamma"] = cfg.gamma;
    j["alpha"] = cfg.alpha;
    j["threshold_h"] = cfg.threshold_h;
    j["partition_ratio"] = cfg.partition_ratio;
    j["rng_seed"] = cfg.rng_seed;
    return j.dump(2);
}

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t sub_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t state = master ^ (0x6a09e667f3bcc909ULL + stream * 0x3c6ef372fe94f82bULL);
    splitmix64(state);
    return splitmix64(state);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::uint64_t state = seed;
    for (std::size_t i = n; i > 1; --i) {
        // rejection sampling keeps the draw unbiased and portable
        std::uint64_t bound = i;
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t r;
        do {
            r = splitmix64(state);
        } while (r >= limit);
        std::swap(idx[i - 1], idx[r % bound]);
    }
    return idx;
}

Partition partition_dataset(const Dataset& data, double ratio, std::uint64_t seed) {
    if (data.label() != Label::nominal)
        throw std::invalid_argument("partition_dataset: expected a nominal dataset");
    if (data.rows() < 2)
        throw std::invalid_argument("partition_dataset: need at least 2 rows");
    if (ratio <= 0 || ratio > 1)
        throw std::invalid_argument("partition_dataset: ratio must be in (0,1]");

    Partition p;
    p.ratio = ratio;
    if (ratio >= 1.0) {
        p.part1 = data;
        p.part2 = data;
        p.part1_indices.resize(data.rows());
        for (std::size_t i = 0; i < data.rows(); ++i) p.part1_indices[i] = i;
        p.part2_indices = p.part1_indices;
        return p;
    }

    const std::size_t n = data.rows();
    const std::size_t n1 = static_cast<std::size_t>(std::llround(ratio * double(n)));
    if (n1 == 0 || n1 >= n)
        throw std::invalid_argument("partition_dataset: ratio leaves an empty part");

    auto idx = shuffled_indices(n, seed);
    p.part1_indices.assign(idx.begin(), idx.begin() + n1);
    p.part2_indices.assign(idx.begin() + n1, idx.end());
    std::sort(p.part1_indices.begin(), p.part1_indices.end());
    std::sort(p.part2_indices.begin(), p.part2_indices.end());

    p.part1 = Dataset(data.dim(), data.name() + "/part1", Label::nominal);
    p.part2 = Dataset(data.dim(), data.name() + "/part2", Label::nominal);
    p.part1.reserve(n1);
    p.part2.reserve(n - n1);
    for (auto i : p.part1_indices) p.part1.append_row(data.row(i));
    for (auto i : p.part2_indices) p.part2.append_row(data.row(i));
    return p;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end != begin && (*(end - 1) == ' ' || *(end - 1) == '\t' || *(end - 1) == '\r')) --end;
    double value = 0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value))
        throw std::runtime_error("csv: cannot parse cell at row " + std::to_string(row) +
                                 ", column " + std::to_string(col) + ": '" + cell + "'");
    return value;
}

} // namespace

Dataset load_csv(const std::string& path, bool has_header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open " + path);

    std::string line;
    std::size_t row_number = 0;
    if (has_header) {
        if (!std::getline(in, line)) throw std::runtime_error("csv: empty file " + path);
        ++row_number;
    }

    Dataset data;
    std::vector<double> row;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") {
            ++row_number;
            continue;
        }
        auto cells = split_line(line);
        if (first) {
            data = Dataset(cells.size(), path, Label::nominal);
            first = false;
        } else if (cells.size() != data.dim()) {
            throw std::runtime_error("csv: ragged row " + std::to_string(row_number) + " in " +
                                     path + " (got " + std::to_string(cells.size()) +
                                     " columns, expected " + std::to_string(data.dim()) + ")");
        }
        row.clear();
        for (std::size_t c = 0; c < cells.size(); ++c)
            row.push_back(parse_cell(cells[c], row_number, c));
        data.append_row(row);
        ++row_number;
    }
    if (first) throw std::runtime_error("csv: no data rows in " + path);
    return data;
}

void write_csv(const Dataset& data, const std::string& path,
               const std::vector<std::string>* header) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("csv: cannot write " + path);
    if (header) {
        for (std::size_t j = 0; j < header->size(); ++j)
            out << (j ? "," : "") << (*header)[j];
        out << '\n';
    }
    char buf[32];
    for (std::size_t i = 0; i < data.rows(); ++i) {
        auto r = data.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (j) out << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", r[j]);
            out << buf;
        }
        out << '\n';
    }
}

Dataset stack_devices(const std::vector<Dataset>& per_device) {
    if (per_device.empty()) throw std::invalid_argument("stack_devices: no inputs");
    const std::size_t n = per_device.front().rows();
    std::size_t total_dim = 0;
    for (const auto& d : per_device) {
        if (d.rows() != n)
            throw std::invalid_argument("stack_devices: unequal row counts");
        total_dim += d.dim();
    }
    Dataset out(total_dim, "stacked", per_device.front().label());
    out.reserve(n);
    std::vector<double> row;
    row.reserve(total_dim);
    for (std::size_t i = 0; i < n; ++i) {
        row.clear();
        for (const auto& d : per_device) {
            auto r = d.row(i);
            row.insert(row.end(), r.begin(), r.end());
        }
        out.append_row(row);
    }
    return out;
}

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ULL;
        }
        if (got < static_cast<std::streamsize>(sizeof(buf))) break;
    }
    return hash;
}

} // namespace odit
