#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace odit {

enum class Label { nominal, anomalous };

/// One d-dimensional sample of a data stream.
struct Observation {
    std::vector<double> values;
    std::int64_t time_index = 0;
};

/// Fixed-width numeric table, one row per time step. Rows are stored
/// contiguously (row-major) so distance kernels stay cache-friendly.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::size_t dim, std::string name = "", Label label = Label::nominal);

    std::size_t dim() const { return dim_; }
    std::size_t rows() const { return rows_; }
    bool empty() const { return rows_ == 0; }
    const std::string& name() const { return name_; }
    Label label() const { return label_; }
    void set_label(Label l) { label_ = l; }
    void set_name(std::string n) { name_ = std::move(n); }

    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * dim_, dim_};
    }
    double at(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }

    void append_row(std::span<const double> values);
    void append_rows(const Dataset& other);
    void reserve(std::size_t n) { data_.reserve(n * dim_); }

    const std::vector<double>& raw() const { return data_; }

private:
    std::size_t dim_ = 0;
    std::size_t rows_ = 0;
    std::vector<double> data_;
    std::string name_;
    Label label_ = Label::nominal;
};

/// A nominal training set split into the ranked part (part1) and the
/// reference part (part2). ratio == 1 means no split: both parts alias the
/// full set and training excludes the self point instead.
struct Partition {
    Dataset part1;
    Dataset part2;
    double ratio = 0.38;
    std::vector<std::size_t> part1_indices;
    std::vector<std::size_t> part2_indices;

    bool no_split() const { return ratio >= 1.0; }
};

struct DetectorConfig {
    std::size_t k = 1;
    std::size_t s = 1;
    double gamma = 1.0;
    double alpha = 0.05;
    double threshold_h = 10.0;
    double partition_ratio = 0.38;
    std::uint64_t rng_seed = 1;

    void validate() const;
};

DetectorConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const DetectorConfig& cfg);

/// Seeded split of a nominal dataset; |part1| = round(ratio * N).
/// ratio == 1 returns the no-split partition (both parts = full set).
Partition partition_dataset(const Dataset& data, double ratio, std::uint64_t seed);

Dataset load_csv(const std::string& path, bool has_header);
void write_csv(const Dataset& data, const std::string& path,
               const std::vector<std::string>* header = nullptr);

/// Concatenates per-device rows: row t of the output is the rows t of all
/// inputs joined in list order.
Dataset stack_devices(const std::vector<Dataset>& per_device);

// --- deterministic randomness -------------------------------------------

std::uint64_t splitmix64(std::uint64_t& state);

/// Derives the seed for an independent random stream from a master seed.
std::uint64_t sub_seed(std::uint64_t master, std::uint64_t stream);

/// Portable Fisher-Yates shuffle of 0..n-1 (does not depend on the standard
/// library's distribution implementations).
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

std::uint64_t fnv1a_file(const std::string& path);

} // namespace odit
