#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lpvcore {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class TimeDomain { DT, CT };

/// Dynamic scheduling dependence: which time shifts (DT) or derivative
/// orders (CT) of each scheduling channel a matrix function may see.
///
/// Extended-signal columns are laid out orders-outer / channels-inner,
/// both ascending, so serialized models are reproducible.
class TimeMap {
public:
    TimeMap(std::vector<int> orders, TimeDomain domain,
            std::vector<std::string> names = {"p"})
        : orders_(std::move(orders)), domain_(domain), names_(std::move(names)) {
        if (orders_.empty()) throw std::invalid_argument("TimeMap: empty order list");
        std::sort(orders_.begin(), orders_.end());
        orders_.erase(std::unique(orders_.begin(), orders_.end()), orders_.end());
        if (domain_ == TimeDomain::CT && orders_.front() < 0)
            throw std::invalid_argument("TimeMap: CT derivative orders must be >= 0");
        if (names_.empty()) names_ = {"p"};
        for (const auto& n : names_)
            if (n.empty()) throw std::invalid_argument("TimeMap: empty channel name");
        std::sort(names_.begin(), names_.end());
        if (std::adjacent_find(names_.begin(), names_.end()) != names_.end())
            throw std::invalid_argument("TimeMap: duplicate channel name");
    }

    [[nodiscard]] const std::vector<int>& orders() const { return orders_; }
    [[nodiscard]] TimeDomain domain() const { return domain_; }
    [[nodiscard]] const std::vector<std::string>& names() const { return names_; }
    [[nodiscard]] Index numChannels() const { return static_cast<Index>(names_.size()); }
    [[nodiscard]] Index numOrders() const { return static_cast<Index>(orders_.size()); }
    [[nodiscard]] Index extendedDim() const { return numOrders() * numChannels(); }
    [[nodiscard]] int minOrder() const { return orders_.front(); }
    [[nodiscard]] int maxOrder() const { return orders_.back(); }

    /// Extended-signal column of (order, channel).
    [[nodiscard]] Index column(int order, Index channel) const {
        auto it = std::lower_bound(orders_.begin(), orders_.end(), order);
        if (it == orders_.end() || *it != order)
            throw std::invalid_argument("TimeMap: order not present");
        return static_cast<Index>(it - orders_.begin()) * numChannels() + channel;
    }

    [[nodiscard]] std::pair<int, Index> columnSource(Index col) const {
        if (col < 0 || col >= extendedDim())
            throw std::invalid_argument("TimeMap: column out of range");
        return {orders_[static_cast<std::size_t>(col / numChannels())], col % numChannels()};
    }

    [[nodiscard]] Index channelIndex(const std::string& name) const {
        auto it = std::lower_bound(names_.begin(), names_.end(), name);
        if (it == names_.end() || *it != name)
            throw std::invalid_argument("TimeMap: unknown channel '" + name + "'");
        return static_cast<Index>(it - names_.begin());
    }

    /// All orders shifted by k (DT) or raised by k (CT).
    [[nodiscard]] TimeMap shifted(int k) const {
        std::vector<int> o(orders_);
        for (int& v : o) v += k;
        return TimeMap(std::move(o), domain_, names_);
    }

    friend bool operator==(const TimeMap& a, const TimeMap& b) {
        return a.domain_ == b.domain_ && a.orders_ == b.orders_ && a.names_ == b.names_;
    }

private:
    std::vector<int> orders_;
    TimeDomain domain_;
    std::vector<std::string> names_;
};

inline TimeMap make_timemap(std::vector<int> orders, TimeDomain domain,
                            std::vector<std::string> names = {"p"}) {
    return TimeMap(std::move(orders), domain, std::move(names));
}

struct MergeResult {
    TimeMap map;
    std::vector<Index> remapA;  // column i of a -> remapA[i] of merged
    std::vector<Index> remapB;
};

/// Union of channels and orders; each input column maps to exactly one
/// merged column.
inline MergeResult merge_timemaps(const TimeMap& a, const TimeMap& b) {
    if (a.domain() != b.domain())
        throw std::invalid_argument("merge_timemaps: CT/DT domain mismatch");
    std::vector<int> orders(a.orders());
    orders.insert(orders.end(), b.orders().begin(), b.orders().end());
    std::vector<std::string> names(a.names());
    names.insert(names.end(), b.names().begin(), b.names().end());
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    TimeMap merged(std::move(orders), a.domain(), std::move(names));

    auto remap = [&merged](const TimeMap& src) {
        std::vector<Index> r(static_cast<std::size_t>(src.extendedDim()));
        for (Index c = 0; c < src.extendedDim(); ++c) {
            auto [order, chan] = src.columnSource(c);
            r[static_cast<std::size_t>(c)] =
                merged.column(order, merged.channelIndex(src.names()[static_cast<std::size_t>(chan)]));
        }
        return r;
    };
    return {merged, remap(a), remap(b)};
}

/// Sampled scheduling data, rows = time instants.
struct SchedulingTrajectory {
    Matrix samples;                          // N x n_p
    std::vector<std::string> channel_names;  // size n_p
    double sample_time = 1.0;                // seconds

    SchedulingTrajectory(Matrix s, std::vector<std::string> names, double ts = 1.0)
        : samples(std::move(s)), channel_names(std::move(names)), sample_time(ts) {
        if (samples.rows() < 1) throw std::invalid_argument("SchedulingTrajectory: empty");
        if (samples.cols() != static_cast<Index>(channel_names.size()))
            throw std::invalid_argument("SchedulingTrajectory: name/column count mismatch");
        if (!samples.allFinite())
            throw std::invalid_argument("SchedulingTrajectory: non-finite sample");
        if (!(sample_time > 0.0))
            throw std::invalid_argument("SchedulingTrajectory: sample time must be positive");
    }

    [[nodiscard]] Index length() const { return samples.rows(); }
};

/// The extended scheduling signal over the instants where every required
/// shift exists.
struct ExtendedTrajectory {
    Matrix samples;                                // M x (|orders| * n_p)
    std::vector<std::pair<int, Index>> source_map; // per column: (order, channel)
    Index valid_begin = 0;                         // first covered source instant
    Index valid_end = 0;                           // one past last

    [[nodiscard]] Index length() const { return samples.rows(); }
};

namespace detail {

// k-fold central differences, one-sided at the ends.
inline Matrix numeric_derivative(const Matrix& x, int k, double ts) {
    Matrix d = x;
    const Index n = x.rows();
    for (int iter = 0; iter < k; ++iter) {
        Matrix next(n, x.cols());
        if (n == 1) {
            next.setZero();
        } else {
            next.row(0) = (d.row(1) - d.row(0)) / ts;
            next.row(n - 1) = (d.row(n - 1) - d.row(n - 2)) / ts;
            for (Index t = 1; t + 1 < n; ++t)
                next.row(t) = (d.row(t + 1) - d.row(t - 1)) / (2.0 * ts);
        }
        d = next;
    }
    return d;
}

} // namespace detail

namespace detail {

// Matches tm channels to trajectory columns by name; extra trajectory
// channels are ignored.
inline std::vector<Index> channel_columns(const TimeMap& tm, const SchedulingTrajectory& p) {
    std::vector<Index> cols;
    for (const auto& name : tm.names()) {
        auto it = std::find(p.channel_names.begin(), p.channel_names.end(), name);
        if (it == p.channel_names.end())
            throw std::invalid_argument("scheduling trajectory lacks channel '" + name + "'");
        cols.push_back(static_cast<Index>(it - p.channel_names.begin()));
    }
    return cols;
}

} // namespace detail

inline ExtendedTrajectory extend_trajectory(const TimeMap& tm, const SchedulingTrajectory& p) {
    const auto chan_cols = detail::channel_columns(tm, p);
    const Index n = p.length();
    const Index nc = tm.numChannels();
    ExtendedTrajectory out;
    for (int order : tm.orders())
        for (Index c = 0; c < nc; ++c) out.source_map.emplace_back(order, c);

    if (tm.domain() == TimeDomain::DT) {
        const Index t0 = std::max(0, -tm.minOrder());
        const Index t1 = n - 1 - std::max(0, tm.maxOrder());
        if (t1 < t0) throw std::invalid_argument("extend_trajectory: trajectory too short for requested shifts");
        out.samples.resize(t1 - t0 + 1, tm.extendedDim());
        for (Index t = t0; t <= t1; ++t)
            for (Index col = 0; col < tm.extendedDim(); ++col) {
                auto [order, chan] = out.source_map[static_cast<std::size_t>(col)];
                out.samples(t - t0, col) = p.samples(t + order, chan_cols[static_cast<std::size_t>(chan)]);
            }
        out.valid_begin = t0;
        out.valid_end = t1 + 1;
    } else {
        Matrix chans(n, nc);
        for (Index c = 0; c < nc; ++c)
            chans.col(c) = p.samples.col(chan_cols[static_cast<std::size_t>(c)]);
        out.samples.resize(n, tm.extendedDim());
        Index col = 0;
        for (int order : tm.orders()) {
            out.samples.middleCols(col, nc) = detail::numeric_derivative(chans, order, p.sample_time);
            col += nc;
        }
        out.valid_begin = 0;
        out.valid_end = n;
    }
    return out;
}

/// Extended sample at source instant t; out-of-range shifts are edge-clamped.
/// Simulators use this for the initial window (identification discards those
/// residuals anyway); extend_trajectory is the strict variant.
inline Vector extended_sample_at(const TimeMap& tm, const SchedulingTrajectory& p, Index t) {
    const auto chan_cols = detail::channel_columns(tm, p);
    const Index nc = tm.numChannels();
    Vector rho(tm.extendedDim());
    if (tm.domain() != TimeDomain::DT)
        throw std::invalid_argument("extended_sample_at: DT only");
    Index col = 0;
    for (int order : tm.orders())
        for (Index c = 0; c < nc; ++c) {
            Index src = std::clamp<Index>(t + order, 0, p.length() - 1);
            rho(col++) = p.samples(src, chan_cols[static_cast<std::size_t>(c)]);
        }
    return rho;
}

// --- CSV I/O: header `t,<name1>,...`, one row per instant -------------------

inline void save_scheduling_csv(const SchedulingTrajectory& p, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << "t";
    for (const auto& n : p.channel_names) f << "," << n;
    f << "\n";
    f.precision(17);
    for (Index t = 0; t < p.length(); ++t) {
        f << static_cast<double>(t) * p.sample_time;
        for (Index c = 0; c < p.samples.cols(); ++c) f << "," << p.samples(t, c);
        f << "\n";
    }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

} // namespace detail

inline SchedulingTrajectory load_scheduling_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty CSV file '" + path + "'");
    auto header = detail::split_csv_line(line);
    if (header.size() < 2 || header[0] != "t")
        throw std::runtime_error("bad scheduling CSV header in '" + path + "'");
    std::vector<std::string> names(header.begin() + 1, header.end());
    std::vector<std::vector<double>> rows;
    std::vector<double> times;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("ragged row in '" + path + "'");
        times.push_back(std::stod(cells[0]));
        std::vector<double> row;
        for (std::size_t i = 1; i < cells.size(); ++i) row.push_back(std::stod(cells[i]));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("no data rows in '" + path + "'");
    Matrix samples(static_cast<Index>(rows.size()), static_cast<Index>(names.size()));
    for (Index t = 0; t < samples.rows(); ++t)
        for (Index c = 0; c < samples.cols(); ++c)
            samples(t, c) = rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)];
    double ts = times.size() > 1 ? times[1] - times[0] : 1.0;
    return SchedulingTrajectory(std::move(samples), std::move(names), ts > 0 ? ts : 1.0);
}

} // namespace lpvcore
