#pragma once

// Convenience umbrella: the whole library in one include.

#include "timemap.hpp"
#include "pvmatrix.hpp"
#include "models.hpp"
#include "serialize.hpp"
#include "idpoly.hpp"
#include "estimators.hpp"
#include "ssest.hpp"
#include "svg.hpp"
#include "bench.hpp"

namespace lpvcore {

inline const char* structure_name(IoStructure s) {
    switch (s) {
        case IoStructure::Arx: return "arx";
        case IoStructure::Armax: return "armax";
        case IoStructure::Oe: return "oe";
        case IoStructure::Bj: return "bj";
        case IoStructure::General: return "general";
    }
    return "unknown";
}

inline const char* poly_name(int id) {
    constexpr const char* names[] = {"A", "B", "C", "D", "F"};
    if (id < 0 || id > 4) return "?";
    return names[id];
}

/// Human-readable estimation summary: structure, parameter layout with
/// final values, loss, fit percentage and iteration count.
inline void write_fit_report(std::ostream& os, const FitReport& rep) {
    os << std::setprecision(10);
    os << "structure: " << structure_name(rep.model.structure()) << "\n";
    os << "parameters: " << rep.theta.size() << "\n";
    for (std::size_t j = 0; j < rep.layout.size(); ++j) {
        const auto& p = rep.layout[j];
        os << "  " << poly_name(p.poly) << " lag " << p.lag << " term " << p.term << " ("
           << p.row << "," << p.col << ") = " << rep.theta(static_cast<Index>(j)) << "\n";
    }
    os << "loss: " << rep.final_loss << "\n";
    os << "bfr_est_percent: " << rep.bfr_est << "\n";
    os << "iterations: " << rep.iterations << "\n";
}

/// Loss trace of an iterative search, one accepted value per line.
inline void write_loss_trace(const std::string& path, const std::vector<double>& trace) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << std::setprecision(17) << "iteration,loss\n";
    for (std::size_t i = 0; i < trace.size(); ++i) f << i << "," << trace[i] << "\n";
}

// --- dataset CSV: header `t,<cols>`; column roles by name prefix ------------
// Columns named u* are inputs, y* are outputs, everything else is a
// scheduling channel.

inline Dataset load_dataset_csv(const std::string& path) {
    SchedulingTrajectory all = load_scheduling_csv(path);
    std::vector<Index> ucols, ycols, pcols;
    std::vector<std::string> pnames;
    for (Index c = 0; c < all.samples.cols(); ++c) {
        const auto& name = all.channel_names[static_cast<std::size_t>(c)];
        if (name.rfind('u', 0) == 0) {
            ucols.push_back(c);
        } else if (name.rfind('y', 0) == 0) {
            ycols.push_back(c);
        } else {
            pcols.push_back(c);
            pnames.push_back(name);
        }
    }
    if (ucols.empty() || pcols.empty())
        throw std::runtime_error("dataset CSV '" + path + "' needs u* and scheduling columns");
    auto take = [&](const std::vector<Index>& cols) {
        Matrix m(all.length(), static_cast<Index>(cols.size()));
        for (std::size_t i = 0; i < cols.size(); ++i) m.col(static_cast<Index>(i)) = all.samples.col(cols[i]);
        return m;
    };
    Matrix y = ycols.empty() ? Matrix::Zero(all.length(), 1) : take(ycols);
    return Dataset(take(ucols),
                   SchedulingTrajectory(take(pcols), pnames, all.sample_time), y,
                   all.sample_time);
}

inline void save_signal_csv(const std::string& path, const Matrix& y, double ts,
                            const std::string& prefix = "y") {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << std::setprecision(17) << "t";
    for (Index c = 0; c < y.cols(); ++c) f << "," << prefix << (c + 1);
    f << "\n";
    for (Index t = 0; t < y.rows(); ++t) {
        f << static_cast<double>(t) * ts;
        for (Index c = 0; c < y.cols(); ++c) f << "," << y(t, c);
        f << "\n";
    }
}

// --- model-set files --------------------------------------------------------

inline void write_idpoly(std::ostream& os, const LpvIdPoly& m) {
    os << "lpvidpoly " << m.A.size() << " " << m.B.size() << " " << m.C.size() << " "
       << m.D.size() << " " << m.F.size() << " " << m.input_delay << " "
       << (m.free_all ? 1 : 0) << "\n";
    for (const auto* poly : {&m.A, &m.B, &m.C, &m.D, &m.F})
        for (const auto& c : *poly) write_pvmatrix(os, c);
}

inline LpvIdPoly read_idpoly(std::istream& is) {
    if (detail::expect_token(is, "model-set header") != "lpvidpoly")
        throw std::runtime_error("model-set parse: expected lpvidpoly header");
    std::size_t na, nb, nc, nd, nf;
    int tau, free_all;
    is >> na >> nb >> nc >> nd >> nf >> tau >> free_all;
    auto read_n = [&is](std::size_t n) {
        std::vector<PVMatrix> v;
        for (std::size_t i = 0; i < n; ++i) v.push_back(read_pvmatrix(is));
        return v;
    };
    auto a = read_n(na), b = read_n(nb), c = read_n(nc), d = read_n(nd), f = read_n(nf);
    LpvIdPoly m(std::move(a), std::move(b), std::move(c), std::move(d), std::move(f), tau);
    m.free_all = free_all != 0;
    return m;
}

inline void save_idpoly(const LpvIdPoly& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_idpoly(f, m);
}

inline LpvIdPoly load_idpoly(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    return read_idpoly(f);
}

/// Estimation options from a line-based `key = value` file.
inline EstimOptions load_estim_options(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open options '" + path + "'");
    EstimOptions opts;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "max_iter") opts.max_iter = std::stoi(val);
            else if (key == "rel_tol") opts.rel_tol = std::stod(val);
            else if (key == "lambda") {
                opts.lambda = std::stod(val);
                opts.regularization = EstimOptions::Regularization::Tikhonov;
            } else if (key == "regularization") {
                if (val == "none") opts.regularization = EstimOptions::Regularization::None;
                else if (val == "tikhonov") opts.regularization = EstimOptions::Regularization::Tikhonov;
                else if (val == "gcv") opts.regularization = EstimOptions::Regularization::Gcv;
                else throw std::runtime_error("unknown regularization '" + val + "'");
            } else if (key == "gradient") {
                if (val == "sensitivity") opts.gradient = EstimOptions::Gradient::Sensitivity;
                else if (val == "finite-difference")
                    opts.gradient = EstimOptions::Gradient::FiniteDifference;
                else throw std::runtime_error("unknown gradient kind '" + val + "'");
            } else if (key == "seed") opts.seed = static_cast<unsigned>(std::stoul(val));
            else throw std::runtime_error("unknown key '" + key + "'");
        } catch (const std::exception& e) {
            throw std::runtime_error("options '" + path + "' line " + std::to_string(lineno) +
                                     ": " + e.what());
        }
    }
    opts.validate();
    return opts;
}

} // namespace lpvcore
