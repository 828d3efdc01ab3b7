#pragma once

#include "models.hpp"

namespace lpvcore {

/// Observed identification data: equal-length (u, p, y) records.
struct Dataset {
    Matrix u;                  // N x n_u
    SchedulingTrajectory p;    // N samples
    Matrix y;                  // N x n_y
    double sample_time = 1.0;

    Dataset(Matrix u_, SchedulingTrajectory p_, Matrix y_, double ts = 1.0)
        : u(std::move(u_)), p(std::move(p_)), y(std::move(y_)), sample_time(ts) {
        if (u.rows() != y.rows() || p.length() != y.rows())
            throw std::invalid_argument("Dataset: record length mismatch");
        if (!u.allFinite() || !y.allFinite())
            throw std::invalid_argument("Dataset: non-finite entry");
    }

    [[nodiscard]] Index length() const { return y.rows(); }
    [[nodiscard]] Index numInputs() const { return u.cols(); }
    [[nodiscard]] Index numOutputs() const { return y.cols(); }
};

enum class IoStructure { Arx, Armax, Oe, Bj, General };

/// Parametrized IO model set: monic polynomials A, C, D, F (leading
/// identity implicit, lagged coefficients stored from lag 1) and B from
/// lag 0. Coefficient entries exactly zero in the template are fixed;
/// nonzero entries are the identifiable parameters.
struct LpvIdPoly {
    std::vector<PVMatrix> A;  // lags 1..na, ny x ny
    std::vector<PVMatrix> B;  // lags 0..nb, ny x nu
    std::vector<PVMatrix> C;  // lags 1..nc, ny x ny
    std::vector<PVMatrix> D;  // lags 1..nd, ny x ny
    std::vector<PVMatrix> F;  // lags 1..nf, ny x ny
    int input_delay = 0;
    bool free_all = false;    // override: make every stored entry identifiable

    LpvIdPoly(std::vector<PVMatrix> a, std::vector<PVMatrix> b, std::vector<PVMatrix> c = {},
              std::vector<PVMatrix> d = {}, std::vector<PVMatrix> f = {}, int tau_d = 0)
        : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)), F(std::move(f)),
          input_delay(tau_d) {
        if (B.empty()) throw std::invalid_argument("LpvIdPoly: B polynomial empty");
        if (tau_d < 0) throw std::invalid_argument("LpvIdPoly: negative input delay");
        const Index ny = B[0].rows();
        for (const auto* poly : {&A, &C, &D, &F})
            for (const auto& m : *poly)
                if (m.rows() != ny || m.cols() != ny)
                    throw std::invalid_argument("LpvIdPoly: square polynomial shape mismatch");
        for (const auto& m : B)
            if (m.rows() != ny || m.cols() != B[0].cols())
                throw std::invalid_argument("LpvIdPoly: B coefficient shape mismatch");
    }

    [[nodiscard]] Index numOutputs() const { return B[0].rows(); }
    [[nodiscard]] Index numInputs() const { return B[0].cols(); }

    [[nodiscard]] IoStructure structure() const {
        const bool a = !A.empty(), c = !C.empty(), d = !D.empty(), f = !F.empty();
        if (!a && !c && !d && f) return IoStructure::Oe;
        if (!c && !d && !f) return IoStructure::Arx;  // FIR counts as ARX
        if (a && c && !d && !f) return IoStructure::Armax;
        if (!a && c && d && f) return IoStructure::Bj;
        return IoStructure::General;
    }

    /// Number of initial samples excluded from the loss (the longest lag
    /// any recursion reaches back).
    [[nodiscard]] Index totalLag() const {
        auto sz = [](const std::vector<PVMatrix>& v) { return static_cast<Index>(v.size()); };
        return std::max({sz(A), sz(C), sz(D), sz(F),
                         sz(B) - 1 + static_cast<Index>(input_delay)});
    }

    /// The deterministic (process) part as a simulatable IO model:
    /// y-polynomial = A (ARX/ARMAX) or F (OE/BJ), input polynomial B.
    [[nodiscard]] LpvIoModel processModel() const {
        return LpvIoModel(A.empty() ? F : A, B, input_delay);
    }
};

/// One scalar identifiable coefficient: poly 0..4 = A,B,C,D,F; lag is
/// the polynomial lag; term 0 is the constant coefficient part.
struct ParamRef {
    int poly;
    int lag;
    Index term;
    Index row;
    Index col;
};

namespace detail {

inline std::vector<PVMatrix>& poly_of(LpvIdPoly& m, int id) {
    switch (id) {
        case 0: return m.A;
        case 1: return m.B;
        case 2: return m.C;
        case 3: return m.D;
        case 4: return m.F;
    }
    throw std::logic_error("bad poly id");
}

inline const std::vector<PVMatrix>& poly_of(const LpvIdPoly& m, int id) {
    return poly_of(const_cast<LpvIdPoly&>(m), id);
}

inline PVMatrix& coeff_of(LpvIdPoly& m, int poly, int lag) {
    auto& v = poly_of(m, poly);
    const int base = poly == 1 ? 0 : 1;  // B starts at lag 0
    return v[static_cast<std::size_t>(lag - base)];
}

inline const PVMatrix& coeff_of(const LpvIdPoly& m, int poly, int lag) {
    return coeff_of(const_cast<LpvIdPoly&>(m), poly, lag);
}

} // namespace detail

/// Deterministic enumeration of the free parameters: polys A,B,C,D,F in
/// order, lag ascending, constant part first, entries row-major.
inline std::vector<ParamRef> parameter_layout(const LpvIdPoly& m) {
    std::vector<ParamRef> layout;
    for (int poly = 0; poly < 5; ++poly) {
        const auto& coeffs = detail::poly_of(m, poly);
        const int base = poly == 1 ? 0 : 1;
        for (std::size_t i = 0; i < coeffs.size(); ++i) {
            const PVMatrix& c = coeffs[i];
            for (Index term = 0; term < c.numCoeffTerms(); ++term)
                for (Index r = 0; r < c.rows(); ++r)
                    for (Index col = 0; col < c.cols(); ++col)
                        if (m.free_all || c.coeffEntry(term, r, col) != 0.0)
                            layout.push_back({poly, base + static_cast<int>(i), term, r, col});
        }
    }
    return layout;
}

inline Vector get_theta(const LpvIdPoly& m, const std::vector<ParamRef>& layout) {
    Vector theta(static_cast<Index>(layout.size()));
    for (std::size_t j = 0; j < layout.size(); ++j) {
        const auto& p = layout[j];
        theta(static_cast<Index>(j)) =
            detail::coeff_of(m, p.poly, p.lag).coeffEntry(p.term, p.row, p.col);
    }
    return theta;
}

inline void set_theta(LpvIdPoly& m, const std::vector<ParamRef>& layout, const Vector& theta) {
    if (theta.size() != static_cast<Index>(layout.size()))
        throw std::invalid_argument("set_theta: dimension mismatch");
    for (std::size_t j = 0; j < layout.size(); ++j) {
        const auto& p = layout[j];
        detail::coeff_of(m, p.poly, p.lag).setCoeffEntry(p.term, p.row, p.col,
                                                         theta(static_cast<Index>(j)));
    }
}

// --- one-step-ahead predictor -----------------------------------------------

struct PredictResult {
    Matrix yhat;   // N x ny
    Matrix eps;    // N x ny, prediction error
    Matrix ybreve; // process signal
    Matrix v;      // noise signal
    Index skip;    // initial residuals excluded from the loss
};

namespace detail {

// coefficient matrices evaluated along the dataset (edge-clamped rho)
inline std::vector<Matrix> eval_series(const PVMatrix& c, const SchedulingTrajectory& p, Index n) {
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(n));
    for (Index t = 0; t < n; ++t) out.push_back(c.eval(extended_sample_at(c.timemap(), p, t)));
    return out;
}

struct EvaluatedPoly {
    std::vector<std::vector<Matrix>> coeff;  // [lag-index][t]
};

inline EvaluatedPoly eval_poly(const std::vector<PVMatrix>& poly, const SchedulingTrajectory& p,
                               Index n) {
    EvaluatedPoly out;
    for (const auto& c : poly) out.coeff.push_back(eval_series(c, p, n));
    return out;
}

inline Vector lagged_row(const Matrix& m, Index t, Index lag, Index width) {
    Index idx = t - lag;
    if (idx < 0) return Vector::Zero(width);
    return m.row(idx).transpose();
}

} // namespace detail

/// Causal predictor recursion for the full model set; ARX/ARMAX/OE/BJ
/// are the degenerate cases. Initial lags use zeros.
inline PredictResult predict(const LpvIdPoly& m, const Dataset& d) {
    if (d.numOutputs() != m.numOutputs() || d.numInputs() != m.numInputs())
        throw std::invalid_argument("predict: dataset dimension mismatch");
    const Index n = d.length();
    const Index ny = m.numOutputs();
    if (n <= m.totalLag()) throw std::invalid_argument("predict: dataset shorter than total lag");

    auto Ae = detail::eval_poly(m.A, d.p, n);
    auto Be = detail::eval_poly(m.B, d.p, n);
    auto Ce = detail::eval_poly(m.C, d.p, n);
    auto De = detail::eval_poly(m.D, d.p, n);
    auto Fe = detail::eval_poly(m.F, d.p, n);

    PredictResult out;
    out.yhat.resize(n, ny);
    out.eps.resize(n, ny);
    out.ybreve = Matrix::Zero(n, ny);
    out.v = Matrix::Zero(n, ny);
    out.skip = m.totalLag();

    for (Index t = 0; t < n; ++t) {
        Vector yb = Vector::Zero(ny);
        for (std::size_t i = 0; i < Fe.coeff.size(); ++i)
            yb -= Fe.coeff[i][static_cast<std::size_t>(t)] *
                  detail::lagged_row(out.ybreve, t, static_cast<Index>(i) + 1, ny);
        for (std::size_t j = 0; j < Be.coeff.size(); ++j)
            yb += Be.coeff[j][static_cast<std::size_t>(t)] *
                  detail::lagged_row(d.u, t, static_cast<Index>(j) + m.input_delay, d.numInputs());
        out.ybreve.row(t) = yb.transpose();

        Vector vt = d.y.row(t).transpose() - yb;
        for (std::size_t i = 0; i < Ae.coeff.size(); ++i)
            vt += Ae.coeff[i][static_cast<std::size_t>(t)] *
                  detail::lagged_row(d.y, t, static_cast<Index>(i) + 1, ny);
        out.v.row(t) = vt.transpose();

        Vector et = vt;
        for (std::size_t i = 0; i < De.coeff.size(); ++i)
            et += De.coeff[i][static_cast<std::size_t>(t)] *
                  detail::lagged_row(out.v, t, static_cast<Index>(i) + 1, ny);
        for (std::size_t i = 0; i < Ce.coeff.size(); ++i)
            et -= Ce.coeff[i][static_cast<std::size_t>(t)] *
                  detail::lagged_row(out.eps, t, static_cast<Index>(i) + 1, ny);
        out.eps.row(t) = et.transpose();
        out.yhat.row(t) = d.y.row(t) - et.transpose();
    }
    return out;
}

/// PEM loss: mean squared prediction error over the retained window.
inline double pem_loss(const Matrix& eps, Index skip) {
    const Index n = eps.rows() - skip;
    if (n <= 0) throw std::invalid_argument("pem_loss: nothing retained");
    return eps.bottomRows(n).squaredNorm() / static_cast<double>(n);
}

/// Best fit rate percentage, clamped to [0, 100].
inline double bfr(const Matrix& y, const Matrix& yhat) {
    if (y.rows() != yhat.rows() || y.cols() != yhat.cols())
        throw std::invalid_argument("bfr: length mismatch");
    Matrix centered = y.rowwise() - y.colwise().mean();
    double denom = centered.norm();
    if (denom == 0.0) throw std::invalid_argument("bfr: constant reference signal");
    double ratio = (y - yhat).norm() / denom;
    return 100.0 * std::max(0.0, 1.0 - ratio);
}

} // namespace lpvcore
