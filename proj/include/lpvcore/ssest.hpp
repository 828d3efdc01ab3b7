#pragma once

#include "estimators.hpp"

namespace lpvcore {

struct SsFitReport {
    LpvSsModel model;
    Vector theta;
    std::vector<double> loss_trace;
    double final_loss = 0.0;
    double bfr_est = 0.0;
    int iterations = 0;
};

namespace detail {

struct SsParamRef {
    int mat;  // 0..4 = A,B,C,D,K
    Index term;
    Index row;
    Index col;
};

inline PVMatrix& ss_matrix(LpvSsModel& m, int id) {
    switch (id) {
        case 0: return m.A;
        case 1: return m.B;
        case 2: return m.C;
        case 3: return m.D;
        case 4: return *m.K;
    }
    throw std::logic_error("bad ss matrix id");
}

inline std::vector<SsParamRef> ss_layout(const LpvSsModel& m) {
    std::vector<SsParamRef> layout;
    auto& mm = const_cast<LpvSsModel&>(m);
    for (int id = 0; id < 5; ++id) {
        const PVMatrix& p = ss_matrix(mm, id);
        for (Index term = 0; term < p.numCoeffTerms(); ++term)
            for (Index r = 0; r < p.rows(); ++r)
                for (Index c = 0; c < p.cols(); ++c) layout.push_back({id, term, r, c});
    }
    return layout;
}

inline Vector ss_get_theta(const LpvSsModel& m, const std::vector<SsParamRef>& layout) {
    auto& mm = const_cast<LpvSsModel&>(m);
    Vector theta(static_cast<Index>(layout.size()));
    for (std::size_t j = 0; j < layout.size(); ++j)
        theta(static_cast<Index>(j)) =
            ss_matrix(mm, layout[j].mat).coeffEntry(layout[j].term, layout[j].row, layout[j].col);
    return theta;
}

inline void ss_set_theta(LpvSsModel& m, const std::vector<SsParamRef>& layout, const Vector& theta) {
    for (std::size_t j = 0; j < layout.size(); ++j)
        ss_matrix(m, layout[j].mat)
            .setCoeffEntry(layout[j].term, layout[j].row, layout[j].col,
                           theta(static_cast<Index>(j)));
}

struct SsPrediction {
    Matrix yhat, eps, xhat;
    bool stable = true;
};

// One-step innovation predictor of Eq-form x+ = A x + B u + K (y - yhat).
inline SsPrediction ss_predict(const LpvSsModel& m, const Dataset& d, double blowup = 1e9) {
    const Index n = d.length();
    const Index nx = m.numStates(), ny = m.numOutputs();
    SsPrediction out;
    out.yhat.resize(n, ny);
    out.eps.resize(n, ny);
    out.xhat = Matrix::Zero(n, nx);
    Vector x = Vector::Zero(nx);
    for (Index t = 0; t < n; ++t) {
        out.xhat.row(t) = x.transpose();
        Vector ut = d.u.row(t).transpose();
        Matrix At = m.A.eval(extended_sample_at(m.A.timemap(), d.p, t));
        Matrix Bt = m.B.eval(extended_sample_at(m.B.timemap(), d.p, t));
        Matrix Ct = m.C.eval(extended_sample_at(m.C.timemap(), d.p, t));
        Matrix Dt = m.D.eval(extended_sample_at(m.D.timemap(), d.p, t));
        Matrix Kt = m.K->eval(extended_sample_at(m.K->timemap(), d.p, t));
        Vector yh = Ct * x + Dt * ut;
        Vector e = d.y.row(t).transpose() - yh;
        out.yhat.row(t) = yh.transpose();
        out.eps.row(t) = e.transpose();
        x = At * x + Bt * ut + Kt * e;
        if (!x.allFinite() || x.norm() > blowup) {
            out.stable = false;
            break;
        }
    }
    return out;
}

inline Matrix ss_jacobian(LpvSsModel& m, const std::vector<SsParamRef>& layout, const Dataset& d,
                          const SsPrediction& nom) {
    const Index n = d.length();
    const Index nx = m.numStates(), ny = m.numOutputs();
    Matrix jac(n * ny, static_cast<Index>(layout.size()));

    // nominal coefficient series
    std::vector<Matrix> At, Bt, Ct, Dt, Kt;
    for (Index t = 0; t < n; ++t) {
        At.push_back(m.A.eval(extended_sample_at(m.A.timemap(), d.p, t)));
        Bt.push_back(m.B.eval(extended_sample_at(m.B.timemap(), d.p, t)));
        Ct.push_back(m.C.eval(extended_sample_at(m.C.timemap(), d.p, t)));
        Dt.push_back(m.D.eval(extended_sample_at(m.D.timemap(), d.p, t)));
        Kt.push_back(m.K->eval(extended_sample_at(m.K->timemap(), d.p, t)));
    }
    auto& mm = m;
    for (std::size_t j = 0; j < layout.size(); ++j) {
        const auto& pr = layout[j];
        const PVMatrix& coeff = ss_matrix(mm, pr.mat);
        auto bser = basis_series(coeff, pr.term, d.p, n);
        Vector dx = Vector::Zero(nx);
        for (Index t = 0; t < n; ++t) {
            const auto ti = static_cast<std::size_t>(t);
            Vector ut = d.u.row(t).transpose();
            Vector xh = nom.xhat.row(t).transpose();
            Vector dyh = Ct[ti] * dx;
            if (pr.mat == 2) dyh(pr.row) += bser[ti] * xh(pr.col);
            if (pr.mat == 3) dyh(pr.row) += bser[ti] * ut(pr.col);
            Vector de = -dyh;
            jac.block(t * ny, static_cast<Index>(j), ny, 1) = de;
            Vector dxn = At[ti] * dx + Kt[ti] * de;
            if (pr.mat == 0) dxn(pr.row) += bser[ti] * xh(pr.col);
            if (pr.mat == 1) dxn(pr.row) += bser[ti] * ut(pr.col);
            if (pr.mat == 4) dxn(pr.row) += bser[ti] * nom.eps(t, pr.col);
            dx = dxn;
        }
    }
    return jac;
}

} // namespace detail

/// Gradient-based estimation of the LPV-SS innovation model from a
/// user-supplied initial model with K. The final noise covariance is the
/// sample covariance of the residuals.
inline SsFitReport lpvssest(const LpvSsModel& init, const Dataset& d,
                            const EstimOptions& opts = {}) {
    opts.validate();
    if (!init.K) throw std::invalid_argument("lpvssest: initial model must be in innovation form");
    if (init.domain() != TimeDomain::DT)
        throw std::invalid_argument("lpvssest: DT models only");
    LpvSsModel model = init;
    auto layout = detail::ss_layout(model);
    Vector theta = detail::ss_get_theta(model, layout);

    auto nom = detail::ss_predict(model, d);
    if (!nom.stable) throw std::runtime_error("lpvssest: predictor unstable at initial model");
    const auto n = static_cast<double>(d.length());
    double v = nom.eps.squaredNorm() / n;
    if (!std::isfinite(v)) throw std::runtime_error("lpvssest: non-finite loss at initial model");
    std::vector<double> trace{v};

    double mu = 0.0;
    for (int it = 0; it < opts.max_iter; ++it) {
        Matrix jac = detail::ss_jacobian(model, layout, d, nom);
        Matrix eps_t = nom.eps.transpose();
        Vector res = Eigen::Map<Vector>(eps_t.data(), eps_t.size());
        Matrix h = jac.transpose() * jac;
        Vector g = jac.transpose() * res;
        if (mu == 0.0) mu = 1e-3 * std::max(h.diagonal().maxCoeff(), 1e-12);
        if (g.lpNorm<Eigen::Infinity>() < 1e-14) break;

        bool accepted = false;
        for (int attempt = 0; attempt < 60; ++attempt) {
            Matrix damped = h + mu * Matrix::Identity(h.rows(), h.cols());
            Vector delta = damped.ldlt().solve(-g);
            Vector cand = theta + delta;
            detail::ss_set_theta(model, layout, cand);
            auto pred = detail::ss_predict(model, d);
            double vc = pred.stable ? pred.eps.squaredNorm() / n
                                    : std::numeric_limits<double>::infinity();
            if (std::isfinite(vc) && vc <= v) {
                const double rel_step = delta.norm() / (theta.norm() + 1e-12);
                theta = cand;
                nom = std::move(pred);
                v = vc;
                trace.push_back(v);
                mu = std::max(mu * 0.25, 1e-14);
                accepted = true;
                if (rel_step < opts.rel_tol) it = opts.max_iter;
                break;
            }
            mu *= 4.0;
        }
        if (!accepted) break;
    }
    detail::ss_set_theta(model, layout, theta);

    SsFitReport rep{model, theta, std::move(trace), v, 0.0,
                    static_cast<int>(trace.size()) - 1};
    // Xi estimate from final residuals; attach only when it is PD
    Matrix centered = nom.eps.rowwise() - nom.eps.colwise().mean();
    Matrix xi = centered.transpose() * centered / std::max(1.0, n - 1.0);
    xi = 0.5 * (xi + xi.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(xi);
    rep.model = LpvSsModel(model.A, model.B, model.C, model.D, model.K,
                           es.eigenvalues().minCoeff() > 0 ? std::optional<Matrix>(xi)
                                                           : std::nullopt);
    rep.bfr_est = bfr(d.y, nom.yhat);
    rep.final_loss = v;
    return rep;
}

} // namespace lpvcore
