#pragma once

#include "idpoly.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <limits>
#include <map>

namespace lpvcore {

struct EstimOptions {
    int max_iter = 100;          // gradient search: the benchmark uses 400
    double rel_tol = 1e-6;
    enum class Regularization { None, Tikhonov, Gcv };
    Regularization regularization = Regularization::None;
    double lambda = 0.0;         // Tikhonov weight (W = I)
    int gcv_grid = 50;           // log-spaced lambda grid
    double gcv_lambda_min = 1e-8;
    double gcv_lambda_max = 1e2;
    enum class Gradient { Sensitivity, FiniteDifference };
    Gradient gradient = Gradient::Sensitivity;
    unsigned seed = 0;

    void validate() const {
        if (max_iter < 1 || rel_tol <= 0.0 || lambda < 0.0 || gcv_grid < 2 ||
            gcv_lambda_min <= 0.0 || gcv_lambda_max < gcv_lambda_min)
            throw std::invalid_argument("EstimOptions: invalid option value");
    }
};

struct FitReport {
    LpvIdPoly model;
    std::vector<ParamRef> layout;
    Vector theta;
    std::vector<double> loss_trace;  // V at accepted iterates
    double final_loss = 0.0;
    double bfr_est = 0.0;            // one-step-ahead fit on estimation data
    int iterations = 0;
};

namespace detail {

// Basis value series for one coefficient term along the dataset.
inline std::vector<double> basis_series(const PVMatrix& coeff, Index term,
                                        const SchedulingTrajectory& p, Index n) {
    std::vector<double> out(static_cast<std::size_t>(n), 1.0);
    if (term > 0) {
        const auto& basis = coeff.terms()[static_cast<std::size_t>(term - 1)].basis;
        for (Index t = 0; t < n; ++t)
            out[static_cast<std::size_t>(t)] = basis(extended_sample_at(coeff.timemap(), p, t));
    }
    return out;
}

struct RegressorSignals {
    const Matrix* y;       // poly A
    const Matrix* u;       // poly B
    const Matrix* eps;     // poly C (may be null for ARX)
    const Matrix* v;       // poly D
    const Matrix* ybreve;  // poly F
};

struct LinearSystem {
    Matrix phi;  // rows: (t - skip) * ny + output row
    Vector rhs;
};

// Pseudo-linear one-step predictor as an explicit regression:
//   yhat_t = -sum A_i y + sum B_j u + sum C_i eps - sum D_i v - sum F_i ybreve
// Free entries become regressor columns; fixed entries fold into rhs.
inline LinearSystem build_regression(const LpvIdPoly& m, const std::vector<ParamRef>& layout,
                                     const Dataset& d, const RegressorSignals& sig) {
    const Index n = d.length();
    const Index ny = m.numOutputs();
    const Index skip = m.totalLag();
    const Index rows = (n - skip) * ny;

    std::map<std::tuple<int, int, Index, Index, Index>, Index> free_index;
    for (std::size_t j = 0; j < layout.size(); ++j) {
        const auto& p = layout[j];
        free_index[{p.poly, p.lag, p.term, p.row, p.col}] = static_cast<Index>(j);
    }

    LinearSystem sys;
    sys.phi = Matrix::Zero(rows, static_cast<Index>(layout.size()));
    sys.rhs.resize(rows);
    for (Index t = skip; t < n; ++t)
        for (Index r = 0; r < ny; ++r) sys.rhs((t - skip) * ny + r) = d.y(t, r);

    for (int poly = 0; poly < 5; ++poly) {
        const auto& coeffs = poly_of(m, poly);
        if (coeffs.empty()) continue;
        const Matrix* signal = nullptr;
        double sign = 0.0;
        switch (poly) {
            case 0: signal = sig.y; sign = -1.0; break;
            case 1: signal = sig.u; sign = +1.0; break;
            case 2: signal = sig.eps; sign = +1.0; break;
            case 3: signal = sig.v; sign = -1.0; break;
            case 4: signal = sig.ybreve; sign = -1.0; break;
        }
        if (!signal) throw std::logic_error("build_regression: missing regressor signal");
        const int base = poly == 1 ? 0 : 1;
        for (std::size_t i = 0; i < coeffs.size(); ++i) {
            const PVMatrix& c = coeffs[i];
            const int lag = base + static_cast<int>(i) + (poly == 1 ? m.input_delay : 0);
            for (Index term = 0; term < c.numCoeffTerms(); ++term) {
                auto bser = basis_series(c, term, d.p, n);
                for (Index r = 0; r < c.rows(); ++r)
                    for (Index col = 0; col < c.cols(); ++col) {
                        auto it = free_index.find({poly, base + static_cast<int>(i), term, r, col});
                        const bool isFree = it != free_index.end();
                        const double val = c.coeffEntry(term, r, col);
                        if (!isFree && val == 0.0) continue;
                        for (Index t = skip; t < n; ++t) {
                            Index src = t - lag;
                            double s = src >= 0 ? (*signal)(src, col) : 0.0;
                            double z = sign * bser[static_cast<std::size_t>(t)] * s;
                            Index row = (t - skip) * ny + r;
                            if (isFree)
                                sys.phi(row, it->second) = z;
                            else
                                sys.rhs(row) -= val * z;
                        }
                    }
            }
        }
    }
    return sys;
}

inline Vector solve_ridge(const Matrix& phi, const Vector& rhs, double lambda, bool require_rank) {
    const Index ntheta = phi.cols();
    if (lambda > 0.0) {
        Matrix aug(phi.rows() + ntheta, ntheta);
        aug << phi, std::sqrt(lambda) * Matrix::Identity(ntheta, ntheta);
        Vector b = Vector::Zero(aug.rows());
        b.head(phi.rows()) = rhs;
        return aug.colPivHouseholderQr().solve(b);
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(phi);
    if (require_rank && qr.rank() < ntheta)
        throw std::runtime_error("regression rank deficient (rank " + std::to_string(qr.rank()) +
                                 " of " + std::to_string(ntheta) + "); add regularization");
    return qr.solve(rhs);
}

// GCV(lambda) = m ||(I - H)Y||^2 / tr(I - H)^2 with W = I.
inline double select_gcv_lambda(const Matrix& phi, const Vector& rhs, const EstimOptions& opts) {
    Eigen::BDCSVD<Matrix> svd(phi, Eigen::ComputeThinU);
    const Vector s2 = svd.singularValues().array().square();
    const Vector uty = svd.matrixU().transpose() * rhs;
    const double off_span = rhs.squaredNorm() - uty.squaredNorm();  // outside column space
    const auto m = static_cast<double>(phi.rows());
    double best_gcv = std::numeric_limits<double>::infinity();
    double best_lambda = opts.gcv_lambda_min;
    for (int k = 0; k < opts.gcv_grid; ++k) {
        double f = static_cast<double>(k) / (opts.gcv_grid - 1);
        double lambda = opts.gcv_lambda_min *
                        std::pow(opts.gcv_lambda_max / opts.gcv_lambda_min, f);
        double resid = off_span;
        double trace = m;
        for (Index i = 0; i < s2.size(); ++i) {
            double shrink = lambda / (s2(i) + lambda);
            resid += uty(i) * uty(i) * shrink * shrink;
            trace -= s2(i) / (s2(i) + lambda);
        }
        double gcv = m * resid / (trace * trace);
        if (gcv < best_gcv) {
            best_gcv = gcv;
            best_lambda = lambda;
        }
    }
    return best_lambda;
}

inline FitReport finish_report(LpvIdPoly model, std::vector<ParamRef> layout, const Dataset& d,
                               std::vector<double> trace, int iterations) {
    FitReport rep{std::move(model), std::move(layout), Vector(), std::move(trace), 0.0, 0.0,
                  iterations};
    rep.theta = get_theta(rep.model, rep.layout);
    auto pred = predict(rep.model, d);
    rep.final_loss = pem_loss(pred.eps, pred.skip);
    rep.bfr_est = bfr(d.y.bottomRows(d.length() - pred.skip),
                      pred.yhat.bottomRows(d.length() - pred.skip));
    return rep;
}

} // namespace detail

/// Linear-regression estimation of LPV-ARX model sets, with optional
/// Tikhonov regularization and GCV-tuned weight.
inline FitReport lpvarx(const LpvIdPoly& tmpl, const Dataset& d, const EstimOptions& opts = {}) {
    opts.validate();
    if (tmpl.structure() != IoStructure::Arx)
        throw std::invalid_argument("lpvarx: template is not ARX-structured");
    LpvIdPoly model = tmpl;
    auto layout = parameter_layout(model);
    detail::RegressorSignals sig{&d.y, &d.u, nullptr, nullptr, nullptr};
    auto sys = detail::build_regression(model, layout, d, sig);

    double lambda = 0.0;
    bool require_rank = true;
    switch (opts.regularization) {
        case EstimOptions::Regularization::None:
            break;
        case EstimOptions::Regularization::Tikhonov:
            lambda = opts.lambda;
            require_rank = false;
            break;
        case EstimOptions::Regularization::Gcv:
            lambda = detail::select_gcv_lambda(sys.phi, sys.rhs, opts);
            require_rank = false;
            break;
    }
    Vector theta = detail::solve_ridge(sys.phi, sys.rhs, lambda, require_rank);
    set_theta(model, layout, theta);
    return detail::finish_report(std::move(model), std::move(layout), d, {}, 1);
}

/// Pseudo-linear regression for ARMAX / OE / BJ: iterated least squares
/// with the unmeasured regressor signals replaced by current estimates.
inline FitReport plr_estimate(const LpvIdPoly& tmpl, const Dataset& d,
                              const EstimOptions& opts = {}) {
    opts.validate();
    const IoStructure st = tmpl.structure();
    if (st != IoStructure::Armax && st != IoStructure::Oe && st != IoStructure::Bj)
        throw std::invalid_argument("plr_estimate: template must be ARMAX, OE or BJ");

    // ARX initialization: regress with the output polynomial of the
    // process part (A for ARMAX, F for OE/BJ) and B.
    LpvIdPoly model = tmpl;
    {
        LpvIdPoly arx(st == IoStructure::Armax ? tmpl.A : tmpl.F, tmpl.B, {}, {}, {},
                      tmpl.input_delay);
        auto arx_fit = lpvarx(arx, d, EstimOptions{});
        if (st == IoStructure::Armax)
            model.A = arx_fit.model.A;
        else
            model.F = arx_fit.model.A;
        model.B = arx_fit.model.B;
    }
    auto layout = parameter_layout(tmpl);
    // noise polynomials start from zero coefficients
    for (const auto& p : layout)
        if (p.poly == 2 || p.poly == 3)
            detail::coeff_of(model, p.poly, p.lag).setCoeffEntry(p.term, p.row, p.col, 0.0);

    Vector theta = get_theta(model, layout);
    std::vector<double> trace;
    double best_v = std::numeric_limits<double>::infinity();
    Vector best_theta = theta;
    int it = 0;
    for (; it < opts.max_iter; ++it) {
        auto pred = predict(model, d);
        double v = pem_loss(pred.eps, pred.skip);
        trace.push_back(v);
        if (v < best_v) {
            best_v = v;
            best_theta = theta;
        } else if (v > 10.0 * best_v) {
            break;  // diverging iteration
        }
        detail::RegressorSignals sig{&d.y, &d.u, &pred.eps, &pred.v, &pred.ybreve};
        auto sys = detail::build_regression(model, layout, d, sig);
        Vector next = detail::solve_ridge(sys.phi, sys.rhs, 0.0, false);
        double change = (next - theta).norm() / (theta.norm() + 1e-12);
        theta = next;
        set_theta(model, layout, theta);
        if (change < opts.rel_tol) {
            ++it;
            break;
        }
    }
    {
        auto pred = predict(model, d);
        double v = pem_loss(pred.eps, pred.skip);
        if (v < best_v) {
            best_v = v;
            best_theta = theta;
        }
    }
    set_theta(model, layout, best_theta);
    return detail::finish_report(std::move(model), std::move(layout), d, std::move(trace), it);
}

namespace detail {

struct EvaluatedModel {
    EvaluatedPoly A, B, C, D, F;
};

inline EvaluatedModel eval_model(const LpvIdPoly& m, const Dataset& d) {
    const Index n = d.length();
    return {eval_poly(m.A, d.p, n), eval_poly(m.B, d.p, n), eval_poly(m.C, d.p, n),
            eval_poly(m.D, d.p, n), eval_poly(m.F, d.p, n)};
}

// Sensitivity of the predictor recursion w.r.t. one free parameter:
// differentiate the ybreve / v / eps recursions coefficient-wise.
inline Matrix predictor_sensitivity(const LpvIdPoly& m, const Dataset& d, const EvaluatedModel& em,
                                    const PredictResult& nom, const ParamRef& pr) {
    const Index n = d.length();
    const Index ny = m.numOutputs();
    const PVMatrix& coeff = coeff_of(m, pr.poly, pr.lag);
    auto bser = basis_series(coeff, pr.term, d.p, n);
    const int lag_u = pr.lag;  // for B the stored lag already excludes tau_d

    Matrix dyb = Matrix::Zero(n, ny), dv = Matrix::Zero(n, ny), de = Matrix::Zero(n, ny);
    for (Index t = 0; t < n; ++t) {
        Vector a = Vector::Zero(ny);
        for (std::size_t i = 0; i < em.F.coeff.size(); ++i)
            a -= em.F.coeff[i][static_cast<std::size_t>(t)] *
                 lagged_row(dyb, t, static_cast<Index>(i) + 1, ny);
        if (pr.poly == 4) {
            Index src = t - pr.lag;
            if (src >= 0) a(pr.row) -= bser[static_cast<std::size_t>(t)] * nom.ybreve(src, pr.col);
        }
        if (pr.poly == 1) {
            Index src = t - lag_u - m.input_delay;
            if (src >= 0) a(pr.row) += bser[static_cast<std::size_t>(t)] * d.u(src, pr.col);
        }
        dyb.row(t) = a.transpose();

        Vector b = -a;
        if (pr.poly == 0) {
            Index src = t - pr.lag;
            if (src >= 0) b(pr.row) += bser[static_cast<std::size_t>(t)] * d.y(src, pr.col);
        }
        dv.row(t) = b.transpose();

        Vector c = b;
        for (std::size_t i = 0; i < em.D.coeff.size(); ++i)
            c += em.D.coeff[i][static_cast<std::size_t>(t)] *
                 lagged_row(dv, t, static_cast<Index>(i) + 1, ny);
        if (pr.poly == 3) {
            Index src = t - pr.lag;
            if (src >= 0) c(pr.row) += bser[static_cast<std::size_t>(t)] * nom.v(src, pr.col);
        }
        for (std::size_t i = 0; i < em.C.coeff.size(); ++i)
            c -= em.C.coeff[i][static_cast<std::size_t>(t)] *
                 lagged_row(de, t, static_cast<Index>(i) + 1, ny);
        if (pr.poly == 2) {
            Index src = t - pr.lag;
            if (src >= 0) c(pr.row) -= bser[static_cast<std::size_t>(t)] * nom.eps(src, pr.col);
        }
        de.row(t) = c.transpose();
    }
    return de;
}

inline Matrix residual_jacobian(LpvIdPoly& model, const std::vector<ParamRef>& layout,
                                const Dataset& d, const PredictResult& nom,
                                EstimOptions::Gradient kind) {
    const Index n = d.length();
    const Index ny = model.numOutputs();
    const Index skip = nom.skip;
    Matrix jac((n - skip) * ny, static_cast<Index>(layout.size()));
    if (kind == EstimOptions::Gradient::Sensitivity) {
        auto em = eval_model(model, d);
        for (std::size_t j = 0; j < layout.size(); ++j) {
            Matrix de = predictor_sensitivity(model, d, em, nom, layout[j]);
            for (Index t = skip; t < n; ++t)
                jac.block((t - skip) * ny, static_cast<Index>(j), ny, 1) =
                    de.row(t).transpose();
        }
    } else {
        Vector theta = get_theta(model, layout);
        for (std::size_t j = 0; j < layout.size(); ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(theta(static_cast<Index>(j))));
            Vector tp = theta, tm = theta;
            tp(static_cast<Index>(j)) += h;
            tm(static_cast<Index>(j)) -= h;
            set_theta(model, layout, tp);
            Matrix ep = predict(model, d).eps;
            set_theta(model, layout, tm);
            Matrix em2 = predict(model, d).eps;
            set_theta(model, layout, theta);
            for (Index t = skip; t < n; ++t)
                jac.block((t - skip) * ny, static_cast<Index>(j), ny, 1) =
                    ((ep.row(t) - em2.row(t)) / (2.0 * h)).transpose();
        }
    }
    return jac;
}

inline Vector stack_residuals(const Matrix& eps, Index skip) {
    const Index n = eps.rows() - skip;
    Matrix tail = eps.bottomRows(n);
    tail.transposeInPlace();
    return Eigen::Map<Vector>(tail.data(), tail.size());
}

} // namespace detail

/// Damped Gauss-Newton (Levenberg-Marquardt) refinement of the
/// prediction-error loss, applicable to every IO structure.
inline FitReport lpvpolyest(const LpvIdPoly& init, const Dataset& d,
                            const EstimOptions& opts = {}) {
    opts.validate();
    LpvIdPoly model = init;
    auto layout = parameter_layout(init);
    Vector theta = get_theta(model, layout);

    auto nom = predict(model, d);
    double v = pem_loss(nom.eps, nom.skip);
    if (!std::isfinite(v)) throw std::runtime_error("lpvpolyest: non-finite loss at initial theta");
    const auto nres = static_cast<double>(nom.eps.rows() - nom.skip);
    std::vector<double> trace{v};

    double mu = 0.0;
    int it = 0;
    for (; it < opts.max_iter; ++it) {
        Matrix jac = detail::residual_jacobian(model, layout, d, nom, opts.gradient);
        Vector res = detail::stack_residuals(nom.eps, nom.skip);
        Matrix h = jac.transpose() * jac;
        Vector g = jac.transpose() * res;
        if (mu == 0.0) mu = 1e-3 * std::max(h.diagonal().maxCoeff(), 1e-12);
        if (g.lpNorm<Eigen::Infinity>() < 1e-14) break;

        bool accepted = false;
        for (int attempt = 0; attempt < 60; ++attempt) {
            Matrix damped = h + mu * Matrix::Identity(h.rows(), h.cols());
            Vector delta = damped.ldlt().solve(-g);
            Vector cand = theta + delta;
            set_theta(model, layout, cand);
            auto pred = predict(model, d);
            double vc = pred.eps.allFinite() ? pred.eps.bottomRows(pred.eps.rows() - pred.skip)
                                                       .squaredNorm() / nres
                                             : std::numeric_limits<double>::infinity();
            if (std::isfinite(vc) && vc <= v) {
                const double rel_step = delta.norm() / (theta.norm() + 1e-12);
                theta = cand;
                nom = std::move(pred);
                v = vc;
                trace.push_back(v);
                mu = std::max(mu * 0.25, 1e-14);
                accepted = true;
                if (rel_step < opts.rel_tol) it = opts.max_iter;  // converged
                break;
            }
            mu *= 4.0;  // Jacobian rank collapse handled by raising damping
        }
        if (!accepted) break;
    }
    set_theta(model, layout, theta);
    return detail::finish_report(std::move(model), std::move(layout), d, std::move(trace),
                                 static_cast<int>(trace.size()) - 1);
}

/// Two-stage SISO instrumental-variable estimation: instruments are the
/// ARX regressors with lagged outputs replaced by the noise-free
/// simulation of an auxiliary least-squares model.
inline FitReport lpviv(const LpvIdPoly& tmpl, const Dataset& d, const EstimOptions& opts = {}) {
    opts.validate();
    if (tmpl.numInputs() != 1 || tmpl.numOutputs() != 1)
        throw std::invalid_argument("lpviv: only SISO model structures are supported");
    if (tmpl.structure() != IoStructure::Arx)
        throw std::invalid_argument("lpviv: template is not ARX-structured");

    LpvIdPoly model = tmpl;
    auto layout = parameter_layout(model);
    detail::RegressorSignals sig{&d.y, &d.u, nullptr, nullptr, nullptr};
    auto sys = detail::build_regression(model, layout, d, sig);

    // stage 1: plain least squares auxiliary model
    LpvIdPoly aux = lpvarx(tmpl, d, EstimOptions{}).model;
    Vector theta = get_theta(aux, layout);
    for (int stage = 0; stage < 2; ++stage) {
        Matrix ysim = simulate_io(aux.processModel(), d.u, d.p);
        Dataset instrumented(d.u, d.p, ysim, d.sample_time);
        detail::RegressorSignals zsig{&ysim, &d.u, nullptr, nullptr, nullptr};
        auto zsys = detail::build_regression(model, layout, instrumented, zsig);
        Matrix ztphi = zsys.phi.transpose() * sys.phi;
        Eigen::JacobiSVD<Matrix> svd(ztphi);
        const auto& s = svd.singularValues();
        if (s(s.size() - 1) <= 0.0 || s(0) / s(s.size() - 1) > 1e12)
            throw std::runtime_error("lpviv: instrument-regressor product is singular");
        theta = ztphi.fullPivLu().solve(zsys.phi.transpose() * sys.rhs);
        set_theta(aux, layout, theta);
    }
    set_theta(model, layout, theta);
    return detail::finish_report(std::move(model), std::move(layout), d, {}, 2);
}

} // namespace lpvcore
