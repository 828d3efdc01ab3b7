#pragma once

#include "pvmatrix.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <optional>

namespace lpvcore {

namespace detail {

inline void check_domain(const std::vector<const PVMatrix*>& ms) {
    for (std::size_t i = 1; i < ms.size(); ++i)
        if (ms[i]->domain() != ms[0]->domain())
            throw std::invalid_argument("model: mixed CT/DT coefficient domains");
}

} // namespace detail

/// LPV input-output representation with monic output polynomial:
///   y_t + sum_i (A_i<>p)_t y_{t-i} = sum_j (B_j<>p)_t u_{t-j-tau_d}
struct LpvIoModel {
    std::vector<PVMatrix> a_polys;  // A_1..A_na, each ny x ny
    std::vector<PVMatrix> b_polys;  // B_0..B_nb, each ny x nu
    int input_delay = 0;

    LpvIoModel(std::vector<PVMatrix> a, std::vector<PVMatrix> b, int tau_d = 0)
        : a_polys(std::move(a)), b_polys(std::move(b)), input_delay(tau_d) {
        if (tau_d < 0) throw std::invalid_argument("lpvio: negative input delay");
        if (b_polys.empty()) throw std::invalid_argument("lpvio: B polynomial empty");
        const Index ny = b_polys[0].rows();
        std::vector<const PVMatrix*> all;
        for (const auto& m : a_polys) {
            if (m.rows() != ny || m.cols() != ny)
                throw std::invalid_argument("lpvio: A coefficient shape mismatch");
            all.push_back(&m);
        }
        for (const auto& m : b_polys) {
            if (m.rows() != ny || m.cols() != b_polys[0].cols())
                throw std::invalid_argument("lpvio: B coefficient shape mismatch");
            all.push_back(&m);
        }
        detail::check_domain(all);
    }

    [[nodiscard]] Index numOutputs() const { return b_polys[0].rows(); }
    [[nodiscard]] Index numInputs() const { return b_polys[0].cols(); }
    [[nodiscard]] TimeDomain domain() const { return b_polys[0].domain(); }
};

inline LpvIoModel lpvio(std::vector<PVMatrix> a, std::vector<PVMatrix> b, int tau_d = 0) {
    return LpvIoModel(std::move(a), std::move(b), tau_d);
}

/// LPV state-space representation, optionally in innovation form
/// (K present, noise covariance Xi).
struct LpvSsModel {
    PVMatrix A, B, C, D;
    std::optional<PVMatrix> K;
    std::optional<Matrix> Xi;

    LpvSsModel(PVMatrix a, PVMatrix b, PVMatrix c, PVMatrix d,
               std::optional<PVMatrix> k = std::nullopt,
               std::optional<Matrix> xi = std::nullopt)
        : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)),
          K(std::move(k)), Xi(std::move(xi)) {
        if (A.rows() != A.cols()) throw std::invalid_argument("lpvss: A must be square");
        if (B.rows() != A.rows() || C.cols() != A.rows() ||
            D.rows() != C.rows() || D.cols() != B.cols())
            throw std::invalid_argument("lpvss: dimension chain mismatch");
        std::vector<const PVMatrix*> all{&A, &B, &C, &D};
        if (K) {
            if (K->rows() != A.rows() || K->cols() != C.rows())
                throw std::invalid_argument("lpvss: K dimension mismatch");
            all.push_back(&*K);
        }
        detail::check_domain(all);
        if (Xi) {
            if (!K) throw std::invalid_argument("lpvss: Xi requires innovation form (K)");
            if (Xi->rows() != C.rows() || Xi->cols() != C.rows() ||
                !Xi->isApprox(Xi->transpose(), 1e-12))
                throw std::invalid_argument("lpvss: Xi must be symmetric");
            Eigen::SelfAdjointEigenSolver<Matrix> es(*Xi);
            if (es.eigenvalues().minCoeff() <= 0.0)
                throw std::invalid_argument("lpvss: Xi must be positive definite");
        }
    }

    [[nodiscard]] Index numStates() const { return A.rows(); }
    [[nodiscard]] Index numInputs() const { return B.cols(); }
    [[nodiscard]] Index numOutputs() const { return C.rows(); }
    [[nodiscard]] TimeDomain domain() const { return A.domain(); }
};

inline LpvSsModel lpvss(PVMatrix a, PVMatrix b, PVMatrix c, PVMatrix d,
                        std::optional<PVMatrix> k = std::nullopt,
                        std::optional<Matrix> xi = std::nullopt) {
    return LpvSsModel(std::move(a), std::move(b), std::move(c), std::move(d),
                      std::move(k), std::move(xi));
}

/// LTI block G in feedback with the parameter-varying block Delta:
///   x+ = A x + Bw w + Bu u
///   z  = Cz x + Dzw w + Dzu u
///   y  = Cy x + Dyw w + Dyu u
///   w  = (Delta<>p) z
struct LpvLfrModel {
    Matrix A, Bw, Bu, Cz, Cy, Dzw, Dzu, Dyw, Dyu;
    PVMatrix Delta;  // n_w x n_z

    LpvLfrModel(Matrix a, Matrix bw, Matrix bu, Matrix cz, Matrix cy, Matrix dzw,
                Matrix dzu, Matrix dyw, Matrix dyu, PVMatrix delta)
        : A(std::move(a)), Bw(std::move(bw)), Bu(std::move(bu)), Cz(std::move(cz)),
          Cy(std::move(cy)), Dzw(std::move(dzw)), Dzu(std::move(dzu)),
          Dyw(std::move(dyw)), Dyu(std::move(dyu)), Delta(std::move(delta)) {
        const Index nx = A.rows(), nw = Bw.cols(), nz = Cz.rows(), nu = Bu.cols(), ny = Cy.rows();
        if (A.cols() != nx || Bw.rows() != nx || Bu.rows() != nx || Cz.cols() != nx ||
            Cy.cols() != nx || Dzw.rows() != nz || Dzw.cols() != nw || Dzu.rows() != nz ||
            Dzu.cols() != nu || Dyw.rows() != ny || Dyw.cols() != nw || Dyu.rows() != ny ||
            Dyu.cols() != nu || Delta.rows() != nw || Delta.cols() != nz)
            throw std::invalid_argument("lpvlfr: block dimensions inconsistent");
    }

    [[nodiscard]] Index numStates() const { return A.rows(); }
    [[nodiscard]] Index numInputs() const { return Bu.cols(); }
    [[nodiscard]] Index numOutputs() const { return Cy.rows(); }
    [[nodiscard]] Index loopWidth() const { return Bw.cols(); }
    [[nodiscard]] Index loopHeight() const { return Cz.rows(); }
};

inline LpvLfrModel lpvlfr(Matrix a, Matrix bw, Matrix bu, Matrix cz, Matrix cy, Matrix dzw,
                          Matrix dzu, Matrix dyw, Matrix dyu, PVMatrix delta) {
    return LpvLfrModel(std::move(a), std::move(bw), std::move(bu), std::move(cz), std::move(cy),
                       std::move(dzw), std::move(dzu), std::move(dyw), std::move(dyu),
                       std::move(delta));
}

// --- SS -> LFR embedding ----------------------------------------------------

/// Pull the scheduling dependence of [A B; C D] out into a diagonal Delta
/// via rank factorization of each term's coefficient matrix. D_zw = 0.
inline LpvLfrModel ss_to_lfr(const LpvSsModel& m) {
    for (const PVMatrix* p : {&m.A, &m.B, &m.C, &m.D})
        if (p->hasCustomBasis())
            throw std::invalid_argument("ss_to_lfr: custom-basis dependence not convertible");

    const Index nx = m.numStates(), nu = m.numInputs(), ny = m.numOutputs();
    // stack [A B; C D] as one PVMatrix on a shared timemap
    PVMatrix big = vconcat(hconcat(m.A, m.B), hconcat(m.C, m.D));
    const TimeMap& tm = big.timemap();

    const Matrix M0 = big.constantCoeff();
    std::vector<Matrix> Ls, Rs;
    std::vector<BasisFunction> bases;
    std::vector<Index> ranks;
    Index nw = 0;
    for (const auto& term : big.terms()) {
        Eigen::JacobiSVD<Matrix> svd(term.coeff, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& s = svd.singularValues();
        Index r = 0;
        for (Index i = 0; i < s.size(); ++i)
            if (s(i) > 1e-12 * s(0)) ++r;
        Matrix L = svd.matrixU().leftCols(r) * s.head(r).cwiseSqrt().asDiagonal();
        Matrix R = s.head(r).cwiseSqrt().asDiagonal() * svd.matrixV().leftCols(r).transpose();
        Ls.push_back(std::move(L));
        Rs.push_back(std::move(R));
        bases.push_back(term.basis);
        ranks.push_back(r);
        nw += r;
    }

    Matrix Bw = Matrix::Zero(nx, nw), Dyw = Matrix::Zero(ny, nw);
    Matrix Cz = Matrix::Zero(nw, nx), Dzu = Matrix::Zero(nw, nu);
    Matrix deltaConst = Matrix::Zero(nw, nw);
    std::vector<PVMatrix::Term> deltaTerms;
    Index off = 0;
    for (std::size_t i = 0; i < Ls.size(); ++i) {
        const Index r = ranks[i];
        Bw.middleCols(off, r) = Ls[i].topRows(nx);
        Dyw.middleCols(off, r) = Ls[i].bottomRows(ny);
        Cz.middleRows(off, r) = Rs[i].leftCols(nx);
        Dzu.middleRows(off, r) = Rs[i].rightCols(nu);
        Matrix sel = Matrix::Zero(nw, nw);
        sel.block(off, off, r, r).setIdentity();
        deltaTerms.push_back({bases[i], std::move(sel)});
        off += r;
    }
    PVMatrix delta(std::move(deltaConst), std::move(deltaTerms), tm);

    return LpvLfrModel(M0.topLeftCorner(nx, nx), Bw, M0.topRightCorner(nx, nu), Cz,
                       M0.bottomLeftCorner(ny, nx), Matrix::Zero(nw, nw), Dzu, Dyw,
                       M0.bottomRightCorner(ny, nu), std::move(delta));
}

// --- simulation -------------------------------------------------------------

inline void check_lengths(Index n, const Matrix& u, const SchedulingTrajectory& p) {
    if (u.rows() != n || p.length() != n)
        throw std::invalid_argument("simulate: input/scheduling length mismatch");
}

/// Simulate the IO recursion. `init` rows are the most recent past
/// outputs (row 0 = y_{-1}, row 1 = y_{-2}, ...); defaults to zeros.
/// Inputs before t = 0 are zero-padded.
inline Matrix simulate_io(const LpvIoModel& m, const Matrix& u, const SchedulingTrajectory& p,
                          const Matrix& init = Matrix()) {
    if (m.domain() != TimeDomain::DT)
        throw std::invalid_argument("simulate_io: CT simulation not supported");
    const Index n = u.rows();
    check_lengths(n, u, p);
    if (u.cols() != m.numInputs()) throw std::invalid_argument("simulate_io: input width mismatch");
    const Index ny = m.numOutputs();
    const auto na = static_cast<Index>(m.a_polys.size());
    Matrix y = Matrix::Zero(n, ny);
    auto pastY = [&](Index t, Index lag) -> Vector {
        Index idx = t - lag;
        if (idx >= 0) return y.row(idx).transpose();
        Index initRow = -idx - 1;
        if (initRow < init.rows()) return init.row(initRow).transpose();
        return Vector::Zero(ny);
    };
    auto pastU = [&](Index t, Index lag) -> Vector {
        Index idx = t - lag;
        if (idx >= 0) return u.row(idx).transpose();
        return Vector::Zero(u.cols());
    };
    for (Index t = 0; t < n; ++t) {
        Vector yt = Vector::Zero(ny);
        for (Index i = 0; i < na; ++i) {
            Vector rho = extended_sample_at(m.a_polys[static_cast<std::size_t>(i)].timemap(), p, t);
            yt -= m.a_polys[static_cast<std::size_t>(i)].eval(rho) * pastY(t, i + 1);
        }
        for (std::size_t j = 0; j < m.b_polys.size(); ++j) {
            Vector rho = extended_sample_at(m.b_polys[j].timemap(), p, t);
            yt += m.b_polys[j].eval(rho) * pastU(t, static_cast<Index>(j) + m.input_delay);
        }
        y.row(t) = yt.transpose();
    }
    return y;
}

struct SsSimResult {
    Matrix y;  // N x ny
    Matrix x;  // N x nx (state at each sample instant)
};

/// Exact recursion of the (innovation-form) state-space model. `e` is an
/// optional noise trajectory fed through K and added to the output.
inline SsSimResult simulate_ss(const LpvSsModel& m, const Matrix& u, const SchedulingTrajectory& p,
                               const Vector& x0 = Vector(), const Matrix& e = Matrix()) {
    if (m.domain() != TimeDomain::DT)
        throw std::invalid_argument("simulate_ss: CT simulation not supported");
    const Index n = u.rows();
    check_lengths(n, u, p);
    if (u.cols() != m.numInputs()) throw std::invalid_argument("simulate_ss: input width mismatch");
    if (e.size() != 0 && (e.rows() != n || e.cols() != m.numOutputs()))
        throw std::invalid_argument("simulate_ss: noise trajectory length mismatch");
    const Index nx = m.numStates();
    Vector x = x0.size() ? x0 : Vector::Zero(nx);
    if (x.size() != nx) throw std::invalid_argument("simulate_ss: x0 dimension mismatch");
    SsSimResult out;
    out.y.resize(n, m.numOutputs());
    out.x.resize(n, nx);
    for (Index t = 0; t < n; ++t) {
        out.x.row(t) = x.transpose();
        Vector ut = u.row(t).transpose();
        Vector rhoA = extended_sample_at(m.A.timemap(), p, t);
        Vector rhoB = extended_sample_at(m.B.timemap(), p, t);
        Vector rhoC = extended_sample_at(m.C.timemap(), p, t);
        Vector rhoD = extended_sample_at(m.D.timemap(), p, t);
        Vector yt = m.C.eval(rhoC) * x + m.D.eval(rhoD) * ut;
        Vector xn = m.A.eval(rhoA) * x + m.B.eval(rhoB) * ut;
        if (m.K && e.size() != 0) {
            Vector et = e.row(t).transpose();
            yt += et;
            xn += m.K->eval(extended_sample_at(m.K->timemap(), p, t)) * et;
        }
        out.y.row(t) = yt.transpose();
        x = xn;
    }
    return out;
}

struct IllPosedLoop : std::runtime_error {
    Index time_index;
    explicit IllPosedLoop(Index t)
        : std::runtime_error("simulate_lfr: algebraic loop ill-posed at t = " + std::to_string(t)),
          time_index(t) {}
};

inline Matrix simulate_lfr(const LpvLfrModel& m, const Matrix& u, const SchedulingTrajectory& p,
                           const Vector& x0 = Vector(), double det_tol = 1e-10) {
    const Index n = u.rows();
    check_lengths(n, u, p);
    if (u.cols() != m.numInputs()) throw std::invalid_argument("simulate_lfr: input width mismatch");
    const Index nx = m.numStates(), nw = m.loopWidth();
    Vector x = x0.size() ? x0 : Vector::Zero(nx);
    if (x.size() != nx) throw std::invalid_argument("simulate_lfr: x0 dimension mismatch");
    Matrix y(n, m.numOutputs());
    for (Index t = 0; t < n; ++t) {
        Vector ut = u.row(t).transpose();
        Vector w = Vector::Zero(nw);
        if (nw > 0) {
            Matrix delta = m.Delta.eval(extended_sample_at(m.Delta.timemap(), p, t));
            Matrix loop = Matrix::Identity(nw, nw) - delta * m.Dzw;
            Eigen::FullPivLU<Matrix> lu(loop);
            if (std::abs(lu.determinant()) < det_tol) throw IllPosedLoop(t);
            w = lu.solve(delta * (m.Cz * x + m.Dzu * ut));
        }
        y.row(t) = (m.Cy * x + m.Dyw * w + m.Dyu * ut).transpose();
        x = m.A * x + m.Bw * w + m.Bu * ut;
    }
    return y;
}

// --- interconnection --------------------------------------------------------

enum class Interconnection { Series, Parallel, Feedback, HConcat, VConcat };

namespace detail {

inline PVMatrix block_diag_delta(const PVMatrix& d1, const PVMatrix& d2) {
    // diag(Delta1, Delta2) without coupling terms
    PVMatrix top = hconcat(d1, PVMatrix(Matrix::Zero(d1.rows(), d2.cols()), d1.domain()));
    PVMatrix bot = hconcat(PVMatrix(Matrix::Zero(d2.rows(), d1.cols()), d2.domain()), d2);
    return vconcat(top, bot);
}

} // namespace detail

/// Compose two LFR models at the signal level. Series feeds m1's output
/// into m2; Feedback closes the negative loop y = m1(u - m2(y)).
inline LpvLfrModel interconnect(Interconnection kind, const LpvLfrModel& m1, const LpvLfrModel& m2) {
    const Index nx1 = m1.numStates(), nx2 = m2.numStates();
    const Index nw1 = m1.loopWidth(), nw2 = m2.loopWidth();
    const Index nz1 = m1.loopHeight(), nz2 = m2.loopHeight();
    const Index nu1 = m1.numInputs(), nu2 = m2.numInputs();
    const Index ny1 = m1.numOutputs(), ny2 = m2.numOutputs();
    PVMatrix delta = detail::block_diag_delta(m1.Delta, m2.Delta);

    auto zeros = [](Index r, Index c) { return Matrix::Zero(r, c); };

    switch (kind) {
        case Interconnection::Series: {
            if (ny1 != nu2) throw std::invalid_argument("interconnect: series port mismatch");
            Matrix A(nx1 + nx2, nx1 + nx2), Bw(nx1 + nx2, nw1 + nw2), Bu(nx1 + nx2, nu1);
            A << m1.A, zeros(nx1, nx2), m2.Bu * m1.Cy, m2.A;
            Bw << m1.Bw, zeros(nx1, nw2), m2.Bu * m1.Dyw, m2.Bw;
            Bu << m1.Bu, m2.Bu * m1.Dyu;
            Matrix Cz(nz1 + nz2, nx1 + nx2), Dzw(nz1 + nz2, nw1 + nw2), Dzu(nz1 + nz2, nu1);
            Cz << m1.Cz, zeros(nz1, nx2), m2.Dzu * m1.Cy, m2.Cz;
            Dzw << m1.Dzw, zeros(nz1, nw2), m2.Dzu * m1.Dyw, m2.Dzw;
            Dzu << m1.Dzu, m2.Dzu * m1.Dyu;
            Matrix Cy(ny2, nx1 + nx2), Dyw(ny2, nw1 + nw2);
            Cy << m2.Dyu * m1.Cy, m2.Cy;
            Dyw << m2.Dyu * m1.Dyw, m2.Dyw;
            return LpvLfrModel(A, Bw, Bu, Cz, Cy, Dzw, Dzu, Dyw, m2.Dyu * m1.Dyu, std::move(delta));
        }
        case Interconnection::Parallel:
        case Interconnection::HConcat: {
            const bool shared_input = kind == Interconnection::Parallel;
            if (shared_input && nu1 != nu2)
                throw std::invalid_argument("interconnect: parallel input mismatch");
            if (ny1 != ny2) throw std::invalid_argument("interconnect: output dimension mismatch");
            const Index nu = shared_input ? nu1 : nu1 + nu2;
            Matrix A(nx1 + nx2, nx1 + nx2), Bw(nx1 + nx2, nw1 + nw2), Bu(nx1 + nx2, nu);
            A << m1.A, zeros(nx1, nx2), zeros(nx2, nx1), m2.A;
            Bw << m1.Bw, zeros(nx1, nw2), zeros(nx2, nw1), m2.Bw;
            if (shared_input)
                Bu << m1.Bu, m2.Bu;
            else
                Bu << m1.Bu, zeros(nx1, nu2), zeros(nx2, nu1), m2.Bu;
            Matrix Cz(nz1 + nz2, nx1 + nx2), Dzw(nz1 + nz2, nw1 + nw2), Dzu(nz1 + nz2, nu);
            Cz << m1.Cz, zeros(nz1, nx2), zeros(nz2, nx1), m2.Cz;
            Dzw << m1.Dzw, zeros(nz1, nw2), zeros(nz2, nw1), m2.Dzw;
            if (shared_input)
                Dzu << m1.Dzu, m2.Dzu;
            else
                Dzu << m1.Dzu, zeros(nz1, nu2), zeros(nz2, nu1), m2.Dzu;
            Matrix Cy(ny1, nx1 + nx2), Dyw(ny1, nw1 + nw2), Dyu(ny1, nu);
            Cy << m1.Cy, m2.Cy;
            Dyw << m1.Dyw, m2.Dyw;
            if (shared_input)
                Dyu = m1.Dyu + m2.Dyu;
            else
                Dyu << m1.Dyu, m2.Dyu;
            return LpvLfrModel(A, Bw, Bu, Cz, Cy, Dzw, Dzu, Dyw, Dyu, std::move(delta));
        }
        case Interconnection::VConcat: {
            if (nu1 != nu2) throw std::invalid_argument("interconnect: vconcat input mismatch");
            Matrix A(nx1 + nx2, nx1 + nx2), Bw(nx1 + nx2, nw1 + nw2), Bu(nx1 + nx2, nu1);
            A << m1.A, zeros(nx1, nx2), zeros(nx2, nx1), m2.A;
            Bw << m1.Bw, zeros(nx1, nw2), zeros(nx2, nw1), m2.Bw;
            Bu << m1.Bu, m2.Bu;
            Matrix Cz(nz1 + nz2, nx1 + nx2), Dzw(nz1 + nz2, nw1 + nw2), Dzu(nz1 + nz2, nu1);
            Cz << m1.Cz, zeros(nz1, nx2), zeros(nz2, nx1), m2.Cz;
            Dzw << m1.Dzw, zeros(nz1, nw2), zeros(nz2, nw1), m2.Dzw;
            Dzu << m1.Dzu, m2.Dzu;
            Matrix Cy(ny1 + ny2, nx1 + nx2), Dyw(ny1 + ny2, nw1 + nw2), Dyu(ny1 + ny2, nu1);
            Cy << m1.Cy, zeros(ny1, nx2), zeros(ny2, nx1), m2.Cy;
            Dyw << m1.Dyw, zeros(ny1, nw2), zeros(ny2, nw1), m2.Dyw;
            Dyu << m1.Dyu, m2.Dyu;
            return LpvLfrModel(A, Bw, Bu, Cz, Cy, Dzw, Dzu, Dyw, Dyu, std::move(delta));
        }
        case Interconnection::Feedback: {
            if (ny1 != nu2 || ny2 != nu1)
                throw std::invalid_argument("interconnect: feedback port mismatch");
            // y = m1(u - m2(y)); eliminate y at Delta = 0
            Matrix S = Matrix::Identity(ny1, ny1) + m1.Dyu * m2.Dyu;
            Eigen::FullPivLU<Matrix> lu(S);
            if (!lu.isInvertible())
                throw std::invalid_argument("interconnect: feedback structurally ill-posed");
            Matrix Sinv = lu.inverse();
            // y = Sinv * (Cy1 x1 - Dyu1 Cy2 x2 + Dyw1 w1 - Dyu1 Dyw2 w2 + Dyu1 u)
            Matrix Yx1 = Sinv * m1.Cy;
            Matrix Yx2 = -Sinv * m1.Dyu * m2.Cy;
            Matrix Yw1 = Sinv * m1.Dyw;
            Matrix Yw2 = -Sinv * m1.Dyu * m2.Dyw;
            Matrix Yu = Sinv * m1.Dyu;
            // u1 = u - y2,  y2 = Cy2 x2 + Dyw2 w2 + Dyu2 y
            Matrix U1x1 = -m2.Dyu * Yx1;
            Matrix U1x2 = -m2.Cy - m2.Dyu * Yx2;
            Matrix U1w1 = -m2.Dyu * Yw1;
            Matrix U1w2 = -m2.Dyw - m2.Dyu * Yw2;
            Matrix U1u = Matrix::Identity(nu1, nu1) - m2.Dyu * Yu;

            Matrix A(nx1 + nx2, nx1 + nx2), Bw(nx1 + nx2, nw1 + nw2), Bu(nx1 + nx2, nu1);
            A << m1.A + m1.Bu * U1x1, m1.Bu * U1x2, m2.Bu * Yx1, m2.A + m2.Bu * Yx2;
            Bw << m1.Bw + m1.Bu * U1w1, m1.Bu * U1w2, m2.Bu * Yw1, m2.Bw + m2.Bu * Yw2;
            Bu << m1.Bu * U1u, m2.Bu * Yu;
            Matrix Cz(nz1 + nz2, nx1 + nx2), Dzw(nz1 + nz2, nw1 + nw2), Dzu(nz1 + nz2, nu1);
            Cz << m1.Cz + m1.Dzu * U1x1, m1.Dzu * U1x2, m2.Dzu * Yx1, m2.Cz + m2.Dzu * Yx2;
            Dzw << m1.Dzw + m1.Dzu * U1w1, m1.Dzu * U1w2, m2.Dzu * Yw1, m2.Dzw + m2.Dzu * Yw2;
            Dzu << m1.Dzu * U1u, m2.Dzu * Yu;
            Matrix Cy(ny1, nx1 + nx2), Dyw(ny1, nw1 + nw2);
            Cy << Yx1, Yx2;
            Dyw << Yw1, Yw2;
            return LpvLfrModel(A, Bw, Bu, Cz, Cy, Dzw, Dzu, Dyw, Yu, std::move(delta));
        }
    }
    throw std::logic_error("unreachable");
}

// --- frozen (LTI) analysis --------------------------------------------------

/// Extended sample matching a constant scheduling trajectory: all DT
/// shifts equal p_const, CT derivatives of order > 0 vanish.
inline Vector frozen_extended_sample(const TimeMap& tm, const Vector& p_const) {
    if (p_const.size() != tm.numChannels())
        throw std::invalid_argument("frozen: scheduling dimension mismatch");
    Vector rho(tm.extendedDim());
    Index col = 0;
    for (int order : tm.orders())
        for (Index c = 0; c < tm.numChannels(); ++c)
            rho(col++) = (tm.domain() == TimeDomain::CT && order > 0) ? 0.0 : p_const(c);
    return rho;
}

inline Matrix freeze(const PVMatrix& m, const Vector& p_const) {
    return m.eval(frozen_extended_sample(m.timemap(), p_const));
}

struct FrozenSs {
    Matrix A, B, C, D;
};

inline FrozenSs frozen(const LpvSsModel& m, const Vector& p_const) {
    return {freeze(m.A, p_const), freeze(m.B, p_const), freeze(m.C, p_const),
            freeze(m.D, p_const)};
}

struct FrozenIo {
    std::vector<Matrix> a_polys;
    std::vector<Matrix> b_polys;
    int input_delay;
};

inline FrozenIo frozen(const LpvIoModel& m, const Vector& p_const) {
    FrozenIo out;
    out.input_delay = m.input_delay;
    for (const auto& a : m.a_polys) out.a_polys.push_back(freeze(a, p_const));
    for (const auto& b : m.b_polys) out.b_polys.push_back(freeze(b, p_const));
    return out;
}

/// Poles of the frozen IO dynamics: eigenvalues of the block companion
/// matrix of the monic A polynomial.
inline Eigen::VectorXcd frozen_io_poles(const LpvIoModel& m, const Vector& p_const) {
    FrozenIo f = frozen(m, p_const);
    const Index ny = m.numOutputs();
    const auto na = static_cast<Index>(f.a_polys.size());
    if (na == 0) return Eigen::VectorXcd();
    Matrix comp = Matrix::Zero(na * ny, na * ny);
    for (Index i = 0; i < na; ++i)
        comp.block(0, i * ny, ny, ny) = -f.a_polys[static_cast<std::size_t>(i)];
    if (na > 1)
        comp.block(ny, 0, (na - 1) * ny, (na - 1) * ny).setIdentity();
    return Eigen::EigenSolver<Matrix>(comp, false).eigenvalues();
}

// --- CT -> DT, IO -> SS -----------------------------------------------------

/// Forward-Euler discretization: A_d = I + Ts A, B_d = Ts B. Dependence
/// must be shift-free (static); derivative dependence is rejected.
inline LpvSsModel euler_discretize_ss(const LpvSsModel& m, double ts) {
    if (m.domain() != TimeDomain::CT)
        throw std::invalid_argument("euler_discretize_ss: model already DT");
    if (!(ts > 0.0)) throw std::invalid_argument("euler_discretize_ss: sample time must be positive");
    auto to_dt = [&](const PVMatrix& p) {
        for (int o : p.timemap().orders())
            if (o != 0 && !p.isConstant())
                throw std::invalid_argument(
                    "euler_discretize_ss: derivative scheduling dependence not supported");
        TimeMap tm({0}, TimeDomain::DT, p.timemap().names());
        std::vector<PVMatrix::Term> terms(p.terms().begin(), p.terms().end());
        // static dependence: column layout of order 0 is preserved
        return PVMatrix(p.constantCoeff(), std::move(terms), tm);
    };
    PVMatrix Ad = Matrix::Identity(m.numStates(), m.numStates()) + ts * to_dt(m.A);
    PVMatrix Bd = ts * to_dt(m.B);
    return LpvSsModel(std::move(Ad), std::move(Bd), to_dt(m.C), to_dt(m.D));
}

/// Shift-register realization of an IO model: state stacks the lagged
/// outputs and inputs, so simulation matches simulate_io exactly.
/// Requires causal (non-positive shift) coefficient dependence.
inline LpvSsModel io_to_ss(const LpvIoModel& m) {
    if (m.domain() != TimeDomain::DT)
        throw std::invalid_argument("io_to_ss: DT models only");
    for (const auto& poly : {std::cref(m.a_polys), std::cref(m.b_polys)})
        for (const auto& c : poly.get())
            if (!c.isConstant() && c.timemap().maxOrder() > 0)
                throw std::invalid_argument("io_to_ss: anticipative scheduling dependence not supported");
    const Index ny = m.numOutputs(), nu = m.numInputs();
    const auto na = static_cast<Index>(m.a_polys.size());
    const Index nbLag = static_cast<Index>(m.b_polys.size()) - 1 + m.input_delay;
    const TimeDomain dom = TimeDomain::DT;

    // output row: y_t = -sum A_i y_{t-i} + sum B_j u_{t-j-tau}; B_0 with
    // tau = 0 becomes the direct feedthrough.
    const Index nx = na * ny + nbLag * nu;
    PVMatrix C(Matrix::Zero(ny, nx), dom);
    PVMatrix D(Matrix::Zero(ny, nu), dom);
    auto placeOut = [&](const PVMatrix& coeff, Index col) {
        PVMatrix cur = C;
        cur.setBlock(0, col, coeff);
        C = cur;
    };
    for (Index i = 0; i < na; ++i) placeOut(-m.a_polys[static_cast<std::size_t>(i)], i * ny);
    for (std::size_t j = 0; j < m.b_polys.size(); ++j) {
        const Index lag = static_cast<Index>(j) + m.input_delay;
        if (lag == 0)
            D = m.b_polys[j];
        else
            placeOut(m.b_polys[j], na * ny + (lag - 1) * nu);
    }

    PVMatrix A(Matrix::Zero(nx, nx), dom);
    PVMatrix B(Matrix::Zero(nx, nu), dom);
    if (na > 0) {
        // first output block of the state copies y_t
        A.setBlock(0, 0, C);
        B.setBlock(0, 0, D);
        for (Index i = 1; i < na; ++i)
            A.setBlock(i * ny, (i - 1) * ny, PVMatrix(Matrix::Identity(ny, ny), dom));
    }
    if (nbLag > 0) {
        B.setBlock(na * ny, 0, PVMatrix(Matrix::Identity(nu, nu), dom));
        for (Index j = 1; j < nbLag; ++j)
            A.setBlock(na * ny + j * nu, na * ny + (j - 1) * nu, PVMatrix(Matrix::Identity(nu, nu), dom));
    }
    return LpvSsModel(std::move(A), std::move(B), std::move(C), std::move(D));
}

} // namespace lpvcore
