#include <doctest.h>

#include <lpvcore/estimators.hpp>
#include <lpvcore/ssest.hpp>

#include <random>

using namespace lpvcore;

namespace {

std::mt19937_64 g_rng(31);

double rnd(double scale = 1.0) {
    return scale * std::uniform_real_distribution<double>(-1.0, 1.0)(g_rng);
}

SchedulingTrajectory random_p(Index n, double scale = 0.3) {
    Matrix s(n, 1);
    for (Index t = 0; t < n; ++t) s(t, 0) = rnd(scale);
    return SchedulingTrajectory(std::move(s), {"p"});
}

Matrix multisine(Index n, unsigned seed, double amplitude = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    Matrix u = Matrix::Zero(n, 1);
    for (int i = 1; i <= 8; ++i) {
        double ph = phase(rng);
        for (Index t = 0; t < n; ++t)
            u(t, 0) += std::sin(0.4 * i * static_cast<double>(t) + ph);
    }
    return amplitude / u.cwiseAbs().maxCoeff() * u;
}

// scalar coefficient c0 + c1 * p_{t+lag}
PVMatrix affine_coeff(int lag, double c0, double c1) {
    TimeMap tm({lag}, TimeDomain::DT, {"p"});
    std::vector<PVMatrix::Term> terms{{BasisFunction::affine(0), Matrix::Constant(1, 1, c1)}};
    return PVMatrix(Matrix::Constant(1, 1, c0), std::move(terms), tm);
}

// small-coefficient model sets of each structure with randomized theta
LpvIdPoly random_structure(IoStructure st) {
    auto c = [&](int lag) { return affine_coeff(lag, rnd(0.2), rnd(0.2)); };
    std::vector<PVMatrix> A{c(-1)}, B{c(0), c(-1)}, C{c(-1)}, D{c(-1)}, F{c(-1)};
    switch (st) {
        case IoStructure::Arx: return LpvIdPoly(A, B);
        case IoStructure::Armax: return LpvIdPoly(A, B, C);
        case IoStructure::Oe: return LpvIdPoly({}, B, {}, {}, F);
        case IoStructure::Bj: return LpvIdPoly({}, B, C, D, F);
        default: throw std::logic_error("unsupported");
    }
}

// noise-free data consistent with the process part of the model set
Dataset noise_free_data(const LpvIdPoly& m, Index n, unsigned seed) {
    Matrix u = multisine(n, seed);
    auto p = random_p(n);
    Matrix y = simulate_io(m.processModel(), u, p);
    return Dataset(u, p, y, 1.0);
}

} // namespace

TEST_CASE("bfr tagged values") {
    Matrix y(4, 1), yh(4, 1);
    y << 0, 1, 2, 3;
    yh << 0, 1, 2, 4;
    CHECK(bfr(y, y) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(bfr(y, Matrix::Constant(4, 1, 1.5)) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(bfr(y, yh) == doctest::Approx(100.0 * (1.0 - 1.0 / std::sqrt(5.0))).epsilon(1e-12));
    CHECK_THROWS_AS(bfr(Matrix::Ones(4, 1), yh), std::invalid_argument);
}

TEST_CASE("predictor: zero residual at the true theta, all structures") {
    for (IoStructure st : {IoStructure::Arx, IoStructure::Armax, IoStructure::Oe, IoStructure::Bj}) {
        CAPTURE(static_cast<int>(st));
        LpvIdPoly m = random_structure(st);
        Dataset d = noise_free_data(m, 200, 5);
        auto pred = predict(m, d);
        CHECK(pred.eps.bottomRows(200 - pred.skip).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("predictor: OE residual equals the simulation error") {
    LpvIdPoly m = random_structure(IoStructure::Oe);
    Matrix u = multisine(150, 9);
    auto p = random_p(150);
    Matrix y = u;  // arbitrary data, not from the model
    for (Index t = 0; t < 150; ++t) y(t, 0) += rnd(0.1);
    Dataset d(u, p, y, 1.0);
    auto pred = predict(m, d);
    Matrix ysim = simulate_io(m.processModel(), u, p);
    CHECK((pred.eps - (y - ysim)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("predict ignores extra scheduling channels") {
    LpvIdPoly m = random_structure(IoStructure::Armax);
    Dataset d = noise_free_data(m, 120, 3);
    Matrix wide(120, 2);
    wide.col(0) = d.p.samples.col(0);
    for (Index t = 0; t < 120; ++t) wide(t, 1) = rnd();
    Dataset d2(d.u, SchedulingTrajectory(wide, {"p", "z"}), d.y, 1.0);
    auto a = predict(m, d);
    auto b = predict(m, d2);
    CHECK((a.eps - b.eps).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lpvarx recovers a noise-free truth") {
    LpvIdPoly truth = random_structure(IoStructure::Arx);
    Dataset d = noise_free_data(truth, 400, 17);
    auto fit = lpvarx(truth, d);  // template carries the sparsity pattern
    auto layout = parameter_layout(truth);
    Vector theta0 = get_theta(truth, layout);
    CHECK((fit.theta - theta0).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(fit.bfr_est > 99.999);
}

TEST_CASE("regularization: ridge shrinkage and GCV selection") {
    LpvIdPoly truth = random_structure(IoStructure::Arx);
    Dataset clean = noise_free_data(truth, 300, 23);
    Matrix y = clean.y;
    std::mt19937_64 nrng(99);
    std::normal_distribution<double> dist(0.0, 0.05);
    for (Index t = 0; t < 300; ++t) y(t, 0) += dist(nrng);
    Dataset d(clean.u, clean.p, y, 1.0);

    EstimOptions small, large;
    small.regularization = large.regularization = EstimOptions::Regularization::Tikhonov;
    small.lambda = 1e-6;
    large.lambda = 1e6;
    double n_small = lpvarx(truth, d, small).theta.norm();
    double n_large = lpvarx(truth, d, large).theta.norm();
    CHECK(n_large < n_small);
    CHECK(n_large < 1e-2);  // ridge limit sends theta to zero

    EstimOptions gcv;
    gcv.regularization = EstimOptions::Regularization::Gcv;
    auto fit = lpvarx(truth, d, gcv);
    // the selected lambda must not destroy the fit relative to plain LS
    auto plain = lpvarx(truth, d);
    CHECK(fit.bfr_est > plain.bfr_est - 2.0);
    CHECK(fit.theta.norm() > 1e-3);  // and did not shrink everything away
}

TEST_CASE("mask honesty: fixed zeros survive estimation") {
    // template with the constant part of A's term zeroed: stays fixed
    std::vector<PVMatrix> A{affine_coeff(-1, 0.0, 0.3)};
    std::vector<PVMatrix> B{affine_coeff(0, 1.0, 0.2)};
    LpvIdPoly tmpl(A, B);
    Dataset d = noise_free_data(random_structure(IoStructure::Arx), 250, 41);
    auto fit = lpvarx(tmpl, d);
    CHECK(fit.model.A[0].constantCoeff()(0, 0) == 0.0);
    CHECK(static_cast<Index>(fit.layout.size()) == fit.theta.size());
    CHECK(fit.layout.size() == 3);  // A term, B const, B term
}

TEST_CASE("pseudo-linear regression") {
    SUBCASE("OE on noise-free OE data reaches near-zero loss") {
        LpvIdPoly truth = random_structure(IoStructure::Oe);
        Dataset d = noise_free_data(truth, 400, 51);
        auto fit = plr_estimate(truth, d);
        CHECK(fit.final_loss < 1e-8);
    }
    SUBCASE("ARMAX with zero-weight C matches ARX exactly") {
        LpvIdPoly truth = random_structure(IoStructure::Arx);
        Dataset d = noise_free_data(truth, 300, 53);
        // C present structurally but with all-zero (fixed) entries
        std::vector<PVMatrix> C{affine_coeff(-1, 0.0, 0.0)};
        LpvIdPoly armax(truth.A, truth.B, C);
        auto a = lpvarx(truth, d);
        auto b = plr_estimate(armax, d);
        CHECK((a.theta - b.theta).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("gradient search") {
    SUBCASE("sensitivity Jacobian matches finite differences") {
        for (IoStructure st :
             {IoStructure::Arx, IoStructure::Armax, IoStructure::Oe, IoStructure::Bj}) {
            CAPTURE(static_cast<int>(st));
            LpvIdPoly m = random_structure(st);
            Dataset d = noise_free_data(random_structure(st), 120, 61);
            auto layout = parameter_layout(m);
            auto nom = predict(m, d);
            Matrix js = detail::residual_jacobian(m, layout, d, nom,
                                                  EstimOptions::Gradient::Sensitivity);
            Matrix jf = detail::residual_jacobian(m, layout, d, nom,
                                                  EstimOptions::Gradient::FiniteDifference);
            double rel = (js - jf).norm() / (jf.norm() + 1e-12);
            CHECK(rel < 1e-6);
        }
    }
    SUBCASE("stationary point stays put") {
        LpvIdPoly truth = random_structure(IoStructure::Armax);
        Dataset d = noise_free_data(truth, 250, 67);
        EstimOptions opts;
        opts.max_iter = 20;
        auto fit = lpvpolyest(truth, d, opts);
        CHECK(fit.final_loss < 1e-12);
        auto layout = parameter_layout(truth);
        CHECK((fit.theta - get_theta(truth, layout)).cwiseAbs().maxCoeff() < 1e-6);
    }
    SUBCASE("loss trace is non-increasing") {
        LpvIdPoly truth = random_structure(IoStructure::Oe);
        Dataset d = noise_free_data(truth, 300, 71);
        LpvIdPoly init = truth;
        auto layout = parameter_layout(init);
        Vector theta = get_theta(init, layout);
        for (Index j = 0; j < theta.size(); ++j) theta(j) += rnd(0.05);
        set_theta(init, layout, theta);
        auto fit = lpvpolyest(init, d);
        for (std::size_t i = 1; i < fit.loss_trace.size(); ++i)
            CHECK(fit.loss_trace[i] <= fit.loss_trace[i - 1]);
        CHECK(fit.final_loss <= fit.loss_trace.front());
    }
}

TEST_CASE("instrumental variables") {
    LpvIdPoly truth = random_structure(IoStructure::Arx);
    SUBCASE("noise-free IV equals least squares") {
        Dataset d = noise_free_data(truth, 350, 81);
        auto ls = lpvarx(truth, d);
        auto iv = lpviv(truth, d);
        CHECK((ls.theta - iv.theta).cwiseAbs().maxCoeff() < 1e-8);
    }
    SUBCASE("colored output noise: IV is less biased than LS") {
        auto layout = parameter_layout(truth);
        Vector theta0 = get_theta(truth, layout);
        Vector bias_ls = Vector::Zero(theta0.size());
        Vector bias_iv = Vector::Zero(theta0.size());
        const int runs = 20;
        for (int r = 0; r < runs; ++r) {
            Dataset clean = noise_free_data(truth, 350, 200 + static_cast<unsigned>(r));
            std::mt19937_64 nrng(300 + static_cast<unsigned>(r));
            std::normal_distribution<double> dist(0.0, 0.03);
            Matrix y = clean.y;
            double prev = 0.0;
            for (Index t = 0; t < y.rows(); ++t) {
                double e = dist(nrng);
                y(t, 0) += e + 0.7 * prev;  // MA(1) colored noise
                prev = e;
            }
            Dataset d(clean.u, clean.p, y, 1.0);
            bias_ls += lpvarx(truth, d).theta - theta0;
            bias_iv += lpviv(truth, d).theta - theta0;
        }
        CHECK((bias_iv / runs).norm() < (bias_ls / runs).norm());
    }
    SUBCASE("MIMO templates rejected") {
        std::vector<PVMatrix> B{PVMatrix(Matrix::Ones(2, 2), TimeDomain::DT)};
        LpvIdPoly mimo({}, B);
        Dataset d = noise_free_data(truth, 100, 1);
        CHECK_THROWS_AS(lpviv(mimo, d), std::invalid_argument);
    }
}

TEST_CASE("state-space estimation") {
    TimeMap tm({0}, TimeDomain::DT, {"p"});
    auto pv = [&](Matrix c0, Matrix c1) {
        std::vector<PVMatrix::Term> terms{{BasisFunction::affine(0), std::move(c1)}};
        return PVMatrix(std::move(c0), std::move(terms), tm);
    };
    Matrix A0(2, 2), A1(2, 2);
    A0 << 0.5, 0.1, 0.0, 0.4;
    A1 << 0.1, 0.0, 0.05, 0.1;
    LpvSsModel truth(pv(A0, A1), pv(Matrix::Ones(2, 1), 0.1 * Matrix::Ones(2, 1)),
                     pv(Matrix::Ones(1, 2), 0.05 * Matrix::Ones(1, 2)),
                     pv(Matrix::Zero(1, 1), Matrix::Zero(1, 1)),
                     pv(0.1 * Matrix::Ones(2, 1), Matrix::Zero(2, 1)));
    Matrix u = multisine(300, 7);
    auto p = random_p(300);
    Matrix y = simulate_ss(truth, u, p).y;
    Dataset d(u, p, y, 1.0);

    SUBCASE("noise-free truth is a fixed point with near-zero loss") {
        auto fit = lpvssest(truth, d);
        CHECK(fit.final_loss < 1e-18);
        CHECK(!fit.model.Xi.has_value());  // residual covariance not PD at zero noise
    }
    SUBCASE("perturbed init improves monotonically") {
        LpvSsModel init = truth;
        auto layout = detail::ss_layout(init);
        Vector theta = detail::ss_get_theta(init, layout);
        std::mt19937_64 prng(13);
        std::normal_distribution<double> dist(0.0, 0.02);
        for (Index j = 0; j < theta.size(); ++j) theta(j) += dist(prng);
        detail::ss_set_theta(init, layout, theta);
        EstimOptions opts;
        opts.max_iter = 50;
        auto fit = lpvssest(init, d, opts);
        for (std::size_t i = 1; i < fit.loss_trace.size(); ++i)
            CHECK(fit.loss_trace[i] <= fit.loss_trace[i - 1]);
        CHECK(fit.final_loss < fit.loss_trace.front());
        CHECK(fit.bfr_est > 95.0);
    }
    SUBCASE("innovation form required") {
        LpvSsModel nok(truth.A, truth.B, truth.C, truth.D);
        CHECK_THROWS_AS(lpvssest(nok, d), std::invalid_argument);
    }
}
