// Acceptance suite: one pass/fail line per criterion; exit code is the
// number of failed criteria.

#include <lpvcore/lpvcore.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>

using namespace lpvcore;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void criterion(int id, const std::string& name, const std::function<bool(std::string&)>& body) {
    std::string detail;
    bool ok = false;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    std::cout << "criterion " << id << " (" << name << "): " << (ok ? "PASS" : "FAIL");
    if (!detail.empty()) std::cout << " [" << detail << "]";
    std::cout << "\n";
    if (!ok) ++g_failures;
}

struct Rng {
    std::mt19937_64 gen;
    explicit Rng(unsigned seed) : gen(seed) {}
    double real(double s = 1.0) {
        return s * std::uniform_real_distribution<double>(-1.0, 1.0)(gen);
    }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); }
    Matrix matrix(Index r, Index c, double s = 1.0) {
        Matrix m(r, c);
        for (Index i = 0; i < r; ++i)
            for (Index j = 0; j < c; ++j) m(i, j) = real(s);
        return m;
    }
};

PVMatrix random_pv(Rng& rng, Index rows, Index cols, double scale = 1.0) {
    std::vector<int> orders;
    const int norders = rng.integer(1, 3);
    for (int i = 0; i < norders; ++i) orders.push_back(rng.integer(-3, 0));
    TimeMap tm(orders, TimeDomain::DT, {"p"});
    std::vector<PVMatrix::Term> terms;
    const int nterms = rng.integer(0, 3);
    for (int i = 0; i < nterms; ++i) {
        if (rng.integer(0, 1) == 0) {
            terms.push_back(
                {BasisFunction::affine(rng.integer(0, static_cast<int>(tm.extendedDim()) - 1)),
                 rng.matrix(rows, cols, scale)});
        } else {
            std::vector<int> deg(static_cast<std::size_t>(tm.extendedDim()), 0);
            deg[static_cast<std::size_t>(rng.integer(0, static_cast<int>(deg.size()) - 1))] =
                rng.integer(1, 2);
            terms.push_back({BasisFunction::monomial(deg), rng.matrix(rows, cols, scale)});
        }
    }
    return PVMatrix(rng.matrix(rows, cols, scale), std::move(terms), tm);
}

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

// The operator-table homomorphism check for one pair and one merged sample.
double table_ops_error(const PVMatrix& a, const PVMatrix& b, const Vector& rho,
                       const Vector& rho_a, const Vector& rho_b) {
    const Matrix va = a.eval(rho_a), vb = b.eval(rho_b);
    const Index n = a.rows();
    double err = 0.0;
    auto acc = [&](const PVMatrix& r, const Matrix& expect) {
        const Vector& sample = r.timemap() == a.timemap() ? rho_a : rho;
        err = std::max(err, max_abs(r.eval(sample) - expect));
    };
    acc(a + b, va + vb);
    acc(a - b, va - vb);
    acc(a * b, va * vb);
    acc(cwise_product(a, b), va.cwiseProduct(vb));
    {
        Matrix e(n, 2 * n);
        e << va, vb;
        acc(hconcat(a, b), e);
    }
    {
        Matrix e(2 * n, n);
        e << va, vb;
        acc(vconcat(a, b), e);
    }
    {
        Matrix e(n * n, n * n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) e.block(i * n, j * n, n, n) = va(i, j) * vb;
        acc(kron(a, b), e);
    }
    err = std::max(err, max_abs(a.transpose().eval(rho_a) - va.transpose()));
    err = std::max(err, max_abs(mpow(a, 2).eval(rho_a) - va * va));
    err = std::max(err, max_abs(cwise_pow(a, 2).eval(rho_a) - va.cwiseProduct(va)));
    {
        Matrix vec = va;
        vec.resize(n * n, 1);
        err = std::max(err, max_abs(a.vectorize().eval(rho_a) - vec));
    }
    err = std::max(err, max_abs(a.block(0, 0, 1, n).eval(rho_a) - Matrix(va.topRows(1))));
    err = std::max(err, max_abs(diag_of(a).eval(rho_a) - Matrix(va.diagonal())));
    err = std::max(err, max_abs(sum_columns(a).eval(rho_a) - Matrix(va.colwise().sum())));
    {
        Matrix e = Matrix::Zero(n, n);
        e.diagonal() = va.diagonal();
        err = std::max(err, max_abs(make_diag(diag_of(a)).eval(rho_a) - e));
    }
    {
        PVMatrix assigned = a;
        assigned.setBlock(0, 0, b.block(0, 0, 1, 1));
        Matrix e = va;
        e(0, 0) = vb(0, 0);
        acc(assigned, e);
    }
    return err;
}

SchedulingTrajectory random_p(Rng& rng, Index n, double scale = 0.5) {
    Matrix s(n, 1);
    for (Index t = 0; t < n; ++t) s(t, 0) = rng.real(scale);
    return SchedulingTrajectory(std::move(s), {"p"});
}

Matrix multisine_col(Index n, unsigned seed, double amplitude) {
    return gen_multisine(n, 1.0, 8, 0.6, amplitude, seed);
}

LpvIdPoly structure_with_theta(IoStructure st, Rng& rng) {
    auto coeff = [&](int lag) {
        TimeMap tm({lag}, TimeDomain::DT, {"p"});
        std::vector<PVMatrix::Term> terms{
            {BasisFunction::affine(0), Matrix::Constant(1, 1, rng.real(0.2))}};
        return PVMatrix(Matrix::Constant(1, 1, rng.real(0.2)), std::move(terms), tm);
    };
    std::vector<PVMatrix> A{coeff(-1)}, B{coeff(0), coeff(-1)}, C{coeff(-1)}, D{coeff(-1)},
        F{coeff(-1)};
    switch (st) {
        case IoStructure::Arx: return LpvIdPoly(A, B);
        case IoStructure::Armax: return LpvIdPoly(A, B, C);
        case IoStructure::Oe: return LpvIdPoly({}, B, {}, {}, F);
        default: return LpvIdPoly({}, B, C, D, F);
    }
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

int main() {
    using clock = std::chrono::steady_clock;

    criterion(1, "matrix-function algebra oracle", [](std::string& detail) {
        const auto start = clock::now();
        Rng rng(1001);
        double worst = 0.0;
        for (int pair = 0; pair < 200; ++pair) {
            const Index n = rng.integer(1, 4);
            PVMatrix a = random_pv(rng, n, n);
            PVMatrix b = random_pv(rng, n, n);
            auto merged = merge_timemaps(a.timemap(), b.timemap());
            for (int k = 0; k < 20; ++k) {
                Vector rho(merged.map.extendedDim());
                for (Index i = 0; i < rho.size(); ++i) rho(i) = rng.real();
                Vector rho_a(a.timemap().extendedDim()), rho_b(b.timemap().extendedDim());
                for (Index i = 0; i < rho_a.size(); ++i)
                    rho_a(i) = rho(merged.remapA[static_cast<std::size_t>(i)]);
                for (Index i = 0; i < rho_b.size(); ++i)
                    rho_b(i) = rho(merged.remapB[static_cast<std::size_t>(i)]);
                worst = std::max(worst, table_ops_error(a, b, rho, rho_a, rho_b));
            }
        }
        const double secs = std::chrono::duration<double>(clock::now() - start).count();
        detail = "max err " + fmt(worst) + ", " + fmt(secs) + " s";
        return worst < 1e-12 && secs < 10.0;
    });

    criterion(2, "worked-example fidelity", [](std::string&) {
        TimeMap tm({0, -1}, TimeDomain::DT, {"p"});
        PVMatrix A = pmatrix({Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 2.0),
                              Matrix::Constant(1, 1, 3.0)},
                             std::vector<int>{0, 2, 1}, tm);
        Vector rho(2);
        rho << -1.0, 1.0;
        if (std::abs(A.eval(rho)(0, 0)) > 1e-14) return false;

        TimeMap t2({-1, 0}, TimeDomain::DT, {"p", "q"});
        PVMatrix B = pmatrix({Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 2.0),
                              Matrix::Constant(1, 1, 3.0), Matrix::Constant(1, 1, 4.0)},
                             std::vector<int>{1, 2, 3, 4}, t2);
        if (std::abs(B.eval(Vector::Ones(4))(0, 0) - 10.0) > 1e-14) return false;

        TimeMap tp({-2, 0}, TimeDomain::DT, {"p"});
        PVMatrix P = pmatrix({Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 2.0),
                              Matrix::Constant(1, 1, 1.0)},
                             std::vector<std::vector<int>>{{0, 2}, {1, 1}, {2, 0}}, tp);
        Vector r2(2);
        r2 << 3.0, 2.0;  // (p_t + p_{t-2})^2 = 25
        return std::abs(P.eval(r2)(0, 0) - 25.0) <= 1e-14;
    });

    criterion(3, "state-space / fractional-form equivalence", [](std::string& detail) {
        Rng rng(3003);
        double worst = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            TimeMap tm({0}, TimeDomain::DT, {"p"});
            auto pv = [&](Index r, Index c, double s) {
                std::vector<PVMatrix::Term> terms{
                    {BasisFunction::affine(0), rng.matrix(r, c, s)}};
                return PVMatrix(rng.matrix(r, c, s), std::move(terms), tm);
            };
            LpvSsModel m(pv(3, 3, 0.3), pv(3, 2, 0.5), pv(2, 3, 0.5), pv(2, 2, 0.5));
            Matrix u = rng.matrix(200, 2);
            auto p = random_p(rng, 200);
            worst = std::max(
                worst, max_abs(simulate_lfr(ss_to_lfr(m), u, p) - simulate_ss(m, u, p).y));
        }
        detail = "max deviation " + fmt(worst);
        return worst < 1e-10;
    });

    criterion(4, "algebraic-loop well-posedness", [](std::string&) {
        const double d = 0.5;
        TimeMap tm({0}, TimeDomain::DT, {"p"});
        std::vector<PVMatrix::Term> terms{{BasisFunction::affine(0), Matrix::Ones(1, 1)}};
        PVMatrix delta(Matrix::Zero(1, 1), std::move(terms), tm);
        LpvLfrModel m(Matrix::Zero(0, 0), Matrix::Zero(0, 1), Matrix::Zero(0, 1),
                      Matrix::Zero(1, 0), Matrix::Zero(1, 0), Matrix::Constant(1, 1, d),
                      Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Zero(1, 1), delta);
        Rng rng(4);
        Matrix u = rng.matrix(20, 1);
        Matrix ps(20, 1);
        for (Index t = 0; t < 20; ++t) ps(t, 0) = 0.1 + 0.04 * static_cast<double>(t);
        Matrix y = simulate_lfr(m, u, SchedulingTrajectory(ps, {"p"}));
        for (Index t = 0; t < 20; ++t)
            if (std::abs(y(t, 0) - ps(t, 0) * u(t, 0) / (1.0 - ps(t, 0) * d)) > 1e-12)
                return false;
        Matrix bad = ps;
        bad(11, 0) = 1.0 / d;
        try {
            simulate_lfr(m, u, SchedulingTrajectory(bad, {"p"}));
            return false;
        } catch (const IllPosedLoop& e) {
            return e.time_index == 11;
        }
    });

    criterion(5, "autoregressive consistency", [](std::string& detail) {
        const auto start = clock::now();
        // the benchmark's ARX template shape with a chosen stable truth
        BenchTemplates tmpl = bench_templates();
        LpvIdPoly truth = tmpl.arx;
        auto layout = parameter_layout(truth);
        Vector theta0(static_cast<Index>(layout.size()));
        Rng rng(5005);
        for (Index j = 0; j < theta0.size(); ++j) theta0(j) = rng.real(0.3);
        set_theta(truth, layout, theta0);

        const Index n = 400;
        Matrix u = multisine_col(n, 55, 1.0);
        auto p = random_p(rng, n, 0.4);
        Matrix y = simulate_io(truth.processModel(), u, p);
        auto fit = lpvarx(tmpl.arx, Dataset(u, p, y, 1.0));
        const double err = (fit.theta - theta0).cwiseAbs().maxCoeff();
        const double secs = std::chrono::duration<double>(clock::now() - start).count();
        detail = "max theta err " + fmt(err) + ", " + fmt(secs) + " s";
        return err < 1e-6 && secs < 5.0;
    });

    criterion(6, "gradient correctness", [](std::string& detail) {
        Rng rng(6006);
        double worst = 0.0;
        const IoStructure kinds[] = {IoStructure::Arx, IoStructure::Armax, IoStructure::Oe,
                                     IoStructure::Bj};
        for (int draw = 0; draw < 10; ++draw) {
            LpvIdPoly m = structure_with_theta(kinds[draw % 4], rng);
            Matrix u = multisine_col(120, 600 + static_cast<unsigned>(draw), 1.0);
            auto p = random_p(rng, 120, 0.3);
            Matrix y = simulate_io(m.processModel(), u, p);
            for (Index t = 0; t < y.rows(); ++t) y(t, 0) += rng.real(0.05);
            Dataset d(u, p, y, 1.0);
            auto layout = parameter_layout(m);
            auto nom = predict(m, d);
            Matrix js = lpvcore::detail::residual_jacobian(m, layout, d, nom,
                                                           EstimOptions::Gradient::Sensitivity);
            Matrix jf = lpvcore::detail::residual_jacobian(
                m, layout, d, nom, EstimOptions::Gradient::FiniteDifference);
            worst = std::max(worst, (js - jf).norm() / (jf.norm() + 1e-12));
        }
        detail = "max rel err " + fmt(worst);
        return worst < 1e-6;
    });

    criterion(7, "predictor sanity at the truth", [](std::string& detail) {
        Rng rng(7007);
        double worst = 0.0;
        for (IoStructure st :
             {IoStructure::Arx, IoStructure::Armax, IoStructure::Oe, IoStructure::Bj}) {
            LpvIdPoly m = structure_with_theta(st, rng);
            Matrix u = multisine_col(250, 77, 1.0);
            auto p = random_p(rng, 250, 0.3);
            Matrix y = simulate_io(m.processModel(), u, p);
            auto pred = predict(m, Dataset(u, p, y, 1.0));
            worst = std::max(worst,
                             pred.eps.bottomRows(250 - pred.skip).cwiseAbs().maxCoeff());
        }
        detail = "max residual " + fmt(worst);
        return worst < 1e-10;
    });

    criterion(8, "frozen-pole oracle", [](std::string& detail) {
        LpvIoModel m = embed_lpv(UnbalancedDiscParams{});
        auto mags = [&](double p) {
            auto poles = frozen_io_poles(m, Vector::Constant(1, p));
            std::vector<double> v;
            for (Index i = 0; i < poles.size(); ++i) v.push_back(std::abs(poles(i)));
            std::sort(v.begin(), v.end());
            return v;
        };
        auto at0 = mags(0.0);
        auto at1 = mags(1.0);
        detail = "p=0: {" + std::to_string(at0[0]) + ", " + std::to_string(at0[1]) +
                 "}, p=1: {" + std::to_string(at1[0]) + ", " + std::to_string(at1[1]) + "}";
        // p=0 removes the gravity term, so the frozen model is a damped double
        // integrator whose exact poles are 1 and 1 - Ts/tau; the reference
        // values carry a last-digit rounding of A1, hence the 2e-4 band
        return std::abs(at0[0] - 0.87450) < 2e-4 && std::abs(at0[1] - 0.99988) < 2e-4 &&
               std::abs(at1[0] - 0.93902) < 1e-4 && std::abs(at1[1] - 0.93902) < 1e-4;
    });

    criterion(9, "embedding quality", [](std::string& detail) {
        UnbalancedDiscParams prm;
        Vector u = gen_multisine(400, prm.ts, 10, 0.75, 0.25, 1);
        Vector a = simulate_disc(prm, u, 20);
        Vector b = simulate_disc(prm, u, 40);
        const double halving = (a - b).cwiseAbs().maxCoeff();
        SchedulingTrajectory p = scheduling_from_angle(a, prm.ts);
        const double fit = bfr(a, simulate_io(embed_lpv(prm), u, p).col(0));
        detail = "bfr " + fmt(fit) + "%, step-halving " + fmt(halving);
        return fit > 80.0 && halving < 1e-8;
    });

    const fs::path out_a = fs::temp_directory_path() / "lpvcore_acceptance_run_a";
    const fs::path out_b = fs::temp_directory_path() / "lpvcore_acceptance_run_b";
    fs::remove_all(out_a);
    fs::remove_all(out_b);
    ExperimentConfig cfg;
    cfg.out_dir = out_a.string();

    criterion(10, "benchmark ordering", [&](std::string& detail) {
        ExperimentReport rep = run_experiment(cfg);
        std::ostringstream os;
        os.precision(4);
        bool ok = true;
        for (std::size_t si = 0; si < cfg.snr_list_db.size(); ++si) {
            for (const auto& s : rep.structures) {
                if (!rep.errors[s][si].empty()) {
                    detail = s + " failed: " + rep.errors[s][si];
                    return false;
                }
            }
            const double arx = rep.validation_bfr["arx"][si];
            const double armax = rep.validation_bfr["armax"][si];
            const double oe = rep.validation_bfr["oe"][si];
            const double bj = rep.validation_bfr["bj"][si];
            os << cfg.snr_list_db[si] << "dB: arx " << arx << " armax " << armax << " oe " << oe
               << " bj " << bj << "; ";
            ok = ok && oe > arx && oe > armax && bj > arx && bj > armax && oe > 50.0 && bj > 50.0;
        }
        detail = os.str();
        return ok;
    });

    criterion(11, "report determinism", [&](std::string& detail) {
        ExperimentConfig cfg_b = cfg;
        cfg_b.out_dir = out_b.string();
        run_experiment(cfg_b);
        std::size_t compared = 0;
        for (const auto& entry : fs::directory_iterator(out_a)) {
            if (entry.path().extension() != ".csv") continue;
            ++compared;
            if (slurp(entry.path()) != slurp(out_b / entry.path().filename())) {
                detail = "mismatch in " + entry.path().filename().string();
                return false;
            }
        }
        detail = std::to_string(compared) + " CSV files byte-identical";
        return compared > 0;
    });

    criterion(12, "fit-metric unit values", [](std::string&) {
        Matrix y(4, 1), yh(4, 1);
        y << 0, 1, 2, 3;
        yh << 0, 1, 2, 4;
        return std::abs(bfr(y, y) - 100.0) < 1e-10 &&
               std::abs(bfr(y, Matrix::Constant(4, 1, 1.5))) < 1e-10 &&
               std::abs(bfr(y, yh) - 100.0 * (1.0 - 1.0 / std::sqrt(5.0))) < 1e-10;
    });

    fs::remove_all(out_a);
    fs::remove_all(out_b);
    std::cout << (g_failures == 0 ? "all criteria passed" : "failures: ")
              << (g_failures == 0 ? "" : std::to_string(g_failures)) << "\n";
    return g_failures;
}
