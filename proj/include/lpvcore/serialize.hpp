#pragma once

#include "models.hpp"

#include <iomanip>

namespace lpvcore {

// Text serialization with full round-trip precision. Custom bases carry
// arbitrary callables and are rejected.

inline void write_pvmatrix(std::ostream& os, const PVMatrix& p) {
    if (p.hasCustomBasis())
        throw std::invalid_argument("write_pvmatrix: custom bases are not serializable");
    os << std::setprecision(17);
    os << "pvmatrix " << p.rows() << " " << p.cols() << "\n";
    os << "domain " << (p.domain() == TimeDomain::DT ? "dt" : "ct") << "\n";
    os << "orders";
    for (int o : p.timemap().orders()) os << " " << o;
    os << "\nnames";
    for (const auto& n : p.timemap().names()) os << " " << n;
    os << "\nterms " << p.terms().size() << "\n";
    auto writeMatrix = [&os](const Matrix& m) {
        for (Index r = 0; r < m.rows(); ++r) {
            for (Index c = 0; c < m.cols(); ++c) os << (c ? " " : "") << m(r, c);
            os << "\n";
        }
    };
    os << "constant\n";
    writeMatrix(p.constantCoeff());
    for (const auto& t : p.terms()) {
        if (t.basis.kind == BasisFunction::Kind::Affine) {
            os << "affine " << t.basis.col << "\n";
        } else {
            os << "monomial";
            for (int d : t.basis.degrees) os << " " << d;
            os << "\n";
        }
        writeMatrix(t.coeff);
    }
}

namespace detail {

inline std::string expect_token(std::istream& is, const std::string& what) {
    std::string tok;
    if (!(is >> tok)) throw std::runtime_error("pvmatrix parse: expected " + what);
    return tok;
}

inline Matrix read_matrix(std::istream& is, Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c)
            if (!(is >> m(r, c))) throw std::runtime_error("pvmatrix parse: bad matrix entry");
    return m;
}

} // namespace detail

inline PVMatrix read_pvmatrix(std::istream& is) {
    if (detail::expect_token(is, "header") != "pvmatrix")
        throw std::runtime_error("pvmatrix parse: bad header");
    Index rows, cols;
    is >> rows >> cols;
    if (detail::expect_token(is, "domain") != "domain")
        throw std::runtime_error("pvmatrix parse: expected domain");
    std::string dom = detail::expect_token(is, "domain tag");
    TimeDomain domain = dom == "dt" ? TimeDomain::DT : TimeDomain::CT;
    if (dom != "dt" && dom != "ct") throw std::runtime_error("pvmatrix parse: bad domain tag");

    if (detail::expect_token(is, "orders") != "orders")
        throw std::runtime_error("pvmatrix parse: expected orders");
    std::vector<int> orders;
    std::string tok;
    while (is >> tok && tok != "names") orders.push_back(std::stoi(tok));
    std::vector<std::string> names;
    while (is >> tok && tok != "terms") names.push_back(tok);
    std::size_t nterms;
    is >> nterms;
    if (detail::expect_token(is, "constant") != "constant")
        throw std::runtime_error("pvmatrix parse: expected constant block");
    TimeMap tm(orders, domain, names);
    Matrix c0 = detail::read_matrix(is, rows, cols);
    std::vector<PVMatrix::Term> terms;
    for (std::size_t i = 0; i < nterms; ++i) {
        std::string kind = detail::expect_token(is, "term kind");
        if (kind == "affine") {
            Index col;
            is >> col;
            terms.push_back({BasisFunction::affine(col), detail::read_matrix(is, rows, cols)});
        } else if (kind == "monomial") {
            std::vector<int> deg(static_cast<std::size_t>(tm.extendedDim()));
            for (auto& d : deg) is >> d;
            terms.push_back({BasisFunction::monomial(deg), detail::read_matrix(is, rows, cols)});
        } else {
            throw std::runtime_error("pvmatrix parse: unknown term kind '" + kind + "'");
        }
    }
    return PVMatrix(std::move(c0), std::move(terms), tm);
}

// --- model files ------------------------------------------------------------

inline void write_io_model(std::ostream& os, const LpvIoModel& m) {
    os << "lpvio " << m.a_polys.size() << " " << m.b_polys.size() << " " << m.input_delay << "\n";
    for (const auto& a : m.a_polys) write_pvmatrix(os, a);
    for (const auto& b : m.b_polys) write_pvmatrix(os, b);
}

inline LpvIoModel read_io_model(std::istream& is) {
    if (detail::expect_token(is, "model header") != "lpvio")
        throw std::runtime_error("model parse: expected lpvio header");
    std::size_t na, nb;
    int tau;
    is >> na >> nb >> tau;
    std::vector<PVMatrix> a, b;
    for (std::size_t i = 0; i < na; ++i) a.push_back(read_pvmatrix(is));
    for (std::size_t j = 0; j < nb; ++j) b.push_back(read_pvmatrix(is));
    return LpvIoModel(std::move(a), std::move(b), tau);
}

inline void write_ss_model(std::ostream& os, const LpvSsModel& m) {
    os << "lpvss " << (m.K ? 1 : 0) << "\n";
    write_pvmatrix(os, m.A);
    write_pvmatrix(os, m.B);
    write_pvmatrix(os, m.C);
    write_pvmatrix(os, m.D);
    if (m.K) write_pvmatrix(os, *m.K);
}

inline LpvSsModel read_ss_model(std::istream& is) {
    if (detail::expect_token(is, "model header") != "lpvss")
        throw std::runtime_error("model parse: expected lpvss header");
    int hasK;
    is >> hasK;
    PVMatrix A = read_pvmatrix(is), B = read_pvmatrix(is), C = read_pvmatrix(is),
             D = read_pvmatrix(is);
    std::optional<PVMatrix> K;
    if (hasK) K = read_pvmatrix(is);
    return LpvSsModel(std::move(A), std::move(B), std::move(C), std::move(D), std::move(K));
}

inline void save_io_model(const LpvIoModel& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_io_model(f, m);
}

inline LpvIoModel load_io_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    return read_io_model(f);
}

inline void save_ss_model(const LpvSsModel& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_ss_model(f, m);
}

inline LpvSsModel load_ss_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    return read_ss_model(f);
}

} // namespace lpvcore
