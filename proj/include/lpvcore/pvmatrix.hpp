#pragma once

#include "timemap.hpp"

#include <functional>
#include <numeric>
#include <variant>

namespace lpvcore {

/// Scalar coefficient function of the extended scheduling sample.
/// Affine terms are single extended-signal columns; products of affine
/// terms escalate to Monomial; anything involving Custom stays Custom.
struct BasisFunction {
    enum class Kind { Affine, Monomial, Custom };

    Kind kind = Kind::Affine;
    Index col = 0;                              // Affine
    std::vector<int> degrees;                   // Monomial, length = extended dim
    std::string label;                          // Custom
    std::function<double(const Vector&)> fn;    // Custom

    static BasisFunction affine(Index c) {
        BasisFunction b;
        b.kind = Kind::Affine;
        b.col = c;
        return b;
    }
    static BasisFunction monomial(std::vector<int> deg) {
        BasisFunction b;
        b.kind = Kind::Monomial;
        b.degrees = std::move(deg);
        return b;
    }
    static BasisFunction custom(std::string label, std::function<double(const Vector&)> f) {
        BasisFunction b;
        b.kind = Kind::Custom;
        b.label = std::move(label);
        b.fn = std::move(f);
        return b;
    }

    [[nodiscard]] double operator()(const Vector& rho) const {
        switch (kind) {
            case Kind::Affine:
                return rho(col);
            case Kind::Monomial: {
                double v = 1.0;
                for (std::size_t i = 0; i < degrees.size(); ++i)
                    for (int d = 0; d < degrees[i]; ++d) v *= rho(static_cast<Index>(i));
                return v;
            }
            case Kind::Custom:
                return fn(rho);
        }
        return 0.0;
    }

    // Structural identity; Custom compares by label only.
    [[nodiscard]] bool sameStructure(const BasisFunction& o) const {
        if (kind != o.kind) return false;
        switch (kind) {
            case Kind::Affine: return col == o.col;
            case Kind::Monomial: return degrees == o.degrees;
            case Kind::Custom: return label == o.label;
        }
        return false;
    }

    // Deterministic ordering for canonical term layout.
    [[nodiscard]] bool orderedBefore(const BasisFunction& o) const {
        if (kind != o.kind) return static_cast<int>(kind) < static_cast<int>(o.kind);
        switch (kind) {
            case Kind::Affine: return col < o.col;
            case Kind::Monomial: return degrees < o.degrees;
            case Kind::Custom: return label < o.label;
        }
        return false;
    }

    [[nodiscard]] BasisFunction remapped(const std::vector<Index>& colmap, Index new_dim) const {
        switch (kind) {
            case Kind::Affine:
                return affine(colmap[static_cast<std::size_t>(col)]);
            case Kind::Monomial: {
                std::vector<int> deg(static_cast<std::size_t>(new_dim), 0);
                for (std::size_t i = 0; i < degrees.size(); ++i)
                    deg[static_cast<std::size_t>(colmap[i])] += degrees[i];
                return monomial(std::move(deg));
            }
            case Kind::Custom: {
                auto f = fn;
                auto map = colmap;
                return custom(label, [f, map](const Vector& rho) {
                    Vector old(static_cast<Index>(map.size()));
                    for (std::size_t i = 0; i < map.size(); ++i) old(static_cast<Index>(i)) = rho(map[i]);
                    return f(old);
                });
            }
        }
        return *this;
    }
};

namespace detail {

inline BasisFunction basis_product(const BasisFunction& a, const BasisFunction& b, Index dim) {
    using Kind = BasisFunction::Kind;
    if (a.kind == Kind::Custom || b.kind == Kind::Custom) {
        std::string la = a.kind == Kind::Custom ? a.label : "#";
        std::string lb = b.kind == Kind::Custom ? b.label : "#";
        auto fa = a, fb = b;
        return BasisFunction::custom(
            "(" + la + ")*(" + lb + ")",
            [fa, fb](const Vector& rho) { return fa(rho) * fb(rho); });
    }
    std::vector<int> deg(static_cast<std::size_t>(dim), 0);
    auto add = [&deg](const BasisFunction& f) {
        if (f.kind == Kind::Affine) {
            deg[static_cast<std::size_t>(f.col)] += 1;
        } else {
            for (std::size_t i = 0; i < f.degrees.size(); ++i) deg[i] += f.degrees[i];
        }
    };
    add(a);
    add(b);
    return BasisFunction::monomial(std::move(deg));
}

constexpr double kCoeffDropTol = 1e-14;

} // namespace detail

/// Parameter-varying matrix function: constant part plus coefficient
/// matrices paired with scalar basis functions of the extended
/// scheduling sample.
class PVMatrix {
public:
    struct Term {
        BasisFunction basis;
        Matrix coeff;
    };

    PVMatrix(Matrix constant, TimeDomain domain)
        : tm_({0}, domain), const_(std::move(constant)) {}

    PVMatrix(Matrix constant, TimeMap tm)
        : tm_(std::move(tm)), const_(std::move(constant)) {}

    PVMatrix(Matrix constant, std::vector<Term> terms, TimeMap tm)
        : tm_(std::move(tm)), const_(std::move(constant)), terms_(std::move(terms)) {
        normalize();
    }

    [[nodiscard]] Index rows() const { return const_.rows(); }
    [[nodiscard]] Index cols() const { return const_.cols(); }
    [[nodiscard]] const TimeMap& timemap() const { return tm_; }
    [[nodiscard]] TimeDomain domain() const { return tm_.domain(); }
    [[nodiscard]] const Matrix& constantCoeff() const { return const_; }
    [[nodiscard]] const std::vector<Term>& terms() const { return terms_; }
    [[nodiscard]] bool isConstant() const { return terms_.empty(); }
    [[nodiscard]] bool hasCustomBasis() const {
        for (const auto& t : terms_)
            if (t.basis.kind == BasisFunction::Kind::Custom) return true;
        return false;
    }

    [[nodiscard]] Matrix eval(const Vector& rho) const {
        if (rho.size() != tm_.extendedDim())
            throw std::invalid_argument("PVMatrix::eval: extended sample dimension mismatch");
        Matrix out = const_;
        for (const auto& t : terms_) {
            double v = t.basis(rho);
            if (!std::isfinite(v))
                throw std::runtime_error("PVMatrix::eval: basis function returned non-finite value");
            out += t.coeff * v;
        }
        return out;
    }

    /// Remap onto a wider TimeMap (colmap: old column -> new column).
    [[nodiscard]] PVMatrix remapped(const TimeMap& tm, const std::vector<Index>& colmap) const {
        std::vector<Term> terms;
        terms.reserve(terms_.size());
        for (const auto& t : terms_)
            terms.push_back({t.basis.remapped(colmap, tm.extendedDim()), t.coeff});
        return PVMatrix(const_, std::move(terms), tm);
    }

    [[nodiscard]] PVMatrix transpose() const {
        std::vector<Term> terms;
        for (const auto& t : terms_) terms.push_back({t.basis, t.coeff.transpose()});
        return PVMatrix(const_.transpose(), std::move(terms), tm_);
    }

    [[nodiscard]] PVMatrix block(Index r, Index c, Index nr, Index nc) const {
        if (r < 0 || c < 0 || r + nr > rows() || c + nc > cols())
            throw std::invalid_argument("PVMatrix::block: out of range");
        std::vector<Term> terms;
        for (const auto& t : terms_) terms.push_back({t.basis, t.coeff.block(r, c, nr, nc)});
        return PVMatrix(const_.block(r, c, nr, nc), std::move(terms), tm_);
    }

    [[nodiscard]] PVMatrix element(Index r, Index c) const { return block(r, c, 1, 1); }

    /// Subscripted assignment: overwrite the (r,c) block with `value`.
    void setBlock(Index r, Index c, const PVMatrix& value);

    // Scalar coefficient access by term index (0 = constant part,
    // k >= 1 = terms()[k-1]). Mutation keeps the term structure fixed,
    // which estimators rely on.
    [[nodiscard]] Index numCoeffTerms() const { return static_cast<Index>(terms_.size()) + 1; }
    [[nodiscard]] double coeffEntry(Index term, Index r, Index c) const {
        return term == 0 ? const_(r, c) : terms_[static_cast<std::size_t>(term - 1)].coeff(r, c);
    }
    void setCoeffEntry(Index term, Index r, Index c, double v) {
        if (term == 0)
            const_(r, c) = v;
        else
            terms_[static_cast<std::size_t>(term - 1)].coeff(r, c) = v;
    }

    [[nodiscard]] PVMatrix vectorize() const {
        std::vector<Term> terms;
        for (const auto& t : terms_) {
            Matrix v = t.coeff;
            v.resize(rows() * cols(), 1);
            terms.push_back({t.basis, std::move(v)});
        }
        Matrix c0 = const_;
        c0.resize(rows() * cols(), 1);
        return PVMatrix(std::move(c0), std::move(terms), tm_);
    }

    [[nodiscard]] PVMatrix columnSum() const {
        std::vector<Term> terms;
        for (const auto& t : terms_) terms.push_back({t.basis, t.coeff.colwise().sum()});
        return PVMatrix(const_.colwise().sum(), std::move(terms), tm_);
    }

private:
    void normalize() {
        for (const auto& t : terms_)
            if (t.coeff.rows() != const_.rows() || t.coeff.cols() != const_.cols())
                throw std::invalid_argument("PVMatrix: coefficient shape mismatch");
        // merge duplicate bases, drop negligible coefficients, sort canonically
        std::vector<Term> merged;
        for (auto& t : terms_) {
            if (t.basis.kind == BasisFunction::Kind::Monomial) {
                if (t.basis.degrees.size() != static_cast<std::size_t>(tm_.extendedDim()))
                    throw std::invalid_argument("PVMatrix: monomial degree vector length mismatch");
                int total = std::accumulate(t.basis.degrees.begin(), t.basis.degrees.end(), 0);
                for (int d : t.basis.degrees)
                    if (d < 0) throw std::invalid_argument("PVMatrix: negative monomial degree");
                if (total == 0) {
                    const_ += t.coeff;
                    continue;
                }
                if (total == 1) {
                    auto it = std::find(t.basis.degrees.begin(), t.basis.degrees.end(), 1);
                    t.basis = BasisFunction::affine(static_cast<Index>(it - t.basis.degrees.begin()));
                }
            }
            if (t.basis.kind == BasisFunction::Kind::Affine &&
                (t.basis.col < 0 || t.basis.col >= tm_.extendedDim()))
                throw std::invalid_argument("PVMatrix: affine column index out of range");
            bool found = false;
            for (auto& m : merged)
                if (m.basis.sameStructure(t.basis)) {
                    m.coeff += t.coeff;
                    found = true;
                    break;
                }
            if (!found) merged.push_back(std::move(t));
        }
        std::erase_if(merged, [](const Term& t) {
            return t.coeff.cwiseAbs().maxCoeff() < detail::kCoeffDropTol;
        });
        std::sort(merged.begin(), merged.end(),
                  [](const Term& a, const Term& b) { return a.basis.orderedBefore(b.basis); });
        terms_ = std::move(merged);
    }

    TimeMap tm_;
    Matrix const_;
    std::vector<Term> terms_;
};

namespace detail {

struct AlignedPair {
    PVMatrix a;
    PVMatrix b;
};

inline AlignedPair align(const PVMatrix& a, const PVMatrix& b) {
    if (a.timemap() == b.timemap()) return {a, b};
    auto m = merge_timemaps(a.timemap(), b.timemap());
    return {a.remapped(m.map, m.remapA), b.remapped(m.map, m.remapB)};
}

} // namespace detail

// --- construction -----------------------------------------------------------

enum class BasisType { Affine, Poly };

/// Affine construction: coeffs[i] pairs with extended-signal index
/// params[i], where index 0 is the constant factor 1 and index j >= 1 is
/// extended column j-1.
inline PVMatrix pmatrix(const std::vector<Matrix>& coeffs, const std::vector<int>& params,
                        const TimeMap& tm) {
    if (coeffs.size() != params.size())
        throw std::invalid_argument("pmatrix: coefficient/parametrization count mismatch");
    if (coeffs.empty()) throw std::invalid_argument("pmatrix: no coefficients");
    Matrix c0 = Matrix::Zero(coeffs[0].rows(), coeffs[0].cols());
    std::vector<PVMatrix::Term> terms;
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
        if (params[i] == 0) {
            if (coeffs[i].rows() != c0.rows() || coeffs[i].cols() != c0.cols())
                throw std::invalid_argument("pmatrix: coefficient shape mismatch");
            c0 += coeffs[i];
        } else if (params[i] >= 1 && params[i] <= tm.extendedDim()) {
            terms.push_back({BasisFunction::affine(params[i] - 1), coeffs[i]});
        } else {
            throw std::invalid_argument("pmatrix: basis parametrization index out of range");
        }
    }
    return PVMatrix(std::move(c0), std::move(terms), tm);
}

/// Polynomial construction: one degree vector over the extended signal
/// per coefficient.
inline PVMatrix pmatrix(const std::vector<Matrix>& coeffs,
                        const std::vector<std::vector<int>>& degrees, const TimeMap& tm) {
    if (coeffs.size() != degrees.size())
        throw std::invalid_argument("pmatrix: coefficient/parametrization count mismatch");
    if (coeffs.empty()) throw std::invalid_argument("pmatrix: no coefficients");
    Matrix c0 = Matrix::Zero(coeffs[0].rows(), coeffs[0].cols());
    std::vector<PVMatrix::Term> terms;
    for (std::size_t i = 0; i < coeffs.size(); ++i)
        terms.push_back({BasisFunction::monomial(degrees[i]), coeffs[i]});
    return PVMatrix(std::move(c0), std::move(terms), tm);
}

/// Custom basis construction.
inline PVMatrix pmatrix(const std::vector<Matrix>& coeffs,
                        const std::vector<std::pair<std::string, std::function<double(const Vector&)>>>& fns,
                        const TimeMap& tm) {
    if (coeffs.size() != fns.size())
        throw std::invalid_argument("pmatrix: coefficient/parametrization count mismatch");
    if (coeffs.empty()) throw std::invalid_argument("pmatrix: no coefficients");
    Matrix c0 = Matrix::Zero(coeffs[0].rows(), coeffs[0].cols());
    std::vector<PVMatrix::Term> terms;
    for (std::size_t i = 0; i < coeffs.size(); ++i)
        terms.push_back({BasisFunction::custom(fns[i].first, fns[i].second), coeffs[i]});
    return PVMatrix(std::move(c0), std::move(terms), tm);
}

/// Scalar scheduling channel as a 1x1 parameter-varying matrix.
inline PVMatrix preal(const std::string& name, TimeDomain domain) {
    if (name.empty()) throw std::invalid_argument("preal: empty name");
    TimeMap tm({0}, domain, {name});
    std::vector<PVMatrix::Term> terms{{BasisFunction::affine(0), Matrix::Ones(1, 1)}};
    return PVMatrix(Matrix::Zero(1, 1), std::move(terms), tm);
}

inline PVMatrix pconst(const Matrix& m, TimeDomain domain = TimeDomain::DT) {
    return PVMatrix(m, domain);
}

inline PVMatrix pconst(double v, TimeDomain domain = TimeDomain::DT) {
    return PVMatrix(Matrix::Constant(1, 1, v), domain);
}

// --- algebra ----------------------------------------------------------------

inline PVMatrix operator+(const PVMatrix& lhs, const PVMatrix& rhs) {
    auto [a, b] = detail::align(lhs, rhs);
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("PVMatrix: addition shape mismatch");
    std::vector<PVMatrix::Term> terms(a.terms());
    terms.insert(terms.end(), b.terms().begin(), b.terms().end());
    return PVMatrix(a.constantCoeff() + b.constantCoeff(), std::move(terms), a.timemap());
}

inline PVMatrix operator-(const PVMatrix& p) {
    std::vector<PVMatrix::Term> terms;
    for (const auto& t : p.terms()) terms.push_back({t.basis, -t.coeff});
    return PVMatrix(-p.constantCoeff(), std::move(terms), p.timemap());
}

inline PVMatrix operator-(const PVMatrix& a, const PVMatrix& b) { return a + (-b); }

namespace detail {

enum class ProductKind { MatrixProd, Elementwise, Kronecker };

inline Matrix coeff_product(const Matrix& a, const Matrix& b, ProductKind kind) {
    switch (kind) {
        case ProductKind::MatrixProd:
            if (a.rows() == 1 && a.cols() == 1) return a(0, 0) * b;
            if (b.rows() == 1 && b.cols() == 1) return a * b(0, 0);
            if (a.cols() != b.rows())
                throw std::invalid_argument("PVMatrix: product inner dimension mismatch");
            return a * b;
        case ProductKind::Elementwise:
            if (a.rows() == 1 && a.cols() == 1) return a(0, 0) * b;
            if (b.rows() == 1 && b.cols() == 1) return a * b(0, 0);
            if (a.rows() != b.rows() || a.cols() != b.cols())
                throw std::invalid_argument("PVMatrix: element-wise shape mismatch");
            return a.cwiseProduct(b);
        case ProductKind::Kronecker: {
            Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
            for (Index i = 0; i < a.rows(); ++i)
                for (Index j = 0; j < a.cols(); ++j)
                    out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
            return out;
        }
    }
    throw std::logic_error("unreachable");
}

inline PVMatrix generic_product(const PVMatrix& lhs, const PVMatrix& rhs, ProductKind kind) {
    auto [a, b] = align(lhs, rhs);
    const Index dim = a.timemap().extendedDim();
    Matrix c0 = coeff_product(a.constantCoeff(), b.constantCoeff(), kind);
    std::vector<PVMatrix::Term> terms;
    for (const auto& tb : b.terms())
        terms.push_back({tb.basis, coeff_product(a.constantCoeff(), tb.coeff, kind)});
    for (const auto& ta : a.terms())
        terms.push_back({ta.basis, coeff_product(ta.coeff, b.constantCoeff(), kind)});
    for (const auto& ta : a.terms())
        for (const auto& tb : b.terms())
            terms.push_back({basis_product(ta.basis, tb.basis, dim),
                             coeff_product(ta.coeff, tb.coeff, kind)});
    return PVMatrix(std::move(c0), std::move(terms), a.timemap());
}

} // namespace detail

inline PVMatrix operator*(const PVMatrix& a, const PVMatrix& b) {
    return detail::generic_product(a, b, detail::ProductKind::MatrixProd);
}

inline PVMatrix cwise_product(const PVMatrix& a, const PVMatrix& b) {
    return detail::generic_product(a, b, detail::ProductKind::Elementwise);
}

inline PVMatrix kron(const PVMatrix& a, const PVMatrix& b) {
    return detail::generic_product(a, b, detail::ProductKind::Kronecker);
}

// Mixed constant/PV convenience overloads; the constant adopts the PV
// operand's time domain.
inline PVMatrix operator+(const PVMatrix& a, const Matrix& b) { return a + PVMatrix(b, a.domain()); }
inline PVMatrix operator+(const Matrix& a, const PVMatrix& b) { return PVMatrix(a, b.domain()) + b; }
inline PVMatrix operator-(const PVMatrix& a, const Matrix& b) { return a - PVMatrix(b, a.domain()); }
inline PVMatrix operator-(const Matrix& a, const PVMatrix& b) { return PVMatrix(a, b.domain()) - b; }
inline PVMatrix operator*(const PVMatrix& a, const Matrix& b) { return a * PVMatrix(b, a.domain()); }
inline PVMatrix operator*(const Matrix& a, const PVMatrix& b) { return PVMatrix(a, b.domain()) * b; }
inline PVMatrix operator*(double s, const PVMatrix& b) { return PVMatrix(Matrix::Constant(1, 1, s), b.domain()) * b; }
inline PVMatrix operator*(const PVMatrix& a, double s) { return s * a; }
inline PVMatrix operator+(const PVMatrix& a, double s) { return a + PVMatrix(Matrix::Constant(a.rows(), a.cols(), s), a.domain()); }
inline PVMatrix operator+(double s, const PVMatrix& a) { return a + s; }
inline PVMatrix operator-(const PVMatrix& a, double s) { return a + (-s); }
inline PVMatrix operator-(double s, const PVMatrix& a) { return (-a) + s; }

inline PVMatrix hconcat(const PVMatrix& lhs, const PVMatrix& rhs) {
    auto [a, b] = detail::align(lhs, rhs);
    if (a.rows() != b.rows())
        throw std::invalid_argument("PVMatrix: horizontal concatenation row mismatch");
    auto widen = [&](const Matrix& m, bool left) {
        Matrix out = Matrix::Zero(a.rows(), a.cols() + b.cols());
        if (left)
            out.leftCols(a.cols()) = m;
        else
            out.rightCols(b.cols()) = m;
        return out;
    };
    std::vector<PVMatrix::Term> terms;
    for (const auto& t : a.terms()) terms.push_back({t.basis, widen(t.coeff, true)});
    for (const auto& t : b.terms()) terms.push_back({t.basis, widen(t.coeff, false)});
    Matrix c0(a.rows(), a.cols() + b.cols());
    c0 << a.constantCoeff(), b.constantCoeff();
    return PVMatrix(std::move(c0), std::move(terms), a.timemap());
}

inline PVMatrix vconcat(const PVMatrix& a, const PVMatrix& b) {
    return hconcat(a.transpose(), b.transpose()).transpose();
}

/// Matrix power for square matrices, integer exponent >= 0.
inline PVMatrix mpow(const PVMatrix& p, int n) {
    if (p.rows() != p.cols()) throw std::invalid_argument("mpow: matrix must be square");
    if (n < 0) throw std::invalid_argument("mpow: negative powers not representable");
    PVMatrix out(Matrix::Identity(p.rows(), p.cols()), p.timemap());
    for (int i = 0; i < n; ++i) out = out * p;
    return out;
}

inline PVMatrix cwise_pow(const PVMatrix& p, int n) {
    if (n < 0) throw std::invalid_argument("cwise_pow: negative powers not representable");
    PVMatrix out(Matrix::Ones(p.rows(), p.cols()), p.timemap());
    for (int i = 0; i < n; ++i) out = cwise_product(out, p);
    return out;
}

/// diag([p1; ...; pk]) for a column or row vector argument.
inline PVMatrix make_diag(const PVMatrix& v) {
    if (v.rows() != 1 && v.cols() != 1)
        throw std::invalid_argument("make_diag: argument must be a vector");
    const PVMatrix col = v.cols() == 1 ? v : v.transpose();
    const Index k = col.rows();
    auto embed = [&](const Matrix& m) {
        Matrix out = Matrix::Zero(k, k);
        out.diagonal() = m.col(0);
        return out;
    };
    std::vector<PVMatrix::Term> terms;
    for (const auto& t : col.terms()) terms.push_back({t.basis, embed(t.coeff)});
    return PVMatrix(embed(col.constantCoeff()), std::move(terms), col.timemap());
}

/// diag(P): extract the diagonal as a column vector.
inline PVMatrix diag_of(const PVMatrix& p) {
    const Index k = std::min(p.rows(), p.cols());
    auto take = [&](const Matrix& m) { return Matrix(m.diagonal().head(k)); };
    std::vector<PVMatrix::Term> terms;
    for (const auto& t : p.terms()) terms.push_back({t.basis, take(t.coeff)});
    return PVMatrix(take(p.constantCoeff()), std::move(terms), p.timemap());
}

inline PVMatrix sum_columns(const PVMatrix& p) { return p.columnSum(); }

/// Shift every scheduling dependence k time-steps (DT only).
inline PVMatrix pshift(const PVMatrix& p, int k) {
    if (p.domain() != TimeDomain::DT)
        throw std::invalid_argument("pshift: DT only (use pdiff in CT)");
    if (k == 0 || p.isConstant()) return p;
    std::vector<PVMatrix::Term> terms(p.terms());
    return PVMatrix(p.constantCoeff(), std::move(terms), p.timemap().shifted(k));
}

/// Raise every scheduling dependence by k derivative orders (CT only).
/// Each basis argument column moves to its k-th derivative; constants are
/// fixed points.
inline PVMatrix pdiff(const PVMatrix& p, int k) {
    if (p.domain() != TimeDomain::CT)
        throw std::invalid_argument("pdiff: CT only (use pshift in DT)");
    if (k <= 0) throw std::invalid_argument("pdiff: order must be positive");
    if (p.isConstant()) return p;
    std::vector<PVMatrix::Term> terms(p.terms());
    return PVMatrix(p.constantCoeff(), std::move(terms), p.timemap().shifted(k));
}

inline void PVMatrix::setBlock(Index r, Index c, const PVMatrix& value) {
    if (r < 0 || c < 0 || r + value.rows() > rows() || c + value.cols() > cols())
        throw std::invalid_argument("PVMatrix::setBlock: out of range");
    // zero the target block, then add the embedded value
    PVMatrix cleared = *this;
    cleared.const_.block(r, c, value.rows(), value.cols()).setZero();
    for (auto& t : cleared.terms_) t.coeff.block(r, c, value.rows(), value.cols()).setZero();
    auto embed = [&](const Matrix& m) {
        Matrix out = Matrix::Zero(rows(), cols());
        out.block(r, c, value.rows(), value.cols()) = m;
        return out;
    };
    std::vector<Term> terms;
    for (const auto& t : value.terms()) terms.push_back({t.basis, embed(t.coeff)});
    PVMatrix embedded(embed(value.constantCoeff()), std::move(terms), value.timemap());
    *this = cleared + embedded;
}

/// Evaluate along an extended trajectory: one k x l matrix per row.
inline std::vector<Matrix> eval_along(const PVMatrix& p, const ExtendedTrajectory& rho) {
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(rho.length()));
    for (Index t = 0; t < rho.length(); ++t) out.push_back(p.eval(rho.samples.row(t).transpose()));
    return out;
}

} // namespace lpvcore
