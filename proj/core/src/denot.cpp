#include "vqpl/denot.hpp"

#include "vqpl/typecheck.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>

namespace vqpl {

// ---------------------------------------------------------------------------
// FinAlg
// ---------------------------------------------------------------------------

int FinAlg::vec_dim() const {
    int n = 0;
    for (int d : blocks) n += d * d;
    return n;
}

bool FinAlg::commutative() const {
    return std::all_of(blocks.begin(), blocks.end(), [](int d) { return d == 1; });
}

FinAlg FinAlg::qubits(int k) { return {{1 << k}}; }

FinAlg FinAlg::tensor(const FinAlg& o) const {
    FinAlg out;
    out.blocks.reserve(blocks.size() * o.blocks.size());
    for (int d : blocks)
        for (int e : o.blocks) out.blocks.push_back(d * e);
    return out;
}

FinAlg FinAlg::direct_sum(const FinAlg& o) const {
    FinAlg out = *this;
    out.blocks.insert(out.blocks.end(), o.blocks.begin(), o.blocks.end());
    return out;
}

std::string FinAlg::str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < blocks.size(); i++) {
        if (i) s += ",";
        s += std::to_string(blocks[i]);
    }
    return s + "]";
}

FinAlg tensor_many(const std::vector<FinAlg>& fs) {
    FinAlg acc = FinAlg::scalar();
    for (const auto& f : fs) acc = acc.tensor(f);
    return acc;
}

// ---------------------------------------------------------------------------
// BlockElem
// ---------------------------------------------------------------------------

BlockElem BlockElem::zero(const FinAlg& a) {
    BlockElem e{a, {}};
    e.mats.reserve(a.blocks.size());
    for (int d : a.blocks) e.mats.push_back(Matrix::Zero(d, d));
    return e;
}

BlockElem BlockElem::identity(const FinAlg& a) {
    BlockElem e{a, {}};
    e.mats.reserve(a.blocks.size());
    for (int d : a.blocks) e.mats.push_back(Matrix::Identity(d, d));
    return e;
}

BlockElem BlockElem::basis(const FinAlg& a, std::size_t block, int row, int col) {
    BlockElem e = zero(a);
    e.mats[block](row, col) = 1.0;
    return e;
}

Eigen::VectorXcd BlockElem::vec() const {
    Eigen::VectorXcd v(alg.vec_dim());
    int off = 0;
    for (const auto& m : mats) {
        for (int c = 0; c < m.cols(); c++)
            for (int r = 0; r < m.rows(); r++) v(off++) = m(r, c);
    }
    return v;
}

BlockElem BlockElem::from_vec(const FinAlg& a, const Eigen::VectorXcd& v) {
    BlockElem e{a, {}};
    int off = 0;
    for (int d : a.blocks) {
        Matrix m(d, d);
        for (int c = 0; c < d; c++)
            for (int r = 0; r < d; r++) m(r, c) = v(off++);
        e.mats.push_back(std::move(m));
    }
    return e;
}

namespace {
Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); i++)
        for (int j = 0; j < a.cols(); j++)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}
} // namespace

BlockElem BlockElem::kron(const BlockElem& o) const {
    BlockElem out{alg.tensor(o.alg), {}};
    out.mats.reserve(mats.size() * o.mats.size());
    for (const auto& x : mats)
        for (const auto& y : o.mats) out.mats.push_back(vqpl::kron(x, y));
    return out;
}

// ---------------------------------------------------------------------------
// Superoperator
// ---------------------------------------------------------------------------

Superoperator::Superoperator(FinAlg dom, FinAlg cod, Matrix h)
    : dom_(std::move(dom)), cod_(std::move(cod)), h_(std::move(h)) {
    if (h_.rows() != dom_.vec_dim() || h_.cols() != cod_.vec_dim())
        throw ShapeMismatch("superoperator matrix has shape " + std::to_string(h_.rows()) + "x" +
                            std::to_string(h_.cols()) + ", expected " +
                            std::to_string(dom_.vec_dim()) + "x" + std::to_string(cod_.vec_dim()));
}

Superoperator Superoperator::identity(const FinAlg& a) {
    return Superoperator(a, a, Matrix::Identity(a.vec_dim(), a.vec_dim()));
}

Superoperator Superoperator::zero(const FinAlg& dom, const FinAlg& cod) {
    return Superoperator(dom, cod, Matrix::Zero(dom.vec_dim(), cod.vec_dim()));
}

Superoperator Superoperator::from_action(
    const FinAlg& dom, const FinAlg& cod,
    const std::function<BlockElem(const BlockElem&)>& action) {
    Matrix h(dom.vec_dim(), cod.vec_dim());
    int col = 0;
    for (std::size_t b = 0; b < cod.blocks.size(); b++) {
        int d = cod.blocks[b];
        for (int c = 0; c < d; c++)
            for (int r = 0; r < d; r++) h.col(col++) = action(BlockElem::basis(cod, b, r, c)).vec();
    }
    return Superoperator(dom, cod, std::move(h));
}

BlockElem Superoperator::apply_heisenberg(const BlockElem& cod_elem) const {
    if (!(cod_elem.alg == cod_))
        throw ShapeMismatch("element algebra does not match the codomain");
    return BlockElem::from_vec(dom_, h_ * cod_elem.vec());
}

Superoperator Superoperator::relabel(const FinAlg& dom, const FinAlg& cod) const {
    if (dom.vec_dim() != dom_.vec_dim() || cod.vec_dim() != cod_.vec_dim())
        throw ShapeMismatch("relabel between different dimensions");
    return Superoperator(dom, cod, h_);
}

double Superoperator::max_abs_diff(const Superoperator& o) const {
    if (h_.rows() != o.h_.rows() || h_.cols() != o.h_.cols())
        throw ShapeMismatch("superoperator shape mismatch");
    return (h_ - o.h_).cwiseAbs().maxCoeff();
}

Superoperator compose(const Superoperator& g, const Superoperator& f) {
    if (!(f.cod() == g.dom()))
        throw ShapeMismatch("compose: middle algebras differ: " + f.cod().str() + " vs " +
                            g.dom().str());
    return Superoperator(f.dom(), g.cod(), f.hmat() * g.hmat());
}

Superoperator tensor(const Superoperator& a, const Superoperator& b) {
    FinAlg dom = a.dom().tensor(b.dom());
    FinAlg cod = a.cod().tensor(b.cod());
    return Superoperator::from_action(dom, cod, [&](const BlockElem& e) {
        // Decompose the basis element of block (j1, j2) as E1 (x) E2.
        // from_action feeds single-entry elements, so locate it.
        for (std::size_t blk = 0; blk < e.mats.size(); blk++) {
            for (int c = 0; c < e.mats[blk].cols(); c++)
                for (int r = 0; r < e.mats[blk].rows(); r++) {
                    if (e.mats[blk](r, c) == 0.0) continue;
                    std::size_t n2 = b.cod().blocks.size();
                    std::size_t j1 = blk / n2, j2 = blk % n2;
                    int e2 = b.cod().blocks[j2];
                    int r1 = r / e2, r2 = r % e2;
                    int c1 = c / e2, c2 = c % e2;
                    BlockElem x = a.apply_heisenberg(
                        BlockElem::basis(a.cod(), j1, r1, c1));
                    BlockElem y = b.apply_heisenberg(
                        BlockElem::basis(b.cod(), j2, r2, c2));
                    return x.kron(y);
                }
        }
        return BlockElem::zero(dom);
    });
}

Superoperator injection1(const FinAlg& a, const FinAlg& b) {
    FinAlg sum = a.direct_sum(b);
    Matrix h = Matrix::Zero(a.vec_dim(), sum.vec_dim());
    h.block(0, 0, a.vec_dim(), a.vec_dim()) = Matrix::Identity(a.vec_dim(), a.vec_dim());
    return Superoperator(a, sum, std::move(h));
}

Superoperator injection2(const FinAlg& a, const FinAlg& b) {
    FinAlg sum = a.direct_sum(b);
    Matrix h = Matrix::Zero(b.vec_dim(), sum.vec_dim());
    h.block(0, a.vec_dim(), b.vec_dim(), b.vec_dim()) =
        Matrix::Identity(b.vec_dim(), b.vec_dim());
    return Superoperator(b, sum, std::move(h));
}

Superoperator copair(const Superoperator& f, const Superoperator& g) {
    if (!(f.cod() == g.cod())) throw ShapeMismatch("copair: codomains differ");
    FinAlg dom = f.dom().direct_sum(g.dom());
    Matrix h(dom.vec_dim(), f.cod().vec_dim());
    h.topRows(f.dom().vec_dim()) = f.hmat();
    h.bottomRows(g.dom().vec_dim()) = g.hmat();
    return Superoperator(dom, f.cod(), std::move(h));
}

namespace {

// Index codec for iterated tensor products.
struct TensorLayout {
    std::vector<FinAlg> factors;
    FinAlg whole;

    explicit TensorLayout(std::vector<FinAlg> fs)
        : factors(std::move(fs)), whole(tensor_many(factors)) {}

    // Splits a flat block id into per-factor block ids (factor 0 major).
    std::vector<std::size_t> split_block(std::size_t blk) const {
        std::vector<std::size_t> out(factors.size());
        for (std::size_t k = factors.size(); k-- > 0;) {
            std::size_t n = factors[k].blocks.size();
            out[k] = blk % n;
            blk /= n;
        }
        return out;
    }
    std::size_t join_block(const std::vector<std::size_t>& per) const {
        std::size_t blk = 0;
        for (std::size_t k = 0; k < factors.size(); k++)
            blk = blk * factors[k].blocks.size() + per[k];
        return blk;
    }
    // Splits a row/col index within block `per` into per-factor indices.
    std::vector<int> split_index(const std::vector<std::size_t>& per, int idx) const {
        std::vector<int> out(factors.size());
        for (std::size_t k = factors.size(); k-- > 0;) {
            int d = factors[k].blocks[per[k]];
            out[k] = idx % d;
            idx /= d;
        }
        return out;
    }
    int join_index(const std::vector<std::size_t>& per, const std::vector<int>& idxs) const {
        int idx = 0;
        for (std::size_t k = 0; k < factors.size(); k++)
            idx = idx * factors[k].blocks[per[k]] + idxs[k];
        return idx;
    }
};

template <typename T>
std::vector<T> permuted(const std::vector<T>& v, const std::vector<int>& sigma) {
    std::vector<T> out(v.size());
    for (std::size_t k = 0; k < sigma.size(); k++) out[k] = v[static_cast<std::size_t>(sigma[k])];
    return out;
}

} // namespace

Superoperator perm_op(const std::vector<FinAlg>& factors, const std::vector<int>& sigma) {
    if (factors.size() != sigma.size()) throw ShapeMismatch("perm_op: arity mismatch");
    TensorLayout dom_layout(factors);
    std::vector<FinAlg> cod_factors;
    cod_factors.reserve(sigma.size());
    for (int s : sigma) cod_factors.push_back(factors[static_cast<std::size_t>(s)]);
    TensorLayout cod_layout(std::move(cod_factors));

    std::vector<int> inv(sigma.size());
    for (std::size_t k = 0; k < sigma.size(); k++) inv[static_cast<std::size_t>(sigma[k])] =
        static_cast<int>(k);

    return Superoperator::from_action(dom_layout.whole, cod_layout.whole,
                                      [&](const BlockElem& e) {
        BlockElem out = BlockElem::zero(dom_layout.whole);
        for (std::size_t blk = 0; blk < e.mats.size(); blk++) {
            for (int c = 0; c < e.mats[blk].cols(); c++)
                for (int r = 0; r < e.mats[blk].rows(); r++) {
                    if (e.mats[blk](r, c) == 0.0) continue;
                    auto per = cod_layout.split_block(blk);
                    auto rs = cod_layout.split_index(per, r);
                    auto cs = cod_layout.split_index(per, c);
                    // cod factor k is dom factor sigma[k]
                    auto dper = permuted(per, inv);
                    auto drs = permuted(rs, inv);
                    auto dcs = permuted(cs, inv);
                    std::size_t dblk = dom_layout.join_block(dper);
                    out.mats[dblk](dom_layout.join_index(dper, drs),
                                   dom_layout.join_index(dper, dcs)) = e.mats[blk](r, c);
                }
        }
        return out;
    });
}

Superoperator swap_op(const FinAlg& a, const FinAlg& b) { return perm_op({a, b}, {1, 0}); }

Superoperator distrib(const FinAlg& a, const FinAlg& b, const FinAlg& c) {
    FinAlg dom = a.tensor(b.direct_sum(c));
    FinAlg cod = a.tensor(b).direct_sum(a.tensor(c));
    // Pure block permutation: dom block (i, j) maps to cod block i*|B|+j when
    // j < |B|, else to |A||B| + i*|C| + (j - |B|).
    const std::size_t nb = b.blocks.size(), nc = c.blocks.size(), na = a.blocks.size();
    Matrix h = Matrix::Zero(dom.vec_dim(), cod.vec_dim());
    auto block_offset = [](const FinAlg& f, std::size_t blk) {
        int off = 0;
        for (std::size_t k = 0; k < blk; k++) off += f.blocks[k] * f.blocks[k];
        return off;
    };
    for (std::size_t i = 0; i < na; i++) {
        for (std::size_t j = 0; j < nb + nc; j++) {
            std::size_t dom_blk = i * (nb + nc) + j;
            std::size_t cod_blk = j < nb ? i * nb + j : na * nb + i * nc + (j - nb);
            int d = dom.blocks[dom_blk];
            int doff = block_offset(dom, dom_blk), coff = block_offset(cod, cod_blk);
            for (int k = 0; k < d * d; k++) h(doff + k, coff + k) = 1.0;
        }
    }
    return Superoperator(dom, cod, std::move(h));
}

// ---------------------------------------------------------------------------
// Primitive channels
// ---------------------------------------------------------------------------

Superoperator meas_op() {
    FinAlg bit{{1, 1}};
    Matrix h = Matrix::Zero(4, 2);
    h(0, 0) = 1.0; // alpha -> x00
    h(3, 1) = 1.0; // delta -> x11
    return Superoperator(FinAlg::qubit(), bit, std::move(h));
}

Superoperator new_op() {
    FinAlg bit{{1, 1}};
    Matrix h = Matrix::Zero(2, 4);
    h(0, 0) = 1.0; // x00 -> alpha
    h(1, 3) = 1.0; // x11 -> delta
    return Superoperator(bit, FinAlg::qubit(), std::move(h));
}

Superoperator unitary_op(const GateSpec& g) {
    const int d = static_cast<int>(g.matrix.rows());
    FinAlg alg{{d}};
    const Matrix& u = g.matrix;
    return Superoperator::from_action(alg, alg, [&](const BlockElem& e) {
        BlockElem out = e;
        out.mats[0] = u.adjoint() * e.mats[0] * u;
        return out;
    });
}

Superoperator tr_op(int n) {
    FinAlg alg{{n}};
    Matrix h(n * n, 1);
    BlockElem id = BlockElem::identity(alg);
    h.col(0) = id.vec();
    return Superoperator(alg, FinAlg::scalar(), std::move(h));
}

Superoperator state_op(const Matrix& rho) {
    const int n = static_cast<int>(rho.rows());
    FinAlg alg{{n}};
    Matrix h(1, n * n);
    int col = 0;
    for (int c = 0; c < n; c++)
        for (int r = 0; r < n; r++) h(0, col++) = rho(c, r); // tr(E_rc rho) = rho_cr
    return Superoperator(FinAlg::scalar(), alg, std::move(h));
}

Superoperator drop_op(const FinAlg& a, int k) {
    FinAlg aux = FinAlg::qubits(k);
    FinAlg dom = a.tensor(aux);
    BlockElem id_aux = BlockElem::identity(aux);
    return Superoperator::from_action(dom, a, [&](const BlockElem& e) {
        return e.kron(id_aux);
    });
}

// ---------------------------------------------------------------------------
// AlgState
// ---------------------------------------------------------------------------

AlgState AlgState::zero(const FinAlg& a) {
    AlgState s{a, {}};
    for (int d : a.blocks) s.rho.push_back(Matrix::Zero(d, d));
    return s;
}

AlgState AlgState::from_pure(const StateVector& psi) {
    const int n = static_cast<int>(psi.dim());
    Eigen::VectorXcd v(n);
    for (int i = 0; i < n; i++) v(i) = psi.amp(static_cast<std::size_t>(i));
    AlgState s{FinAlg{{n}}, {}};
    s.rho.push_back(v * v.adjoint());
    return s;
}

double AlgState::trace_total() const {
    double t = 0.0;
    for (const auto& m : rho) t += m.trace().real();
    return t;
}

double AlgState::value(const BlockElem& observable) const {
    if (!(observable.alg == alg)) throw ShapeMismatch("observable algebra mismatch");
    Complex acc{0.0, 0.0};
    for (std::size_t i = 0; i < rho.size(); i++)
        acc += (observable.mats[i] * rho[i]).trace();
    return acc.real();
}

AlgState AlgState::push_through(const Superoperator& s) const {
    if (!(s.dom() == alg)) throw ShapeMismatch("state algebra does not match the channel domain");
    // phi'(b) = phi(h(b)), so the density vector maps through h-adjoint.
    Eigen::VectorXcd v(alg.vec_dim());
    {
        BlockElem e{alg, rho};
        v = e.vec();
    }
    Eigen::VectorXcd w = s.hmat().adjoint() * v;
    BlockElem out = BlockElem::from_vec(s.cod(), w);
    return AlgState{s.cod(), std::move(out.mats)};
}

Superoperator AlgState::as_superop() const {
    Matrix h(1, alg.vec_dim());
    int col = 0;
    for (const auto& m : rho)
        for (int c = 0; c < m.cols(); c++)
            for (int r = 0; r < m.rows(); r++) h(0, col++) = m(c, r); // tr(E_rc rho)
    return Superoperator(FinAlg::scalar(), alg, std::move(h));
}

double AlgState::max_abs_diff(const AlgState& o) const {
    if (!(alg == o.alg)) throw ShapeMismatch("state algebra mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < rho.size(); i++)
        m = std::max(m, (rho[i] - o.rho[i]).cwiseAbs().maxCoeff());
    return m;
}

AlgState AlgState::scaled(double w) const {
    AlgState s = *this;
    for (auto& m : s.rho) m *= w;
    return s;
}

AlgState AlgState::plus(const AlgState& o) const {
    if (!(alg == o.alg)) throw ShapeMismatch("state algebra mismatch");
    AlgState s = *this;
    for (std::size_t i = 0; i < rho.size(); i++) s.rho[i] += o.rho[i];
    return s;
}

// ---------------------------------------------------------------------------
// NCPSU check
// ---------------------------------------------------------------------------

NcpsuReport ncpsu_check(const Superoperator& s, double tol) {
    NcpsuReport rep;
    const FinAlg& dom = s.dom();
    const FinAlg& cod = s.cod();

    // Per-component Choi matrices.
    for (std::size_t j = 0; j < cod.blocks.size(); j++) {
        const int e = cod.blocks[j];
        // phi_ij for all dom blocks at once: choi_i = sum_rc E_rc (x) phi(E_rc)_i
        std::vector<Matrix> chois;
        for (int di : dom.blocks) chois.push_back(Matrix::Zero(e * di, e * di));
        for (int r = 0; r < e; r++)
            for (int c = 0; c < e; c++) {
                BlockElem out = s.apply_heisenberg(BlockElem::basis(cod, j, r, c));
                for (std::size_t i = 0; i < dom.blocks.size(); i++) {
                    const int di = dom.blocks[i];
                    chois[i].block(r * di, c * di, di, di) = out.mats[i];
                }
            }
        for (std::size_t i = 0; i < chois.size(); i++) {
            const Matrix& ch = chois[i];
            double herm = (ch - ch.adjoint()).cwiseAbs().maxCoeff();
            if (herm > tol) {
                rep.ok = false;
                rep.detail = "Choi matrix (" + std::to_string(i) + "," + std::to_string(j) +
                             ") is not Hermitian (dev " + std::to_string(herm) + ")";
                rep.min_choi_eig = std::min(rep.min_choi_eig, -herm);
                continue;
            }
            Eigen::SelfAdjointEigenSolver<Matrix> es(ch, Eigen::EigenvaluesOnly);
            double mn = es.eigenvalues().minCoeff();
            rep.min_choi_eig = std::min(rep.min_choi_eig, mn);
            if (mn < -tol) {
                rep.ok = false;
                if (rep.detail.empty())
                    rep.detail = "Choi matrix (" + std::to_string(i) + "," + std::to_string(j) +
                                 ") has eigenvalue " + std::to_string(mn);
            }
        }
    }

    // Subunitality: 1 - phi(1) PSD.
    BlockElem u = s.apply_heisenberg(BlockElem::identity(cod));
    for (std::size_t i = 0; i < dom.blocks.size(); i++) {
        Matrix gap = Matrix::Identity(dom.blocks[i], dom.blocks[i]) - u.mats[i];
        double herm = (gap - gap.adjoint()).cwiseAbs().maxCoeff();
        if (herm > tol) {
            rep.ok = false;
            rep.detail = "phi(1) is not Hermitian";
            rep.subunit_violation = std::min(rep.subunit_violation, -herm);
            continue;
        }
        Eigen::SelfAdjointEigenSolver<Matrix> es(gap, Eigen::EigenvaluesOnly);
        double mn = es.eigenvalues().minCoeff();
        rep.subunit_violation = std::min(rep.subunit_violation, mn);
        if (mn < -tol) {
            rep.ok = false;
            if (rep.detail.empty())
                rep.detail = "phi(1) exceeds 1 by " + std::to_string(-mn);
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Type interpretation and observable value enumeration
// ---------------------------------------------------------------------------

FinAlg interp_qtype(const QTypePtr& t) {
    switch (t->kind) {
    case QTypeKind::Unit: return FinAlg::scalar();
    case QTypeKind::Qbit: return FinAlg::qubit();
    case QTypeKind::Sum: return interp_qtype(t->a).direct_sum(interp_qtype(t->b));
    case QTypeKind::Tensor: return interp_qtype(t->a).tensor(interp_qtype(t->b));
    case QTypeKind::Mu:
        throw UnsupportedMu("recursive quantum types are outside the oracle: " + print_type(t));
    case QTypeKind::Var:
        throw UnsupportedMu("open quantum type: " + print_type(t));
    }
    throw DenotError("bad type");
}

std::vector<CTermPtr> enumerate_observable_values(const CTypePtr& t) {
    switch (t->kind) {
    case CTypeKind::Unit: return {cunit()};
    case CTypeKind::Sum: {
        std::vector<CTermPtr> out;
        for (const auto& v : enumerate_observable_values(t->a)) out.push_back(cin1(t, v));
        for (const auto& v : enumerate_observable_values(t->b)) out.push_back(cin2(t, v));
        return out;
    }
    case CTypeKind::Prod: {
        std::vector<CTermPtr> out;
        for (const auto& va : enumerate_observable_values(t->a))
            for (const auto& vb : enumerate_observable_values(t->b))
                out.push_back(cpair(va, vb));
        return out;
    }
    case CTypeKind::Mu:
        throw UnsupportedMu("recursive types have infinitely many values: " + print_type(t));
    default:
        throw NotObservable("type is not observable: " + print_type(t));
    }
}

SubDist r_iso(const AlgState& s, const QTypePtr& obs_type) {
    if (!s.alg.commutative())
        throw NonCommutative("r is only defined on commutative algebras, got " + s.alg.str());
    std::vector<CTermPtr> values = enumerate_observable_values(obs_translate_type(obs_type));
    if (values.size() != s.alg.blocks.size())
        throw ShapeMismatch("value enumeration does not match the algebra");
    SubDist out;
    for (std::size_t i = 0; i < values.size(); i++) {
        Complex w = s.rho[i](0, 0);
        if (std::abs(w.imag()) > 1e-9 || w.real() < -1e-9)
            throw DenotError("state weight is not a probability: " + std::to_string(w.real()) +
                             "+" + std::to_string(w.imag()) + "i");
        double p = std::max(0.0, w.real());
        if (p > 0.0) out.add(canonical_key(values[i]), p);
    }
    return out;
}

AlgState r_inv(const SubDist& d, const CTypePtr& obs_ctype) {
    std::vector<CTermPtr> values = enumerate_observable_values(obs_ctype);
    FinAlg alg = interp_qtype(obs_inv_type(obs_ctype));
    AlgState s = AlgState::zero(alg);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < values.size(); i++) index[canonical_key(values[i])] = i;
    for (const auto& [k, p] : d.entries()) {
        auto it = index.find(k);
        if (it == index.end()) throw DenotError("value " + k + " is not of the expected type");
        s.rho[it->second](0, 0) += p;
    }
    return s;
}

Superoperator barycentre(const std::vector<std::pair<double, Superoperator>>& weighted,
                         const FinAlg& dom, const FinAlg& cod) {
    double total = 0.0;
    Matrix h = Matrix::Zero(dom.vec_dim(), cod.vec_dim());
    for (const auto& [w, s] : weighted) {
        if (!(s.dom() == dom) || !(s.cod() == cod))
            throw ShapeMismatch("barycentre over channels of different shapes");
        if (w < 0.0) throw WeightOverflow("barycentre: negative weight");
        total += w;
        h += w * s.hmat();
    }
    if (total > 1.0 + 1e-12) throw WeightOverflow("barycentre: weights exceed 1");
    return Superoperator(dom, cod, std::move(h));
}

// ---------------------------------------------------------------------------
// Term interpretation
// ---------------------------------------------------------------------------

namespace {

QTypePtr synth_qtype(const QTermPtr& q, const std::vector<QBinder>& gamma) {
    ClassicalCtx phi;
    QuantumCtx g;
    for (const auto& b : gamma) g.push(b.name, b.type);
    return check_quantum_complete(phi, g, q);
}

std::vector<FinAlg> gamma_algs(const std::vector<QBinder>& gamma) {
    std::vector<FinAlg> out;
    out.reserve(gamma.size());
    for (const auto& b : gamma) out.push_back(interp_qtype(b.type));
    return out;
}

// Splits gamma into the part used by `q` (in gamma order) and the rest, and
// builds the permutation gamma -> left ++ right.
struct Split {
    std::vector<QBinder> left, right;
    std::vector<int> sigma;
};

Split split_gamma(const std::vector<QBinder>& gamma, const QTermPtr& left_term) {
    std::vector<Ident> lv = free_qvars(left_term);
    std::set<Ident> lset(lv.begin(), lv.end());
    Split s;
    std::vector<int> left_idx, right_idx;
    for (std::size_t i = 0; i < gamma.size(); i++) {
        if (lset.count(gamma[i].name)) {
            s.left.push_back(gamma[i]);
            left_idx.push_back(static_cast<int>(i));
        } else {
            s.right.push_back(gamma[i]);
            right_idx.push_back(static_cast<int>(i));
        }
    }
    s.sigma = left_idx;
    s.sigma.insert(s.sigma.end(), right_idx.begin(), right_idx.end());
    return s;
}

// Weighted channel values of a closed classical term of type Q(A, B).
std::vector<std::pair<double, Superoperator>> explore_channel(const CTermPtr& m,
                                                              const DenotOptions& opts) {
    ExploreReport rep = explore(Program{m}, opts.oracle_steps, opts.eval);
    if (rep.residual > opts.residual_eps)
        throw ResidualMass("classical subterm left residual mass " +
                           std::to_string(rep.residual));
    std::vector<std::pair<double, Superoperator>> out;
    for (const auto& [key, p] : rep.dist.entries()) {
        const Program& v = rep.reps.at(key);
        out.emplace_back(p, interp_value_channel(std::get<CTermPtr>(v), opts));
    }
    return out;
}

SubDist explore_observable(const CTermPtr& m, const DenotOptions& opts) {
    ExploreReport rep = explore(Program{m}, opts.oracle_steps, opts.eval);
    if (rep.residual > opts.residual_eps)
        throw ResidualMass("classical subterm left residual mass " +
                           std::to_string(rep.residual));
    return rep.dist;
}

} // namespace

Superoperator interp_value_channel(const CTermPtr& v, const DenotOptions& opts) {
    switch (v->kind) {
    case CKind::MeasConst: return meas_op();
    case CKind::NewConst: return new_op();
    case CKind::Gate: return unitary_op(*v->gate);
    case CKind::QLam: return interp_qterm(v->qbody, v->qbinders, opts);
    default:
        throw DenotError("not a channel value: " + print_term(v));
    }
}

Superoperator interp_qterm(const QTermPtr& q, const std::vector<QBinder>& gamma,
                           const DenotOptions& opts) {
    switch (q->kind) {
    case QKind::Var: {
        if (gamma.size() != 1 || gamma[0].name != q->name)
            throw ShapeMismatch("variable context mismatch");
        return Superoperator::identity(interp_qtype(gamma[0].type));
    }
    case QKind::Star:
        return Superoperator::identity(FinAlg::scalar());
    case QKind::Tensor: {
        Split sp = split_gamma(gamma, q->a);
        Superoperator sa = interp_qterm(q->a, sp.left, opts);
        Superoperator sb = interp_qterm(q->b, sp.right, opts);
        return compose(tensor(sa, sb), perm_op(gamma_algs(gamma), sp.sigma));
    }
    case QKind::Seq: {
        Split sp = split_gamma(gamma, q->a);
        Superoperator sa = interp_qterm(q->a, sp.left, opts);  // Gamma1 -> I
        Superoperator sb = interp_qterm(q->b, sp.right, opts); // Gamma2 -> A
        Superoperator both = compose(tensor(sa, sb), perm_op(gamma_algs(gamma), sp.sigma));
        // I (x) A and A have the same representation.
        return both.relabel(both.dom(), sb.cod());
    }
    case QKind::LetTensor: {
        Split sp = split_gamma(gamma, q->a);
        Superoperator sq = interp_qterm(q->a, sp.left, opts); // Gamma1 -> A1 (x) A2
        QTypePtr ty = synth_qtype(q->a, sp.left);
        if (ty->kind != QTypeKind::Tensor) throw DenotError("let-tensor of a non-tensor");
        std::vector<QBinder> inner = sp.right;
        inner.push_back({q->name, ty->a});
        inner.push_back({q->name2, ty->b});
        Superoperator sr = interp_qterm(q->b, inner, opts);
        // gamma -> Gamma2 ++ Gamma1, then id (x) sq, then sr.
        std::vector<int> sigma;
        for (std::size_t i = sp.left.size(); i < sp.sigma.size(); i++) sigma.push_back(sp.sigma[i]);
        for (std::size_t i = 0; i < sp.left.size(); i++) sigma.push_back(sp.sigma[i]);
        Superoperator perm = perm_op(gamma_algs(gamma), sigma);
        Superoperator id2 = Superoperator::identity(tensor_many(gamma_algs(sp.right)));
        Superoperator mid = tensor(id2, sq);
        return compose(sr.relabel(mid.cod(), sr.cod()), compose(mid, perm));
    }
    case QKind::In1:
    case QKind::In2: {
        if (q->ty->kind != QTypeKind::Sum) throw DenotError("injection without a sum type");
        FinAlg a = interp_qtype(q->ty->a), b = interp_qtype(q->ty->b);
        Superoperator inj = q->kind == QKind::In1 ? injection1(a, b) : injection2(a, b);
        return compose(inj, interp_qterm(q->a, gamma, opts));
    }
    case QKind::Case: {
        Split sp = split_gamma(gamma, q->a);
        Superoperator sq = interp_qterm(q->a, sp.left, opts); // Gamma1 -> A1 (+) A2
        QTypePtr ty = synth_qtype(q->a, sp.left);
        if (ty->kind != QTypeKind::Sum) throw DenotError("case of a non-sum");
        FinAlg a1 = interp_qtype(ty->a), a2 = interp_qtype(ty->b);
        std::vector<QBinder> g1 = sp.right, g2 = sp.right;
        g1.push_back({q->name, ty->a});
        g2.push_back({q->name2, ty->b});
        Superoperator s1 = interp_qterm(q->b, g1, opts);
        Superoperator s2 = interp_qterm(q->c, g2, opts);
        // gamma -> Gamma2 ++ Gamma1
        std::vector<int> sigma;
        for (std::size_t i = sp.left.size(); i < sp.sigma.size(); i++) sigma.push_back(sp.sigma[i]);
        for (std::size_t i = 0; i < sp.left.size(); i++) sigma.push_back(sp.sigma[i]);
        Superoperator perm = perm_op(gamma_algs(gamma), sigma);
        FinAlg g2alg = tensor_many(gamma_algs(sp.right));
        Superoperator mid = tensor(Superoperator::identity(g2alg), sq); // -> G2 (x) (A1+A2)
        Superoperator d = distrib(g2alg, a1, a2);
        Superoperator branches =
            copair(s1.relabel(g2alg.tensor(a1), s1.cod()), s2.relabel(g2alg.tensor(a2), s2.cod()));
        return compose(branches, compose(d, compose(mid, perm)));
    }
    case QKind::App: {
        Superoperator sq = interp_qterm(q->a, gamma, opts);
        CTypePtr fty = check_closed(q->m);
        if (fty->kind != CTypeKind::QFun) throw DenotError("application head is not Q(A, B)");
        FinAlg a = interp_qtype(fty->qa), b = interp_qtype(fty->qb);
        Superoperator chan = barycentre(explore_channel(q->m, opts), a, b);
        return compose(chan, sq.relabel(sq.dom(), a));
    }
    case QKind::Init: {
        if (!gamma.empty()) throw ShapeMismatch("init must have an empty quantum context");
        CTypePtr p = check_closed(q->m);
        AlgState s = r_inv(explore_observable(q->m, opts), p);
        return s.as_superop();
    }
    case QKind::Lift: {
        Split sp = split_gamma(gamma, q->a);
        Superoperator sq = interp_qterm(q->a, sp.left, opts); // Gamma1 -> O
        QTypePtr oty = synth_qtype(q->a, sp.left);
        CTypePtr obs = obs_translate_type(oty);
        std::vector<CTermPtr> values = enumerate_observable_values(obs);
        FinAlg oalg = interp_qtype(oty);
        if (values.size() != oalg.blocks.size() || !oalg.commutative())
            throw ShapeMismatch("observable algebra does not match its value enumeration");

        std::vector<Superoperator> per_value;
        per_value.reserve(values.size());
        FinAlg bres = FinAlg::scalar();
        for (std::size_t y = 0; y < values.size(); y++) {
            QTermPtr ry = subst_cvar(q->b, q->name, values[y]);
            Superoperator sy = interp_qterm(ry, sp.right, opts);
            if (y == 0) bres = sy.cod();
            per_value.push_back(std::move(sy));
        }
        FinAlg g2alg = tensor_many(gamma_algs(sp.right));
        FinAlg dispatch_dom = oalg.tensor(g2alg);
        // Heisenberg: b |-> block-diagonal dispatch over the observed value.
        Superoperator dispatch =
            Superoperator::from_action(dispatch_dom, bres, [&](const BlockElem& e) {
                BlockElem out = BlockElem::zero(dispatch_dom);
                const std::size_t ng = g2alg.blocks.size();
                for (std::size_t y = 0; y < per_value.size(); y++) {
                    BlockElem ey = per_value[y].apply_heisenberg(e);
                    BlockElem g2e = ey; // element of g2alg (per_value dom == g2alg rep)
                    for (std::size_t j = 0; j < ng; j++) out.mats[y * ng + j] = g2e.mats[j];
                }
                return out;
            });
        // gamma -> Gamma1 ++ Gamma2, then sq (x) id, then dispatch.
        Superoperator perm = perm_op(gamma_algs(gamma), sp.sigma);
        Superoperator mid = tensor(sq, Superoperator::identity(g2alg));
        return compose(dispatch.relabel(mid.cod(), bres), compose(mid, perm));
    }
    case QKind::Fold:
    case QKind::Unfold:
        throw UnsupportedMu("fold/unfold are outside the finite-dimensional oracle");
    }
    throw DenotError("unhandled quantum term");
}

// ---------------------------------------------------------------------------
// Configurations
// ---------------------------------------------------------------------------

namespace {

// Reorders qubits so that new position i holds old qubit pi[i] (1-based).
StateVector permute_state(const StateVector& s, const std::vector<int>& pi) {
    const int n = s.num_qubits();
    std::vector<Complex> out(s.dim());
    for (std::size_t b = 0; b < s.dim(); b++) {
        std::size_t src = 0;
        for (int i = 1; i <= n; i++) {
            std::size_t bit = (b >> (n - i)) & 1;
            if (bit) src |= std::size_t{1} << (n - pi[static_cast<std::size_t>(i - 1)]);
        }
        out[b] = s.amp(src);
    }
    return StateVector::from_amplitudes(n, std::move(out));
}

} // namespace

AlgState interp_config(const Configuration& c, const DenotOptions& opts) {
    std::vector<Ident> vars = free_qvars(c.term);
    const int n = c.state.num_qubits();
    const int m = static_cast<int>(vars.size());
    const int k = n - m;
    if (k < 0) throw ShapeMismatch("configuration has more variables than qubits");

    // sigma_l: position i holds qubit l(x_i); auxiliary qubits follow in
    // ascending order.
    std::vector<int> pi;
    std::set<int> used;
    for (const auto& v : vars) {
        auto it = c.link.find(v);
        if (it == c.link.end()) throw ShapeMismatch("unlinked variable " + v);
        pi.push_back(it->second);
        used.insert(it->second);
    }
    for (int j = 1; j <= n; j++)
        if (!used.count(j)) pi.push_back(j);

    StateVector arranged = permute_state(c.state, pi);
    AlgState s = AlgState::from_pure(arranged); // on M_{2^n} = [[qbit^m]] (x) [[qbit^k]]

    std::vector<QBinder> gamma;
    for (const auto& v : vars) gamma.push_back({v, qt_qbit()});
    Superoperator sq = interp_qterm(c.term, gamma, opts);

    FinAlg aux = FinAlg::qubits(k);
    Superoperator whole = tensor(sq.relabel(FinAlg::qubits(m), sq.cod()),
                                 Superoperator::identity(aux));
    AlgState arranged_state{whole.dom(), std::move(s.rho)};
    return arranged_state.push_through(whole);
}

// ---------------------------------------------------------------------------
// Adequacy
// ---------------------------------------------------------------------------

namespace {

const char* kResidualKey = "<nonterminated>";

// Denotational distribution of a run-term or configuration of observable
// type, with auxiliary qubits dropped.
SubDist config_dist(const Configuration& c, const DenotOptions& opts) {
    ClassicalCtx phi;
    ConfigType ct = check_config(phi, c);
    if (!is_observable(ct.type))
        throw DenotError("adequacy comparison requires an observable type, got " +
                         print_type(ct.type));
    AlgState s = interp_config(c, opts);
    FinAlg a = interp_qtype(ct.type);
    AlgState dropped = s.push_through(drop_op(a, ct.aux_qubits).relabel(s.alg, a));
    return r_iso(dropped, ct.type);
}

} // namespace

SubDist denot_dist(const Program& p, const DenotOptions& opts) {
    if (std::holds_alternative<Configuration>(p))
        return config_dist(std::get<Configuration>(p), opts);
    const CTermPtr& m = std::get<CTermPtr>(p);
    if (is_value(m)) return SubDist::dirac(canonical_key(m));
    if (m->kind == CKind::Run) return config_dist(*m->config, opts);
    std::string shown = print_term(m);
    if (shown.size() > 120) shown = shown.substr(0, 117) + "...";
    throw DenotError("term is outside the oracle (not a value, run term or configuration): " +
                     shown);
}

namespace {

bool interpretable(const Program& p) {
    if (std::holds_alternative<Configuration>(p)) return true;
    const CTermPtr& m = std::get<CTermPtr>(p);
    return is_value(m) || m->kind == CKind::Run;
}

// Checks [[p]] = sum_b p_b [[succ_b]] at one node; returns the deviation.
double soundness_at(const Program& p, const std::vector<std::pair<double, Program>>& succs,
                    const DenotOptions& opts) {
    if (std::holds_alternative<Configuration>(p)) {
        AlgState lhs = interp_config(std::get<Configuration>(p), opts);
        AlgState rhs = AlgState::zero(lhs.alg);
        for (const auto& [pr, sp] : succs) {
            AlgState si = interp_config(std::get<Configuration>(sp), opts);
            rhs = rhs.plus(si.scaled(pr));
        }
        return lhs.max_abs_diff(rhs);
    }
    SubDist lhs = denot_dist(p, opts);
    SubDist rhs;
    for (const auto& [pr, sp] : succs) {
        SubDist di = denot_dist(sp, opts);
        for (const auto& [key, w] : di.entries()) rhs.add(key, pr * w);
    }
    return max_pointwise_diff(lhs, rhs);
}

} // namespace

std::pair<double, long> soundness_walk(const Program& p, int bound, const DenotOptions& opts) {
    double max_dev = 0.0;
    long nodes = 0;
    std::vector<std::pair<Program, std::uint64_t>> frontier{{p, 0}};
    std::set<std::string> seen;
    for (int depth = 0; depth <= bound && !frontier.empty(); depth++) {
        std::vector<std::pair<Program, std::uint64_t>> next;
        for (auto& [prog, fresh0] : frontier) {
            if (is_terminal(prog)) continue;
            std::uint64_t fresh = fresh0;
            auto succs = step_program(prog, fresh, opts.eval);
            if (interpretable(prog)) {
                bool all_ok = true;
                for (const auto& [pr, sp] : succs)
                    all_ok = all_ok && (interpretable(sp) || is_terminal(sp));
                if (all_ok) {
                    nodes++;
                    max_dev = std::max(max_dev, soundness_at(prog, succs, opts));
                }
            }
            for (auto& [pr, sp] : succs) {
                std::string key = program_key(sp);
                if (seen.insert(key).second) next.emplace_back(std::move(sp), fresh);
            }
        }
        frontier = std::move(next);
    }
    return {max_dev, nodes};
}

AdequacyReport adequacy_check(const Program& p, int bound, double tol, const DenotOptions& opts) {
    AdequacyReport rep;
    rep.tol = tol;
    rep.denotational = denot_dist(p, opts);

    ExploreReport er = explore(p, bound, opts.eval);
    rep.residual = er.residual;

    // Operational outcomes as observable classical values: run-terms already
    // terminate at such values; configurations terminate at value
    // configurations whose value translates.
    SubDist op;
    for (const auto& [key, w] : er.dist.entries()) {
        const Program& v = er.reps.at(key);
        if (std::holds_alternative<CTermPtr>(v)) {
            op.add(canonical_key(std::get<CTermPtr>(v)), w);
        } else {
            const Configuration& vc = std::get<Configuration>(v);
            op.add(canonical_key(obs_translate_value(vc.term)), w);
        }
    }
    rep.operational = op;

    SubDist op_with_residual = op;
    if (rep.residual > 0.0) op_with_residual.add(kResidualKey, rep.residual);
    rep.tv = total_variation(rep.denotational, op_with_residual);

    auto [dev, nodes] = soundness_walk(p, bound, opts);
    rep.soundness_max_dev = dev;
    rep.soundness_nodes = nodes;

    rep.pass = rep.tv <= tol + rep.residual;
    return rep;
}

} // namespace vqpl
