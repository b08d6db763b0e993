#pragma once

#include "vqpl/ast.hpp"
#include "vqpl/dist.hpp"
#include "vqpl/eval.hpp"

#include <Eigen/Dense>

namespace vqpl {

struct DenotError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnsupportedMu : DenotError {
    using DenotError::DenotError;
};
struct ShapeMismatch : DenotError {
    using DenotError::DenotError;
};
// Raised when a classical subterm's exploration leaves more residual mass
// than the oracle tolerates.
struct ResidualMass : DenotError {
    using DenotError::DenotError;
};
struct NonCommutative : DenotError {
    using DenotError::DenotError;
};

// A finite direct sum of matrix algebras  (+)_i M_{d_i}(C).
struct FinAlg {
    std::vector<int> blocks;

    int vec_dim() const;                  // sum of d_i^2
    bool commutative() const;             // all blocks of size 1
    static FinAlg scalar() { return {{1}}; }
    static FinAlg qubit() { return {{2}}; }
    static FinAlg qubits(int k);          // M_{2^k} as a single block
    FinAlg tensor(const FinAlg& o) const; // blocks d_i * e_j, i major
    FinAlg direct_sum(const FinAlg& o) const;

    bool operator==(const FinAlg& o) const = default;
    std::string str() const;
};

FinAlg tensor_many(const std::vector<FinAlg>& fs); // empty product is scalar()

// A block-diagonal element, one matrix per summand. Vectorisation is the
// concatenation of the column-major vec of each block.
struct BlockElem {
    FinAlg alg;
    std::vector<Matrix> mats;

    static BlockElem zero(const FinAlg& a);
    static BlockElem identity(const FinAlg& a);
    static BlockElem basis(const FinAlg& a, std::size_t block, int row, int col);
    static BlockElem from_vec(const FinAlg& a, const Eigen::VectorXcd& v);

    Eigen::VectorXcd vec() const;
    BlockElem kron(const BlockElem& o) const; // element of alg.tensor(o.alg)
};

// A morphism dom -> cod of the quantum category, stored as the matrix of its
// Heisenberg adjoint acting on vectorised elements, cod -> dom. Only
// program-direction composition is exposed.
class Superoperator {
  public:
    Superoperator(FinAlg dom, FinAlg cod, Matrix h);

    static Superoperator identity(const FinAlg& a);
    static Superoperator zero(const FinAlg& dom, const FinAlg& cod);
    // Builds the matrix by applying `action` to every basis element of cod.
    static Superoperator from_action(const FinAlg& dom, const FinAlg& cod,
                                     const std::function<BlockElem(const BlockElem&)>& action);

    const FinAlg& dom() const { return dom_; }
    const FinAlg& cod() const { return cod_; }
    const Matrix& hmat() const { return h_; }

    BlockElem apply_heisenberg(const BlockElem& cod_elem) const;

    // Reinterprets the same matrix between representation-equal algebras
    // (monoidal unitors and associativity are identities on our layout).
    Superoperator relabel(const FinAlg& dom, const FinAlg& cod) const;

    double max_abs_diff(const Superoperator& o) const;

  private:
    FinAlg dom_, cod_;
    Matrix h_;
};

// g after f in the program direction: f : A -> B, g : B -> C gives A -> C.
Superoperator compose(const Superoperator& g, const Superoperator& f);
Superoperator tensor(const Superoperator& a, const Superoperator& b);
Superoperator injection1(const FinAlg& a, const FinAlg& b); // A -> A (+) B
Superoperator injection2(const FinAlg& a, const FinAlg& b); // B -> A (+) B
Superoperator copair(const Superoperator& f, const Superoperator& g); // A (+) B -> C
Superoperator swap_op(const FinAlg& a, const FinAlg& b);    // A (x) B -> B (x) A
// A (x) (B (+) C)  ->  (A (x) B) (+) (A (x) C)
Superoperator distrib(const FinAlg& a, const FinAlg& b, const FinAlg& c);
// Reorders tensor factors: position k of the result is factors[sigma[k]].
Superoperator perm_op(const std::vector<FinAlg>& factors, const std::vector<int>& sigma);

// Primitive channels (program direction).
Superoperator meas_op();                      // M_2 -> C (+) C
Superoperator new_op();                       // C (+) C -> M_2
Superoperator unitary_op(const GateSpec& g);  // M_{2^n} -> M_{2^n}
Superoperator tr_op(int n);                   // M_n -> C
Superoperator state_op(const Matrix& rho);    // C -> M_n
Superoperator drop_op(const FinAlg& a, int k); // A (x) M_{2^k} -> A

// A positive subunital functional on a FinAlg, stored as one density block
// per summand (total trace <= 1). This is a state C -> A of the quantum
// category in Schroedinger form.
struct AlgState {
    FinAlg alg;
    std::vector<Matrix> rho;

    static AlgState zero(const FinAlg& a);
    static AlgState from_pure(const StateVector& psi);

    double trace_total() const;
    double value(const BlockElem& observable) const; // the functional applied
    AlgState push_through(const Superoperator& s) const; // s : alg -> B
    Superoperator as_superop() const;                    // C -> alg
    double max_abs_diff(const AlgState& o) const;
    AlgState scaled(double w) const;
    AlgState plus(const AlgState& o) const;
};

struct NcpsuReport {
    bool ok = true;
    double min_choi_eig = 0.0;        // most negative Choi eigenvalue seen
    double subunit_violation = 0.0;   // most negative eigenvalue of 1 - phi(1)
    std::string detail;
};

// Complete positivity (per-component Choi matrices PSD within tol) and
// subunitality (phi(1) below the identity within tol). Violations are
// reported, not thrown.
NcpsuReport ncpsu_check(const Superoperator& s, double tol = 1e-9);

// Interpretation of closed mu-free quantum types.
FinAlg interp_qtype(const QTypePtr& t);

// Closed values of an observable mu-free type, in the block order of the
// interpreting algebra.
std::vector<CTermPtr> enumerate_observable_values(const CTypePtr& t);

// The r isomorphism between states of a commutative algebra and
// subdistributions over the corresponding observable values, and its inverse.
SubDist r_iso(const AlgState& s, const QTypePtr& obs_type);
AlgState r_inv(const SubDist& d, const CTypePtr& obs_ctype);

// Convex combination of channels with common shape; total weight <= 1.
Superoperator barycentre(const std::vector<std::pair<double, Superoperator>>& weighted,
                         const FinAlg& dom, const FinAlg& cod);

struct DenotOptions {
    int oracle_steps = 2000;    // exploration bound for classical subterms
    double residual_eps = 1e-6; // max unexplored mass tolerated inside interp
    EvalOptions eval{};
};

// Interpretation of a quantum term whose embedded classical subterms are
// closed, under an ordered context listing exactly its free variables.
Superoperator interp_qterm(const QTermPtr& q, const std::vector<QBinder>& gamma,
                           const DenotOptions& opts = {});

// Interpretation of a closed classical value of type Q(A, B).
Superoperator interp_value_channel(const CTermPtr& v, const DenotOptions& opts = {});

// Interpretation of a closed mu-free configuration: a state on
// [[A]] (x) [[qbit^k]].
AlgState interp_config(const Configuration& c, const DenotOptions& opts = {});

// The denotational distribution of an observable program point: a value, a
// run-term, or a configuration of observable type (auxiliary qubits are
// dropped). Keys are canonical classical values.
SubDist denot_dist(const Program& p, const DenotOptions& opts = {});

struct AdequacyReport {
    SubDist denotational;
    SubDist operational;
    double residual = 0.0;
    double tv = 0.0;                 // residual counted as non-terminated mass
    double soundness_max_dev = 0.0;  // worst one-step identity deviation seen
    long soundness_nodes = 0;
    double tol = 0.0;
    bool pass = false;
};

// Compares the denotational distribution against exploration at the given
// bound and checks the one-step soundness identity at every reachable
// interpretable node. Passes iff tv <= tol + residual.
AdequacyReport adequacy_check(const Program& p, int bound, double tol,
                              const DenotOptions& opts = {});

// Max deviation of  [[C]] = sum_b p_b [[C_b]]  over reachable configurations
// and run-terms within `bound` steps (classical glue nodes are skipped).
std::pair<double, long> soundness_walk(const Program& p, int bound,
                                       const DenotOptions& opts = {});

} // namespace vqpl
