#pragma once

#include "vqpl/gates.hpp"
#include "vqpl/qstate.hpp"
#include "vqpl/span.hpp"

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace vqpl {

using Ident = std::string;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

struct QType;
struct CType;
using QTypePtr = std::shared_ptr<const QType>;
using CTypePtr = std::shared_ptr<const CType>;

enum class QTypeKind { Var, Unit, Qbit, Sum, Tensor, Mu };

struct QType {
    QTypeKind kind;
    Ident name;        // Var name or Mu binder
    QTypePtr a, b;     // Sum/Tensor children; Mu body in a
};

enum class CTypeKind { Var, Unit, Sum, Prod, Arrow, QFun, Mu };

struct CType {
    CTypeKind kind;
    Ident name;        // Var name or Mu binder
    CTypePtr a, b;     // children; Mu body in a
    QTypePtr qa, qb;   // QFun domain/codomain
};

QTypePtr qt_var(Ident n);
QTypePtr qt_unit();
QTypePtr qt_qbit();
QTypePtr qt_sum(QTypePtr a, QTypePtr b);
QTypePtr qt_tensor(QTypePtr a, QTypePtr b);
QTypePtr qt_mu(Ident binder, QTypePtr body);
QTypePtr qt_bit(); // I (+) I

CTypePtr ct_var(Ident n);
CTypePtr ct_unit();
CTypePtr ct_sum(CTypePtr a, CTypePtr b);
CTypePtr ct_prod(CTypePtr a, CTypePtr b);
CTypePtr ct_arrow(CTypePtr a, CTypePtr b);
CTypePtr ct_qfun(QTypePtr dom, QTypePtr cod);
CTypePtr ct_mu(Ident binder, CTypePtr body);
CTypePtr ct_bool(); // 1 + 1

// Alpha-insensitive structural equality.
bool type_equal(const QTypePtr& x, const QTypePtr& y);
bool type_equal(const CTypePtr& x, const CTypePtr& y);

std::set<Ident> free_tvars(const QTypePtr& t);
std::set<Ident> free_tvars(const CTypePtr& t);
bool type_closed(const QTypePtr& t);
bool type_closed(const CTypePtr& t);

// Capture-avoiding type substitution body[arg/var].
QTypePtr type_subst(const QTypePtr& body, const Ident& var, const QTypePtr& arg);
CTypePtr type_subst(const CTypePtr& body, const Ident& var, const CTypePtr& arg);

// A type is observable when it mentions no qbit (quantum side) resp. no
// function space (classical side).
bool is_observable(const QTypePtr& t);
bool is_observable(const CTypePtr& t);

struct NotObservable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The |-| translation on closed observable types, and its inverse.
CTypePtr obs_translate_type(const QTypePtr& t);
QTypePtr obs_inv_type(const CTypePtr& t);

std::string print_type(const QTypePtr& t);
std::string print_type(const CTypePtr& t);

// ---------------------------------------------------------------------------
// Terms
// ---------------------------------------------------------------------------

struct CTerm;
struct QTerm;
using CTermPtr = std::shared_ptr<const CTerm>;
using QTermPtr = std::shared_ptr<const QTerm>;

struct QBinder {
    Ident name;
    QTypePtr type;
};

// [ |psi>, l, q ]: a pure state, an injective linking of q's free quantum
// variables into its qubits, and a quantum term.
struct Configuration {
    StateVector state;
    Linking link;
    QTermPtr term;
};
using ConfigPtr = std::shared_ptr<const Configuration>;

enum class CKind {
    Var, Unit, Pair, Fst, Snd, In1, In2, Case, Lam, App,
    Fold, Unfold, QLam, NewConst, MeasConst, Gate, Run
};

struct CTerm {
    CKind kind;
    Span span{};
    Ident name, name2;              // Var / binders
    CTermPtr a, b, c;               // children
    CTypePtr ty;                    // Lam annotation; In1/In2 sum type; Fold mu type
    std::vector<QBinder> qbinders;  // QLam parameters
    QTermPtr qbody;                 // QLam body
    std::shared_ptr<const GateSpec> gate;
    ConfigPtr config;               // Run
};

enum class QKind {
    Var, Star, Seq, Tensor, LetTensor, Fold, Unfold, In1, In2, Case,
    App, Init, Lift
};

struct QTerm {
    QKind kind;
    Span span{};
    Ident name, name2;  // Var / binders
    QTermPtr a, b, c;
    QTypePtr ty;        // In1/In2 sum type; Fold mu type
    CTermPtr m;         // App head; Init argument
};

// Factories. Spans default to empty and may be set by the parser.
CTermPtr cvar(Ident n);
CTermPtr cunit();
CTermPtr cpair(CTermPtr a, CTermPtr b);
CTermPtr cfst(CTermPtr a);
CTermPtr csnd(CTermPtr a);
CTermPtr cin1(CTypePtr sum, CTermPtr a);
CTermPtr cin2(CTypePtr sum, CTermPtr a);
CTermPtr ccase(CTermPtr s, Ident x, CTermPtr n1, Ident y, CTermPtr n2);
CTermPtr clam(Ident x, CTypePtr ty, CTermPtr body);
CTermPtr capp(CTermPtr f, CTermPtr arg);
CTermPtr cfold(CTypePtr mu, CTermPtr a);
CTermPtr cunfold(CTermPtr a);
CTermPtr cqlam(std::vector<QBinder> binders, QTermPtr body);
CTermPtr cnew();
CTermPtr cmeas();
CTermPtr cgate(GateSpec g);
CTermPtr crun(Configuration c);
CTermPtr crun(QTermPtr q); // run q  =  run [1, {}, q]

QTermPtr qvar(Ident n);
QTermPtr qstar();
QTermPtr qseq(QTermPtr a, QTermPtr b);
QTermPtr qtensor(QTermPtr a, QTermPtr b);
QTermPtr qlet_tensor(Ident x, Ident y, QTermPtr q, QTermPtr r);
QTermPtr qfold(QTypePtr mu, QTermPtr a);
QTermPtr qunfold(QTermPtr a);
QTermPtr qin1(QTypePtr sum, QTermPtr a);
QTermPtr qin2(QTypePtr sum, QTermPtr a);
QTermPtr qcase(QTermPtr s, Ident x, QTermPtr r1, Ident y, QTermPtr r2);
QTermPtr qapp(CTermPtr m, QTermPtr q);
QTermPtr qinit(CTermPtr m);
QTermPtr qlift(Ident x, QTermPtr q, QTermPtr r);

// Common value shorthands: ff = inl (), tt = inr (), and quantum bits.
CTermPtr c_ff();
CTermPtr c_tt();
QTermPtr q_ff();
QTermPtr q_tt();

bool is_value(const CTermPtr& m);
bool is_qvalue(const QTermPtr& q);

// Free quantum variables in first-occurrence order.
std::vector<Ident> free_qvars(const QTermPtr& q);
// Free classical variables (set).
std::set<Ident> free_cvars(const CTermPtr& m);
std::set<Ident> free_cvars(const QTermPtr& q);

// Capture-avoiding substitutions. subst_cvar replaces a classical variable,
// subst_qvar a quantum one.
CTermPtr subst_cvar(const CTermPtr& m, const Ident& x, const CTermPtr& v);
QTermPtr subst_cvar(const QTermPtr& q, const Ident& x, const CTermPtr& v);
QTermPtr subst_qvar(const QTermPtr& q, const Ident& x, const QTermPtr& w);

// The |-| translation between closed observable quantum and classical values.
CTermPtr obs_translate_value(const QTermPtr& v);
QTermPtr obs_inv_value(const CTermPtr& v);

// Canonical, re-parseable core syntax with user-facing names.
std::string print_term(const CTermPtr& m);
std::string print_term(const QTermPtr& q);

// Alpha-normal forms: bound occurrences become de Bruijn indices, so
// alpha-variants share one key. Used for distribution keys.
std::string canonical_key(const CTermPtr& m);
std::string canonical_key(const QTermPtr& q);
// Key of a value configuration: amplitudes rounded to 1e-12, linking written
// in first-occurrence order of the term's free variables, term alpha-normal.
std::string canonical_key(const Configuration& c);

// Structural equality with literal names (spans ignored).
bool term_equal(const CTermPtr& x, const CTermPtr& y);
bool term_equal(const QTermPtr& x, const QTermPtr& y);

// Compact human-facing rendering: unit, pairs, ff/tt for inl ()/inr (),
// fold chains as numerals where they spell a Nat.
std::string display_value(const CTermPtr& v);
std::string display_value(const QTermPtr& v);
std::string display_value(const Configuration& c);

} // namespace vqpl
