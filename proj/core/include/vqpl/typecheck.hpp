#pragma once

#include "vqpl/ast.hpp"

#include <set>
#include <string>
#include <vector>

namespace vqpl {

enum class ErrKind {
    Unbound,
    Mismatch,
    NonLinearUse,
    UnusedLinear,
    NotObservableErr,
    ArityMismatch,
    IllFormedType,
};

const char* err_kind_str(ErrKind k);

// Every checker rejection carries exactly one of these.
struct TypeError : std::runtime_error {
    ErrKind kind;
    Span span;
    std::string expected, actual;

    TypeError(ErrKind k, Span sp, const std::string& msg, std::string exp = {},
              std::string act = {})
        : std::runtime_error(msg), kind(k), span(sp), expected(std::move(exp)),
          actual(std::move(act)) {}
};

// Classical contexts admit weakening and contraction; names are looked up
// innermost-first so shadowing behaves as expected.
struct ClassicalCtx {
    std::vector<std::pair<Ident, CTypePtr>> entries;

    void push(Ident n, CTypePtr t) { entries.emplace_back(std::move(n), std::move(t)); }
    void pop() { entries.pop_back(); }
    const CTypePtr* lookup(const Ident& n) const;
};

// Quantum contexts are linear: each entry carries a consumed flag and at the
// end of a complete judgement every entry must be consumed exactly once.
struct QuantumCtx {
    struct Entry {
        Ident name;
        QTypePtr type;
        bool consumed = false;
    };
    std::vector<Entry> entries;

    void push(Ident n, QTypePtr t) { entries.push_back({std::move(n), std::move(t), false}); }
    std::vector<bool> flags() const;
    void restore_flags(const std::vector<bool>& f);
};

// Well-formedness of types relative to a type-variable context.
void check_type_wf(const std::set<Ident>& theta, const QTypePtr& t);
void check_type_wf(const std::set<Ident>& theta, const CTypePtr& t);

// Synthesises the type of a classical term.
CTypePtr check_classical(const ClassicalCtx& phi, const CTermPtr& m);

// Synthesises the type of a quantum term, marking consumption in gamma.
// Callers checking a complete judgement must verify full consumption; see
// check_quantum_complete.
QTypePtr check_quantum(const ClassicalCtx& phi, QuantumCtx& gamma, const QTermPtr& q);

// Complete judgement Phi; Gamma |- q : A with linearity enforced end to end.
QTypePtr check_quantum_complete(const ClassicalCtx& phi, QuantumCtx& gamma, const QTermPtr& q);

struct ConfigType {
    QTypePtr type;
    int aux_qubits; // k
};

// Well-formedness of a configuration: types the term under {x_i : qbit},
// verifies the linking is injective into {1..dim}, returns k = dim - |QFV|.
ConfigType check_config(const ClassicalCtx& phi, const Configuration& c);

// Conveniences for closed things.
CTypePtr check_closed(const CTermPtr& m);
QTypePtr check_closed(const QTermPtr& q);

} // namespace vqpl
