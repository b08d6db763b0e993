#include "vqpl/typecheck.hpp"

namespace vqpl {

const char* err_kind_str(ErrKind k) {
    switch (k) {
    case ErrKind::Unbound: return "Unbound";
    case ErrKind::Mismatch: return "Mismatch";
    case ErrKind::NonLinearUse: return "NonLinearUse";
    case ErrKind::UnusedLinear: return "UnusedLinear";
    case ErrKind::NotObservableErr: return "NotObservable";
    case ErrKind::ArityMismatch: return "ArityMismatch";
    case ErrKind::IllFormedType: return "IllFormedType";
    }
    return "?";
}

const CTypePtr* ClassicalCtx::lookup(const Ident& n) const {
    for (auto it = entries.rbegin(); it != entries.rend(); ++it)
        if (it->first == n) return &it->second;
    return nullptr;
}

std::vector<bool> QuantumCtx::flags() const {
    std::vector<bool> f;
    f.reserve(entries.size());
    for (const auto& e : entries) f.push_back(e.consumed);
    return f;
}

void QuantumCtx::restore_flags(const std::vector<bool>& f) {
    for (std::size_t i = 0; i < f.size() && i < entries.size(); i++) entries[i].consumed = f[i];
}

// ---------------------------------------------------------------------------
// Type formation
// ---------------------------------------------------------------------------

void check_type_wf(const std::set<Ident>& theta, const QTypePtr& t) {
    switch (t->kind) {
    case QTypeKind::Var:
        if (!theta.count(t->name))
            throw TypeError(ErrKind::IllFormedType, {}, "unbound type variable " + t->name);
        return;
    case QTypeKind::Unit:
    case QTypeKind::Qbit: return;
    case QTypeKind::Sum:
    case QTypeKind::Tensor:
        check_type_wf(theta, t->a);
        check_type_wf(theta, t->b);
        return;
    case QTypeKind::Mu: {
        std::set<Ident> ext = theta;
        ext.insert(t->name);
        check_type_wf(ext, t->a);
        return;
    }
    }
}

void check_type_wf(const std::set<Ident>& theta, const CTypePtr& t) {
    switch (t->kind) {
    case CTypeKind::Var:
        if (!theta.count(t->name))
            throw TypeError(ErrKind::IllFormedType, {}, "unbound type variable " + t->name);
        return;
    case CTypeKind::Unit: return;
    case CTypeKind::Sum:
    case CTypeKind::Prod:
    case CTypeKind::Arrow:
        check_type_wf(theta, t->a);
        check_type_wf(theta, t->b);
        return;
    case CTypeKind::QFun:
        // Q(A, B) requires closed quantum components.
        check_type_wf(std::set<Ident>{}, t->qa);
        check_type_wf(std::set<Ident>{}, t->qb);
        return;
    case CTypeKind::Mu: {
        std::set<Ident> ext = theta;
        ext.insert(t->name);
        check_type_wf(ext, t->a);
        return;
    }
    }
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void mismatch(Span sp, const std::string& what, const std::string& expected,
                           const std::string& actual) {
    throw TypeError(ErrKind::Mismatch, sp, what + ": expected " + expected + ", got " + actual,
                    expected, actual);
}

void require_closed_wf(const CTypePtr& t, Span sp) {
    try {
        check_type_wf(std::set<Ident>{}, t);
    } catch (const TypeError& e) {
        throw TypeError(ErrKind::IllFormedType, sp, e.what());
    }
}
void require_closed_wf(const QTypePtr& t, Span sp) {
    try {
        check_type_wf(std::set<Ident>{}, t);
    } catch (const TypeError& e) {
        throw TypeError(ErrKind::IllFormedType, sp, e.what());
    }
}

QTypePtr qbit_power(int n) {
    QTypePtr t = qt_qbit();
    for (int i = 1; i < n; i++) t = qt_tensor(qt_qbit(), t);
    return t;
}

} // namespace

// ---------------------------------------------------------------------------
// Classical judgement
// ---------------------------------------------------------------------------

CTypePtr check_classical(const ClassicalCtx& phi, const CTermPtr& m) {
    switch (m->kind) {
    case CKind::Var: {
        const CTypePtr* t = phi.lookup(m->name);
        if (!t) throw TypeError(ErrKind::Unbound, m->span, "unbound variable " + m->name);
        return *t;
    }
    case CKind::Unit: return ct_unit();
    case CKind::Pair:
        return ct_prod(check_classical(phi, m->a), check_classical(phi, m->b));
    case CKind::Fst:
    case CKind::Snd: {
        CTypePtr t = check_classical(phi, m->a);
        if (t->kind != CTypeKind::Prod)
            mismatch(m->span, "projection", "a product type", print_type(t));
        return m->kind == CKind::Fst ? t->a : t->b;
    }
    case CKind::In1:
    case CKind::In2: {
        require_closed_wf(m->ty, m->span);
        if (m->ty->kind != CTypeKind::Sum)
            throw TypeError(ErrKind::IllFormedType, m->span,
                            "injection annotation must be a sum type, got " + print_type(m->ty));
        CTypePtr t = check_classical(phi, m->a);
        const CTypePtr& want = m->kind == CKind::In1 ? m->ty->a : m->ty->b;
        if (!type_equal(t, want)) mismatch(m->span, "injection", print_type(want), print_type(t));
        return m->ty;
    }
    case CKind::Case: {
        CTypePtr s = check_classical(phi, m->a);
        if (s->kind != CTypeKind::Sum)
            mismatch(m->span, "case scrutinee", "a sum type", print_type(s));
        ClassicalCtx p1 = phi;
        p1.push(m->name, s->a);
        CTypePtr r1 = check_classical(p1, m->b);
        ClassicalCtx p2 = phi;
        p2.push(m->name2, s->b);
        CTypePtr r2 = check_classical(p2, m->c);
        if (!type_equal(r1, r2))
            mismatch(m->span, "case branches", print_type(r1), print_type(r2));
        return r1;
    }
    case CKind::Lam: {
        require_closed_wf(m->ty, m->span);
        ClassicalCtx p = phi;
        p.push(m->name, m->ty);
        return ct_arrow(m->ty, check_classical(p, m->a));
    }
    case CKind::App: {
        CTypePtr f = check_classical(phi, m->a);
        if (f->kind != CTypeKind::Arrow)
            mismatch(m->span, "application head", "a function type", print_type(f));
        CTypePtr arg = check_classical(phi, m->b);
        if (!type_equal(arg, f->a))
            mismatch(m->span, "application argument", print_type(f->a), print_type(arg));
        return f->b;
    }
    case CKind::Fold: {
        require_closed_wf(m->ty, m->span);
        if (m->ty->kind != CTypeKind::Mu)
            throw TypeError(ErrKind::IllFormedType, m->span,
                            "fold annotation must be a mu type, got " + print_type(m->ty));
        CTypePtr unrolled = type_subst(m->ty->a, m->ty->name, m->ty);
        CTypePtr t = check_classical(phi, m->a);
        if (!type_equal(t, unrolled))
            mismatch(m->span, "fold", print_type(unrolled), print_type(t));
        return m->ty;
    }
    case CKind::Unfold: {
        CTypePtr t = check_classical(phi, m->a);
        if (t->kind != CTypeKind::Mu) mismatch(m->span, "unfold", "a mu type", print_type(t));
        return type_subst(t->a, t->name, t);
    }
    case CKind::QLam: {
        if (m->qbinders.empty())
            throw TypeError(ErrKind::ArityMismatch, m->span,
                            "quantum lambda needs at least one binder");
        QuantumCtx gamma;
        for (const auto& b : m->qbinders) {
            require_closed_wf(b.type, m->span);
            gamma.push(b.name, b.type);
        }
        QTypePtr body = check_quantum_complete(phi, gamma, m->qbody);
        QTypePtr dom = m->qbinders.back().type;
        for (std::size_t i = m->qbinders.size() - 1; i-- > 0;)
            dom = qt_tensor(m->qbinders[i].type, dom);
        return ct_qfun(dom, body);
    }
    case CKind::NewConst: return ct_qfun(qt_bit(), qt_qbit());
    case CKind::MeasConst: return ct_qfun(qt_qbit(), qt_bit());
    case CKind::Gate: {
        if (m->gate->arity < 1)
            throw TypeError(ErrKind::ArityMismatch, m->span, "unitary arity must be at least 1");
        QTypePtr t = qbit_power(m->gate->arity);
        return ct_qfun(t, t);
    }
    case CKind::Run: {
        ConfigType ct = check_config(phi, *m->config);
        if (!is_observable(ct.type))
            throw TypeError(ErrKind::NotObservableErr, m->span,
                            "run requires an observable type, got " + print_type(ct.type));
        return obs_translate_type(ct.type);
    }
    }
    throw TypeError(ErrKind::Mismatch, m->span, "unhandled term");
}

// ---------------------------------------------------------------------------
// Quantum judgement
// ---------------------------------------------------------------------------

QTypePtr check_quantum(const ClassicalCtx& phi, QuantumCtx& gamma, const QTermPtr& q) {
    switch (q->kind) {
    case QKind::Var: {
        for (auto it = gamma.entries.rbegin(); it != gamma.entries.rend(); ++it) {
            if (it->name == q->name) {
                if (it->consumed)
                    throw TypeError(ErrKind::NonLinearUse, q->span,
                                    "quantum variable " + q->name + " used more than once");
                it->consumed = true;
                return it->type;
            }
        }
        throw TypeError(ErrKind::Unbound, q->span, "unbound quantum variable " + q->name);
    }
    case QKind::Star: return qt_unit();
    case QKind::Seq: {
        QTypePtr t = check_quantum(phi, gamma, q->a);
        if (t->kind != QTypeKind::Unit)
            mismatch(q->span, "sequencing", "I", print_type(t));
        return check_quantum(phi, gamma, q->b);
    }
    case QKind::Tensor: {
        QTypePtr a = check_quantum(phi, gamma, q->a);
        QTypePtr b = check_quantum(phi, gamma, q->b);
        return qt_tensor(a, b);
    }
    case QKind::LetTensor: {
        QTypePtr t = check_quantum(phi, gamma, q->a);
        if (t->kind != QTypeKind::Tensor)
            mismatch(q->span, "let-tensor", "a tensor type", print_type(t));
        gamma.push(q->name, t->a);
        gamma.push(q->name2, t->b);
        QTypePtr r = check_quantum(phi, gamma, q->b);
        for (int i = 0; i < 2; i++) {
            if (!gamma.entries.back().consumed)
                throw TypeError(ErrKind::UnusedLinear, q->span,
                                "quantum variable " + gamma.entries.back().name + " is unused");
            gamma.entries.pop_back();
        }
        return r;
    }
    case QKind::Fold: {
        require_closed_wf(q->ty, q->span);
        if (q->ty->kind != QTypeKind::Mu)
            throw TypeError(ErrKind::IllFormedType, q->span,
                            "fold annotation must be a mu type, got " + print_type(q->ty));
        QTypePtr unrolled = type_subst(q->ty->a, q->ty->name, q->ty);
        QTypePtr t = check_quantum(phi, gamma, q->a);
        if (!type_equal(t, unrolled))
            mismatch(q->span, "fold", print_type(unrolled), print_type(t));
        return q->ty;
    }
    case QKind::Unfold: {
        QTypePtr t = check_quantum(phi, gamma, q->a);
        if (t->kind != QTypeKind::Mu) mismatch(q->span, "unfold", "a mu type", print_type(t));
        return type_subst(t->a, t->name, t);
    }
    case QKind::In1:
    case QKind::In2: {
        require_closed_wf(q->ty, q->span);
        if (q->ty->kind != QTypeKind::Sum)
            throw TypeError(ErrKind::IllFormedType, q->span,
                            "injection annotation must be a sum type, got " + print_type(q->ty));
        QTypePtr t = check_quantum(phi, gamma, q->a);
        const QTypePtr& want = q->kind == QKind::In1 ? q->ty->a : q->ty->b;
        if (!type_equal(t, want)) mismatch(q->span, "injection", print_type(want), print_type(t));
        return q->ty;
    }
    case QKind::Case: {
        QTypePtr s = check_quantum(phi, gamma, q->a);
        if (s->kind != QTypeKind::Sum)
            mismatch(q->span, "case scrutinee", "a sum type", print_type(s));
        // Both branches must consume the same remainder of gamma.
        std::vector<bool> before = gamma.flags();
        gamma.push(q->name, s->a);
        QTypePtr r1 = check_quantum(phi, gamma, q->b);
        if (!gamma.entries.back().consumed)
            throw TypeError(ErrKind::UnusedLinear, q->span,
                            "quantum variable " + q->name + " is unused in its branch");
        gamma.entries.pop_back();
        std::vector<bool> after1 = gamma.flags();

        gamma.restore_flags(before);
        gamma.push(q->name2, s->b);
        QTypePtr r2 = check_quantum(phi, gamma, q->c);
        if (!gamma.entries.back().consumed)
            throw TypeError(ErrKind::UnusedLinear, q->span,
                            "quantum variable " + q->name2 + " is unused in its branch");
        gamma.entries.pop_back();
        std::vector<bool> after2 = gamma.flags();

        if (after1 != after2) {
            for (std::size_t i = 0; i < after1.size(); i++)
                if (after1[i] != after2[i])
                    throw TypeError(ErrKind::UnusedLinear, q->span,
                                    "quantum variable " + gamma.entries[i].name +
                                        " is consumed in only one case branch");
        }
        if (!type_equal(r1, r2)) mismatch(q->span, "case branches", print_type(r1), print_type(r2));
        return r1;
    }
    case QKind::App: {
        CTypePtr f = check_classical(phi, q->m);
        if (f->kind != CTypeKind::QFun)
            mismatch(q->span, "quantum application head", "a Q(A, B) type", print_type(f));
        QTypePtr arg = check_quantum(phi, gamma, q->a);
        if (!type_equal(arg, f->qa))
            mismatch(q->span, "quantum application argument", print_type(f->qa), print_type(arg));
        return f->qb;
    }
    case QKind::Init: {
        CTypePtr t = check_classical(phi, q->m);
        if (!is_observable(t) || !type_closed(t))
            throw TypeError(ErrKind::NotObservableErr, q->span,
                            "init requires an observable type, got " + print_type(t));
        return obs_inv_type(t);
    }
    case QKind::Lift: {
        QTypePtr t = check_quantum(phi, gamma, q->a);
        if (!is_observable(t) || !type_closed(t))
            throw TypeError(ErrKind::NotObservableErr, q->span,
                            "lift requires an observable type, got " + print_type(t));
        ClassicalCtx p = phi;
        p.push(q->name, obs_translate_type(t));
        return check_quantum(p, gamma, q->b);
    }
    }
    throw TypeError(ErrKind::Mismatch, q->span, "unhandled quantum term");
}

QTypePtr check_quantum_complete(const ClassicalCtx& phi, QuantumCtx& gamma, const QTermPtr& q) {
    QTypePtr t = check_quantum(phi, gamma, q);
    for (const auto& e : gamma.entries)
        if (!e.consumed)
            throw TypeError(ErrKind::UnusedLinear, q->span,
                            "quantum variable " + e.name + " is unused");
    return t;
}

// ---------------------------------------------------------------------------
// Configurations
// ---------------------------------------------------------------------------

ConfigType check_config(const ClassicalCtx& phi, const Configuration& c) {
    std::vector<Ident> vars = free_qvars(c.term);
    const int dim = c.state.num_qubits();

    if (c.link.size() != vars.size())
        throw TypeError(ErrKind::Mismatch, c.term->span,
                        "linking domain does not match the free quantum variables");
    std::set<int> used;
    for (const auto& v : vars) {
        auto it = c.link.find(v);
        if (it == c.link.end())
            throw TypeError(ErrKind::Mismatch, c.term->span, "variable " + v + " is not linked");
        if (it->second < 1 || it->second > dim)
            throw TypeError(ErrKind::Mismatch, c.term->span,
                            "linking index out of range for " + v);
        if (!used.insert(it->second).second)
            throw TypeError(ErrKind::Mismatch, c.term->span, "linking function is not injective");
    }

    QuantumCtx gamma;
    for (const auto& v : vars) gamma.push(v, qt_qbit());
    QTypePtr t = check_quantum_complete(phi, gamma, c.term);
    return ConfigType{t, dim - static_cast<int>(vars.size())};
}

CTypePtr check_closed(const CTermPtr& m) {
    ClassicalCtx phi;
    return check_classical(phi, m);
}
QTypePtr check_closed(const QTermPtr& q) {
    ClassicalCtx phi;
    QuantumCtx gamma;
    return check_quantum_complete(phi, gamma, q);
}

} // namespace vqpl
