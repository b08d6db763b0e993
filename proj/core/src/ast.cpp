#include "vqpl/ast.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace vqpl {

// ---------------------------------------------------------------------------
// Type constructors
// ---------------------------------------------------------------------------

namespace {
QTypePtr mk_q(QTypeKind k, Ident n = {}, QTypePtr a = nullptr, QTypePtr b = nullptr) {
    auto t = std::make_shared<QType>();
    t->kind = k;
    t->name = std::move(n);
    t->a = std::move(a);
    t->b = std::move(b);
    return t;
}
CTypePtr mk_c(CTypeKind k, Ident n = {}, CTypePtr a = nullptr, CTypePtr b = nullptr,
              QTypePtr qa = nullptr, QTypePtr qb = nullptr) {
    auto t = std::make_shared<CType>();
    t->kind = k;
    t->name = std::move(n);
    t->a = std::move(a);
    t->b = std::move(b);
    t->qa = std::move(qa);
    t->qb = std::move(qb);
    return t;
}

std::atomic<unsigned long> g_fresh_counter{0};
Ident fresh_name(const Ident& base) {
    return base + "_" + std::to_string(++g_fresh_counter);
}
} // namespace

QTypePtr qt_var(Ident n) { return mk_q(QTypeKind::Var, std::move(n)); }
QTypePtr qt_unit() {
    static const QTypePtr t = mk_q(QTypeKind::Unit);
    return t;
}
QTypePtr qt_qbit() {
    static const QTypePtr t = mk_q(QTypeKind::Qbit);
    return t;
}
QTypePtr qt_sum(QTypePtr a, QTypePtr b) { return mk_q(QTypeKind::Sum, {}, std::move(a), std::move(b)); }
QTypePtr qt_tensor(QTypePtr a, QTypePtr b) { return mk_q(QTypeKind::Tensor, {}, std::move(a), std::move(b)); }
QTypePtr qt_mu(Ident binder, QTypePtr body) { return mk_q(QTypeKind::Mu, std::move(binder), std::move(body)); }
QTypePtr qt_bit() {
    static const QTypePtr t = qt_sum(qt_unit(), qt_unit());
    return t;
}

CTypePtr ct_var(Ident n) { return mk_c(CTypeKind::Var, std::move(n)); }
CTypePtr ct_unit() {
    static const CTypePtr t = mk_c(CTypeKind::Unit);
    return t;
}
CTypePtr ct_sum(CTypePtr a, CTypePtr b) { return mk_c(CTypeKind::Sum, {}, std::move(a), std::move(b)); }
CTypePtr ct_prod(CTypePtr a, CTypePtr b) { return mk_c(CTypeKind::Prod, {}, std::move(a), std::move(b)); }
CTypePtr ct_arrow(CTypePtr a, CTypePtr b) { return mk_c(CTypeKind::Arrow, {}, std::move(a), std::move(b)); }
CTypePtr ct_qfun(QTypePtr dom, QTypePtr cod) {
    return mk_c(CTypeKind::QFun, {}, nullptr, nullptr, std::move(dom), std::move(cod));
}
CTypePtr ct_mu(Ident binder, CTypePtr body) { return mk_c(CTypeKind::Mu, std::move(binder), std::move(body)); }
CTypePtr ct_bool() {
    static const CTypePtr t = ct_sum(ct_unit(), ct_unit());
    return t;
}

// ---------------------------------------------------------------------------
// Type equality (alpha) and free variables
// ---------------------------------------------------------------------------

namespace {

using Env = std::vector<std::pair<Ident, Ident>>;

int env_index(const Env& e, const Ident& n) {
    for (int i = static_cast<int>(e.size()) - 1; i >= 0; i--)
        if (e[static_cast<std::size_t>(i)].first == n) return i;
    return -1;
}
int env_index2(const Env& e, const Ident& n) {
    for (int i = static_cast<int>(e.size()) - 1; i >= 0; i--)
        if (e[static_cast<std::size_t>(i)].second == n) return i;
    return -1;
}

bool qt_eq(const QTypePtr& x, const QTypePtr& y, Env& env) {
    if (x->kind != y->kind) return false;
    switch (x->kind) {
    case QTypeKind::Var: {
        int i = env_index(env, x->name), j = env_index2(env, y->name);
        return i == j && (i >= 0 || x->name == y->name);
    }
    case QTypeKind::Unit:
    case QTypeKind::Qbit: return true;
    case QTypeKind::Sum:
    case QTypeKind::Tensor: return qt_eq(x->a, y->a, env) && qt_eq(x->b, y->b, env);
    case QTypeKind::Mu: {
        env.emplace_back(x->name, y->name);
        bool r = qt_eq(x->a, y->a, env);
        env.pop_back();
        return r;
    }
    }
    return false;
}

bool ct_eq(const CTypePtr& x, const CTypePtr& y, Env& env) {
    if (x->kind != y->kind) return false;
    switch (x->kind) {
    case CTypeKind::Var: {
        int i = env_index(env, x->name), j = env_index2(env, y->name);
        return i == j && (i >= 0 || x->name == y->name);
    }
    case CTypeKind::Unit: return true;
    case CTypeKind::Sum:
    case CTypeKind::Prod:
    case CTypeKind::Arrow: return ct_eq(x->a, y->a, env) && ct_eq(x->b, y->b, env);
    case CTypeKind::QFun: return type_equal(x->qa, y->qa) && type_equal(x->qb, y->qb);
    case CTypeKind::Mu: {
        env.emplace_back(x->name, y->name);
        bool r = ct_eq(x->a, y->a, env);
        env.pop_back();
        return r;
    }
    }
    return false;
}

void collect_ftv(const QTypePtr& t, std::vector<Ident>& bound, std::set<Ident>& out) {
    switch (t->kind) {
    case QTypeKind::Var:
        for (auto it = bound.rbegin(); it != bound.rend(); ++it)
            if (*it == t->name) return;
        out.insert(t->name);
        return;
    case QTypeKind::Unit:
    case QTypeKind::Qbit: return;
    case QTypeKind::Sum:
    case QTypeKind::Tensor:
        collect_ftv(t->a, bound, out);
        collect_ftv(t->b, bound, out);
        return;
    case QTypeKind::Mu:
        bound.push_back(t->name);
        collect_ftv(t->a, bound, out);
        bound.pop_back();
        return;
    }
}

void collect_ftv(const CTypePtr& t, std::vector<Ident>& bound, std::set<Ident>& out) {
    switch (t->kind) {
    case CTypeKind::Var:
        for (auto it = bound.rbegin(); it != bound.rend(); ++it)
            if (*it == t->name) return;
        out.insert(t->name);
        return;
    case CTypeKind::Unit: return;
    case CTypeKind::Sum:
    case CTypeKind::Prod:
    case CTypeKind::Arrow:
        collect_ftv(t->a, bound, out);
        collect_ftv(t->b, bound, out);
        return;
    case CTypeKind::QFun: {
        // Quantum and classical type variables live in separate contexts;
        // QFun components must be closed, checked by the formation rules.
        std::vector<Ident> b2;
        collect_ftv(t->qa, b2, out);
        collect_ftv(t->qb, b2, out);
        return;
    }
    case CTypeKind::Mu:
        bound.push_back(t->name);
        collect_ftv(t->a, bound, out);
        bound.pop_back();
        return;
    }
}

} // namespace

bool type_equal(const QTypePtr& x, const QTypePtr& y) {
    Env e;
    return qt_eq(x, y, e);
}
bool type_equal(const CTypePtr& x, const CTypePtr& y) {
    Env e;
    return ct_eq(x, y, e);
}

std::set<Ident> free_tvars(const QTypePtr& t) {
    std::set<Ident> out;
    std::vector<Ident> bound;
    collect_ftv(t, bound, out);
    return out;
}
std::set<Ident> free_tvars(const CTypePtr& t) {
    std::set<Ident> out;
    std::vector<Ident> bound;
    collect_ftv(t, bound, out);
    return out;
}
bool type_closed(const QTypePtr& t) { return free_tvars(t).empty(); }
bool type_closed(const CTypePtr& t) { return free_tvars(t).empty(); }

// ---------------------------------------------------------------------------
// Type substitution
// ---------------------------------------------------------------------------

QTypePtr type_subst(const QTypePtr& body, const Ident& var, const QTypePtr& arg) {
    switch (body->kind) {
    case QTypeKind::Var: return body->name == var ? arg : body;
    case QTypeKind::Unit:
    case QTypeKind::Qbit: return body;
    case QTypeKind::Sum: return qt_sum(type_subst(body->a, var, arg), type_subst(body->b, var, arg));
    case QTypeKind::Tensor:
        return qt_tensor(type_subst(body->a, var, arg), type_subst(body->b, var, arg));
    case QTypeKind::Mu: {
        if (body->name == var) return body;
        if (free_tvars(arg).count(body->name)) {
            Ident f = fresh_name(body->name);
            QTypePtr renamed = type_subst(body->a, body->name, qt_var(f));
            return qt_mu(f, type_subst(renamed, var, arg));
        }
        return qt_mu(body->name, type_subst(body->a, var, arg));
    }
    }
    return body;
}

CTypePtr type_subst(const CTypePtr& body, const Ident& var, const CTypePtr& arg) {
    switch (body->kind) {
    case CTypeKind::Var: return body->name == var ? arg : body;
    case CTypeKind::Unit:
    case CTypeKind::QFun: return body; // QFun components are closed
    case CTypeKind::Sum: return ct_sum(type_subst(body->a, var, arg), type_subst(body->b, var, arg));
    case CTypeKind::Prod:
        return ct_prod(type_subst(body->a, var, arg), type_subst(body->b, var, arg));
    case CTypeKind::Arrow:
        return ct_arrow(type_subst(body->a, var, arg), type_subst(body->b, var, arg));
    case CTypeKind::Mu: {
        if (body->name == var) return body;
        if (free_tvars(arg).count(body->name)) {
            Ident f = fresh_name(body->name);
            CTypePtr renamed = type_subst(body->a, body->name, ct_var(f));
            return ct_mu(f, type_subst(renamed, var, arg));
        }
        return ct_mu(body->name, type_subst(body->a, var, arg));
    }
    }
    return body;
}

// ---------------------------------------------------------------------------
// Observability and the |-| translation on types
// ---------------------------------------------------------------------------

bool is_observable(const QTypePtr& t) {
    switch (t->kind) {
    case QTypeKind::Qbit: return false;
    case QTypeKind::Var:
    case QTypeKind::Unit: return true;
    case QTypeKind::Sum:
    case QTypeKind::Tensor: return is_observable(t->a) && is_observable(t->b);
    case QTypeKind::Mu: return is_observable(t->a);
    }
    return false;
}

bool is_observable(const CTypePtr& t) {
    switch (t->kind) {
    case CTypeKind::Arrow:
    case CTypeKind::QFun: return false;
    case CTypeKind::Var:
    case CTypeKind::Unit: return true;
    case CTypeKind::Sum:
    case CTypeKind::Prod: return is_observable(t->a) && is_observable(t->b);
    case CTypeKind::Mu: return is_observable(t->a);
    }
    return false;
}

static CTypePtr obs_tr(const QTypePtr& t) {
    switch (t->kind) {
    case QTypeKind::Var: return ct_var(t->name);
    case QTypeKind::Unit: return ct_unit();
    case QTypeKind::Sum: return ct_sum(obs_tr(t->a), obs_tr(t->b));
    case QTypeKind::Tensor: return ct_prod(obs_tr(t->a), obs_tr(t->b));
    case QTypeKind::Mu: return ct_mu(t->name, obs_tr(t->a));
    case QTypeKind::Qbit: throw NotObservable("qbit is not observable");
    }
    throw NotObservable("bad type");
}

CTypePtr obs_translate_type(const QTypePtr& t) {
    if (!type_closed(t)) throw NotObservable("type must be closed: " + print_type(t));
    if (!is_observable(t)) throw NotObservable("type is not observable: " + print_type(t));
    return obs_tr(t);
}

static QTypePtr obs_inv(const CTypePtr& t) {
    switch (t->kind) {
    case CTypeKind::Var: return qt_var(t->name);
    case CTypeKind::Unit: return qt_unit();
    case CTypeKind::Sum: return qt_sum(obs_inv(t->a), obs_inv(t->b));
    case CTypeKind::Prod: return qt_tensor(obs_inv(t->a), obs_inv(t->b));
    case CTypeKind::Mu: return qt_mu(t->name, obs_inv(t->a));
    default: throw NotObservable("function types are not observable");
    }
}

QTypePtr obs_inv_type(const CTypePtr& t) {
    if (!type_closed(t)) throw NotObservable("type must be closed: " + print_type(t));
    if (!is_observable(t)) throw NotObservable("type is not observable: " + print_type(t));
    return obs_inv(t);
}

// ---------------------------------------------------------------------------
// Type printing
// ---------------------------------------------------------------------------

namespace {

// Quantum precedence: 0 mu, 1 (+), 2 (x), 3 atom.
void print_qt(const QTypePtr& t, int level, std::string& out) {
    switch (t->kind) {
    case QTypeKind::Var: out += t->name; return;
    case QTypeKind::Unit: out += "I"; return;
    case QTypeKind::Qbit: out += "qbit"; return;
    case QTypeKind::Sum:
        if (level > 1) out += "(";
        print_qt(t->a, 2, out);
        out += " (+) ";
        print_qt(t->b, 1, out);
        if (level > 1) out += ")";
        return;
    case QTypeKind::Tensor:
        if (level > 2) out += "(";
        print_qt(t->a, 3, out);
        out += " (x) ";
        print_qt(t->b, 2, out);
        if (level > 2) out += ")";
        return;
    case QTypeKind::Mu:
        if (level > 0) out += "(";
        out += "mu " + t->name + ". ";
        print_qt(t->a, 0, out);
        if (level > 0) out += ")";
        return;
    }
}

// Classical precedence: 0 mu/arrow, 1 +, 2 *, 3 atom.
void print_ct(const CTypePtr& t, int level, std::string& out) {
    switch (t->kind) {
    case CTypeKind::Var: out += t->name; return;
    case CTypeKind::Unit: out += "1"; return;
    case CTypeKind::Arrow:
        if (level > 0) out += "(";
        print_ct(t->a, 1, out);
        out += " -> ";
        print_ct(t->b, 0, out);
        if (level > 0) out += ")";
        return;
    case CTypeKind::Sum:
        if (level > 1) out += "(";
        print_ct(t->a, 2, out);
        out += " + ";
        print_ct(t->b, 1, out);
        if (level > 1) out += ")";
        return;
    case CTypeKind::Prod:
        if (level > 2) out += "(";
        print_ct(t->a, 3, out);
        out += " * ";
        print_ct(t->b, 2, out);
        if (level > 2) out += ")";
        return;
    case CTypeKind::QFun:
        out += "Q(";
        print_qt(t->qa, 0, out);
        out += ", ";
        print_qt(t->qb, 0, out);
        out += ")";
        return;
    case CTypeKind::Mu:
        if (level > 0) out += "(";
        out += "mu " + t->name + ". ";
        print_ct(t->a, 0, out);
        if (level > 0) out += ")";
        return;
    }
}

} // namespace

std::string print_type(const QTypePtr& t) {
    std::string s;
    print_qt(t, 0, s);
    return s;
}
std::string print_type(const CTypePtr& t) {
    std::string s;
    print_ct(t, 0, s);
    return s;
}

// ---------------------------------------------------------------------------
// Term constructors
// ---------------------------------------------------------------------------

namespace {
std::shared_ptr<CTerm> mk_cterm(CKind k) {
    auto t = std::make_shared<CTerm>();
    t->kind = k;
    return t;
}
std::shared_ptr<QTerm> mk_qterm(QKind k) {
    auto t = std::make_shared<QTerm>();
    t->kind = k;
    return t;
}
} // namespace

CTermPtr cvar(Ident n) {
    auto t = mk_cterm(CKind::Var);
    t->name = std::move(n);
    return t;
}
CTermPtr cunit() { return mk_cterm(CKind::Unit); }
CTermPtr cpair(CTermPtr a, CTermPtr b) {
    auto t = mk_cterm(CKind::Pair);
    t->a = std::move(a);
    t->b = std::move(b);
    return t;
}
CTermPtr cfst(CTermPtr a) {
    auto t = mk_cterm(CKind::Fst);
    t->a = std::move(a);
    return t;
}
CTermPtr csnd(CTermPtr a) {
    auto t = mk_cterm(CKind::Snd);
    t->a = std::move(a);
    return t;
}
CTermPtr cin1(CTypePtr sum, CTermPtr a) {
    auto t = mk_cterm(CKind::In1);
    t->ty = std::move(sum);
    t->a = std::move(a);
    return t;
}
CTermPtr cin2(CTypePtr sum, CTermPtr a) {
    auto t = mk_cterm(CKind::In2);
    t->ty = std::move(sum);
    t->a = std::move(a);
    return t;
}
CTermPtr ccase(CTermPtr s, Ident x, CTermPtr n1, Ident y, CTermPtr n2) {
    auto t = mk_cterm(CKind::Case);
    t->a = std::move(s);
    t->name = std::move(x);
    t->b = std::move(n1);
    t->name2 = std::move(y);
    t->c = std::move(n2);
    return t;
}
CTermPtr clam(Ident x, CTypePtr ty, CTermPtr body) {
    auto t = mk_cterm(CKind::Lam);
    t->name = std::move(x);
    t->ty = std::move(ty);
    t->a = std::move(body);
    return t;
}
CTermPtr capp(CTermPtr f, CTermPtr arg) {
    auto t = mk_cterm(CKind::App);
    t->a = std::move(f);
    t->b = std::move(arg);
    return t;
}
CTermPtr cfold(CTypePtr mu, CTermPtr a) {
    auto t = mk_cterm(CKind::Fold);
    t->ty = std::move(mu);
    t->a = std::move(a);
    return t;
}
CTermPtr cunfold(CTermPtr a) {
    auto t = mk_cterm(CKind::Unfold);
    t->a = std::move(a);
    return t;
}
CTermPtr cqlam(std::vector<QBinder> binders, QTermPtr body) {
    auto t = mk_cterm(CKind::QLam);
    t->qbinders = std::move(binders);
    t->qbody = std::move(body);
    return t;
}
CTermPtr cnew() { return mk_cterm(CKind::NewConst); }
CTermPtr cmeas() { return mk_cterm(CKind::MeasConst); }
CTermPtr cgate(GateSpec g) {
    auto t = mk_cterm(CKind::Gate);
    t->gate = std::make_shared<GateSpec>(std::move(g));
    return t;
}
CTermPtr crun(Configuration c) {
    auto t = mk_cterm(CKind::Run);
    t->config = std::make_shared<Configuration>(std::move(c));
    return t;
}
CTermPtr crun(QTermPtr q) { return crun(Configuration{StateVector{}, {}, std::move(q)}); }

QTermPtr qvar(Ident n) {
    auto t = mk_qterm(QKind::Var);
    t->name = std::move(n);
    return t;
}
QTermPtr qstar() { return mk_qterm(QKind::Star); }
QTermPtr qseq(QTermPtr a, QTermPtr b) {
    auto t = mk_qterm(QKind::Seq);
    t->a = std::move(a);
    t->b = std::move(b);
    return t;
}
QTermPtr qtensor(QTermPtr a, QTermPtr b) {
    auto t = mk_qterm(QKind::Tensor);
    t->a = std::move(a);
    t->b = std::move(b);
    return t;
}
QTermPtr qlet_tensor(Ident x, Ident y, QTermPtr q, QTermPtr r) {
    auto t = mk_qterm(QKind::LetTensor);
    t->name = std::move(x);
    t->name2 = std::move(y);
    t->a = std::move(q);
    t->b = std::move(r);
    return t;
}
QTermPtr qfold(QTypePtr mu, QTermPtr a) {
    auto t = mk_qterm(QKind::Fold);
    t->ty = std::move(mu);
    t->a = std::move(a);
    return t;
}
QTermPtr qunfold(QTermPtr a) {
    auto t = mk_qterm(QKind::Unfold);
    t->a = std::move(a);
    return t;
}
QTermPtr qin1(QTypePtr sum, QTermPtr a) {
    auto t = mk_qterm(QKind::In1);
    t->ty = std::move(sum);
    t->a = std::move(a);
    return t;
}
QTermPtr qin2(QTypePtr sum, QTermPtr a) {
    auto t = mk_qterm(QKind::In2);
    t->ty = std::move(sum);
    t->a = std::move(a);
    return t;
}
QTermPtr qcase(QTermPtr s, Ident x, QTermPtr r1, Ident y, QTermPtr r2) {
    auto t = mk_qterm(QKind::Case);
    t->a = std::move(s);
    t->name = std::move(x);
    t->b = std::move(r1);
    t->name2 = std::move(y);
    t->c = std::move(r2);
    return t;
}
QTermPtr qapp(CTermPtr m, QTermPtr q) {
    auto t = mk_qterm(QKind::App);
    t->m = std::move(m);
    t->a = std::move(q);
    return t;
}
QTermPtr qinit(CTermPtr m) {
    auto t = mk_qterm(QKind::Init);
    t->m = std::move(m);
    return t;
}
QTermPtr qlift(Ident x, QTermPtr q, QTermPtr r) {
    auto t = mk_qterm(QKind::Lift);
    t->name = std::move(x);
    t->a = std::move(q);
    t->b = std::move(r);
    return t;
}

CTermPtr c_ff() { return cin1(ct_bool(), cunit()); }
CTermPtr c_tt() { return cin2(ct_bool(), cunit()); }
QTermPtr q_ff() { return qin1(qt_bit(), qstar()); }
QTermPtr q_tt() { return qin2(qt_bit(), qstar()); }

// ---------------------------------------------------------------------------
// Value predicates
// ---------------------------------------------------------------------------

bool is_value(const CTermPtr& m) {
    switch (m->kind) {
    case CKind::Var:
    case CKind::Unit:
    case CKind::Lam:
    case CKind::QLam:
    case CKind::NewConst:
    case CKind::MeasConst:
    case CKind::Gate: return true;
    case CKind::Pair: return is_value(m->a) && is_value(m->b);
    case CKind::In1:
    case CKind::In2:
    case CKind::Fold: return is_value(m->a);
    default: return false;
    }
}

bool is_qvalue(const QTermPtr& q) {
    switch (q->kind) {
    case QKind::Var:
    case QKind::Star: return true;
    case QKind::Tensor: return is_qvalue(q->a) && is_qvalue(q->b);
    case QKind::In1:
    case QKind::In2:
    case QKind::Fold: return is_qvalue(q->a);
    default: return false;
    }
}

// ---------------------------------------------------------------------------
// Free variables
// ---------------------------------------------------------------------------

namespace {

void qfv(const QTermPtr& q, std::vector<Ident>& bound, std::vector<Ident>& out) {
    switch (q->kind) {
    case QKind::Var: {
        for (auto it = bound.rbegin(); it != bound.rend(); ++it)
            if (*it == q->name) return;
        for (const auto& n : out)
            if (n == q->name) return;
        out.push_back(q->name);
        return;
    }
    case QKind::Star: return;
    case QKind::Seq:
    case QKind::Tensor:
        qfv(q->a, bound, out);
        qfv(q->b, bound, out);
        return;
    case QKind::LetTensor:
        qfv(q->a, bound, out);
        bound.push_back(q->name);
        bound.push_back(q->name2);
        qfv(q->b, bound, out);
        bound.pop_back();
        bound.pop_back();
        return;
    case QKind::Fold:
    case QKind::Unfold:
    case QKind::In1:
    case QKind::In2: qfv(q->a, bound, out); return;
    case QKind::Case:
        qfv(q->a, bound, out);
        bound.push_back(q->name);
        qfv(q->b, bound, out);
        bound.pop_back();
        bound.push_back(q->name2);
        qfv(q->c, bound, out);
        bound.pop_back();
        return;
    case QKind::App: qfv(q->a, bound, out); return; // classical head has no qvars free here
    case QKind::Init: return;
    case QKind::Lift:
        qfv(q->a, bound, out);
        qfv(q->b, bound, out); // lift binds a *classical* variable
        return;
    }
}

void cfv_c(const CTermPtr& m, std::vector<Ident>& bound, std::set<Ident>& out);
void cfv_q(const QTermPtr& q, std::vector<Ident>& bound, std::set<Ident>& out);

void cfv_c(const CTermPtr& m, std::vector<Ident>& bound, std::set<Ident>& out) {
    switch (m->kind) {
    case CKind::Var: {
        for (auto it = bound.rbegin(); it != bound.rend(); ++it)
            if (*it == m->name) return;
        out.insert(m->name);
        return;
    }
    case CKind::Unit:
    case CKind::NewConst:
    case CKind::MeasConst:
    case CKind::Gate: return;
    case CKind::Pair:
    case CKind::App:
        cfv_c(m->a, bound, out);
        cfv_c(m->b, bound, out);
        return;
    case CKind::Fst:
    case CKind::Snd:
    case CKind::In1:
    case CKind::In2:
    case CKind::Fold:
    case CKind::Unfold: cfv_c(m->a, bound, out); return;
    case CKind::Case:
        cfv_c(m->a, bound, out);
        bound.push_back(m->name);
        cfv_c(m->b, bound, out);
        bound.pop_back();
        bound.push_back(m->name2);
        cfv_c(m->c, bound, out);
        bound.pop_back();
        return;
    case CKind::Lam:
        bound.push_back(m->name);
        cfv_c(m->a, bound, out);
        bound.pop_back();
        return;
    case CKind::QLam: cfv_q(m->qbody, bound, out); return;
    case CKind::Run: cfv_q(m->config->term, bound, out); return;
    }
}

void cfv_q(const QTermPtr& q, std::vector<Ident>& bound, std::set<Ident>& out) {
    switch (q->kind) {
    case QKind::Var:
    case QKind::Star: return;
    case QKind::Seq:
    case QKind::Tensor:
    case QKind::LetTensor:
        cfv_q(q->a, bound, out);
        cfv_q(q->b, bound, out);
        return;
    case QKind::Fold:
    case QKind::Unfold:
    case QKind::In1:
    case QKind::In2: cfv_q(q->a, bound, out); return;
    case QKind::Case:
        cfv_q(q->a, bound, out);
        cfv_q(q->b, bound, out);
        cfv_q(q->c, bound, out);
        return;
    case QKind::App:
        cfv_c(q->m, bound, out);
        cfv_q(q->a, bound, out);
        return;
    case QKind::Init: cfv_c(q->m, bound, out); return;
    case QKind::Lift:
        cfv_q(q->a, bound, out);
        bound.push_back(q->name);
        cfv_q(q->b, bound, out);
        bound.pop_back();
        return;
    }
}

} // namespace

std::vector<Ident> free_qvars(const QTermPtr& q) {
    std::vector<Ident> bound, out;
    qfv(q, bound, out);
    return out;
}

std::set<Ident> free_cvars(const CTermPtr& m) {
    std::vector<Ident> bound;
    std::set<Ident> out;
    cfv_c(m, bound, out);
    return out;
}
std::set<Ident> free_cvars(const QTermPtr& q) {
    std::vector<Ident> bound;
    std::set<Ident> out;
    cfv_q(q, bound, out);
    return out;
}

// ---------------------------------------------------------------------------
// Substitution
// ---------------------------------------------------------------------------

namespace {

struct CSubst {
    const Ident& x;
    const CTermPtr& v;
    std::set<Ident> fv; // classical free vars of v

    CTermPtr on_c(const CTermPtr& m);
    QTermPtr on_q(const QTermPtr& q);

    // Renames binder b in `body` if it would capture a free var of v.
    template <typename TermPtr, typename SubVar>
    std::pair<Ident, TermPtr> avoid(const Ident& b, const TermPtr& body, SubVar mkvar);
};

template <typename TermPtr, typename SubVar>
std::pair<Ident, TermPtr> CSubst::avoid(const Ident& b, const TermPtr& body, SubVar mkvar) {
    if (!fv.count(b)) return {b, body};
    Ident f = fresh_name(b);
    if constexpr (std::is_same_v<TermPtr, CTermPtr>) {
        CTermPtr renamed = subst_cvar(body, b, mkvar(f));
        return {f, renamed};
    } else {
        QTermPtr renamed = subst_cvar(body, b, mkvar(f));
        return {f, renamed};
    }
}

CTermPtr CSubst::on_c(const CTermPtr& m) {
    switch (m->kind) {
    case CKind::Var: return m->name == x ? v : m;
    case CKind::Unit:
    case CKind::NewConst:
    case CKind::MeasConst:
    case CKind::Gate: return m;
    case CKind::Pair: return cpair(on_c(m->a), on_c(m->b));
    case CKind::Fst: return cfst(on_c(m->a));
    case CKind::Snd: return csnd(on_c(m->a));
    case CKind::In1: return cin1(m->ty, on_c(m->a));
    case CKind::In2: return cin2(m->ty, on_c(m->a));
    case CKind::Fold: return cfold(m->ty, on_c(m->a));
    case CKind::Unfold: return cunfold(on_c(m->a));
    case CKind::App: return capp(on_c(m->a), on_c(m->b));
    case CKind::Lam: {
        if (m->name == x) return m;
        auto [b, body] = avoid(m->name, m->a, [](const Ident& f) { return cvar(f); });
        return clam(b, m->ty, on_c(body));
    }
    case CKind::Case: {
        CTermPtr s = on_c(m->a);
        CTermPtr n1 = m->b, n2 = m->c;
        Ident b1 = m->name, b2 = m->name2;
        if (b1 != x) {
            auto [bb, body] = avoid(b1, n1, [](const Ident& f) { return cvar(f); });
            b1 = bb;
            n1 = on_c(body);
        }
        if (b2 != x) {
            auto [bb, body] = avoid(b2, n2, [](const Ident& f) { return cvar(f); });
            b2 = bb;
            n2 = on_c(body);
        }
        return ccase(s, b1, n1, b2, n2);
    }
    case CKind::QLam: return cqlam(m->qbinders, on_q(m->qbody));
    case CKind::Run: {
        Configuration c{m->config->state, m->config->link, on_q(m->config->term)};
        return crun(std::move(c));
    }
    }
    return m;
}

QTermPtr CSubst::on_q(const QTermPtr& q) {
    switch (q->kind) {
    case QKind::Var:
    case QKind::Star: return q;
    case QKind::Seq: return qseq(on_q(q->a), on_q(q->b));
    case QKind::Tensor: return qtensor(on_q(q->a), on_q(q->b));
    case QKind::LetTensor: return qlet_tensor(q->name, q->name2, on_q(q->a), on_q(q->b));
    case QKind::Fold: return qfold(q->ty, on_q(q->a));
    case QKind::Unfold: return qunfold(on_q(q->a));
    case QKind::In1: return qin1(q->ty, on_q(q->a));
    case QKind::In2: return qin2(q->ty, on_q(q->a));
    case QKind::Case: return qcase(on_q(q->a), q->name, on_q(q->b), q->name2, on_q(q->c));
    case QKind::App: return qapp(on_c(q->m), on_q(q->a));
    case QKind::Init: return qinit(on_c(q->m));
    case QKind::Lift: {
        QTermPtr src = on_q(q->a);
        if (q->name == x) return qlift(q->name, src, q->b);
        auto [b, body] = avoid(q->name, q->b, [](const Ident& f) { return cvar(f); });
        return qlift(b, src, on_q(body));
    }
    }
    return q;
}

} // namespace

CTermPtr subst_cvar(const CTermPtr& m, const Ident& x, const CTermPtr& v) {
    CSubst s{x, v, free_cvars(v)};
    return s.on_c(m);
}
QTermPtr subst_cvar(const QTermPtr& q, const Ident& x, const CTermPtr& v) {
    CSubst s{x, v, free_cvars(v)};
    return s.on_q(q);
}

QTermPtr subst_qvar(const QTermPtr& q, const Ident& x, const QTermPtr& w) {
    switch (q->kind) {
    case QKind::Var: return q->name == x ? w : q;
    case QKind::Star: return q;
    case QKind::Seq: return qseq(subst_qvar(q->a, x, w), subst_qvar(q->b, x, w));
    case QKind::Tensor: return qtensor(subst_qvar(q->a, x, w), subst_qvar(q->b, x, w));
    case QKind::LetTensor: {
        QTermPtr src = subst_qvar(q->a, x, w);
        if (q->name == x || q->name2 == x) return qlet_tensor(q->name, q->name2, src, q->b);
        return qlet_tensor(q->name, q->name2, src, subst_qvar(q->b, x, w));
    }
    case QKind::Fold: return qfold(q->ty, subst_qvar(q->a, x, w));
    case QKind::Unfold: return qunfold(subst_qvar(q->a, x, w));
    case QKind::In1: return qin1(q->ty, subst_qvar(q->a, x, w));
    case QKind::In2: return qin2(q->ty, subst_qvar(q->a, x, w));
    case QKind::Case: {
        QTermPtr s = subst_qvar(q->a, x, w);
        QTermPtr r1 = q->name == x ? q->b : subst_qvar(q->b, x, w);
        QTermPtr r2 = q->name2 == x ? q->c : subst_qvar(q->c, x, w);
        return qcase(s, q->name, r1, q->name2, r2);
    }
    case QKind::App: return qapp(q->m, subst_qvar(q->a, x, w));
    case QKind::Init: return q;
    case QKind::Lift: return qlift(q->name, subst_qvar(q->a, x, w), subst_qvar(q->b, x, w));
    }
    return q;
}

// ---------------------------------------------------------------------------
// Observable value translation
// ---------------------------------------------------------------------------

CTermPtr obs_translate_value(const QTermPtr& v) {
    switch (v->kind) {
    case QKind::Star: return cunit();
    case QKind::Tensor: return cpair(obs_translate_value(v->a), obs_translate_value(v->b));
    case QKind::In1: return cin1(obs_translate_type(v->ty), obs_translate_value(v->a));
    case QKind::In2: return cin2(obs_translate_type(v->ty), obs_translate_value(v->a));
    case QKind::Fold: return cfold(obs_translate_type(v->ty), obs_translate_value(v->a));
    default: throw NotObservable("value is not observable: " + print_term(v));
    }
}

QTermPtr obs_inv_value(const CTermPtr& v) {
    switch (v->kind) {
    case CKind::Unit: return qstar();
    case CKind::Pair: return qtensor(obs_inv_value(v->a), obs_inv_value(v->b));
    case CKind::In1: return qin1(obs_inv_type(v->ty), obs_inv_value(v->a));
    case CKind::In2: return qin2(obs_inv_type(v->ty), obs_inv_value(v->a));
    case CKind::Fold: return qfold(obs_inv_type(v->ty), obs_inv_value(v->a));
    default: throw NotObservable("value is not observable: " + print_term(v));
    }
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace {

// When debruijn is set, bound occurrences print as $k (classical) / @k
// (quantum) counting binders inward, and binder names are dropped, so
// alpha-variants print identically.
struct Printer {
    bool debruijn = false;
    std::vector<Ident> cbound, qbound;

    std::string cref(const Ident& n) {
        if (debruijn) {
            for (int i = static_cast<int>(cbound.size()) - 1; i >= 0; i--)
                if (cbound[static_cast<std::size_t>(i)] == n)
                    return "$" + std::to_string(cbound.size() - 1 - static_cast<std::size_t>(i));
        }
        return n;
    }
    std::string qref(const Ident& n) {
        if (debruijn) {
            for (int i = static_cast<int>(qbound.size()) - 1; i >= 0; i--)
                if (qbound[static_cast<std::size_t>(i)] == n)
                    return "@" + std::to_string(qbound.size() - 1 - static_cast<std::size_t>(i));
        }
        return n;
    }
    std::string cbind(const Ident& n) { return debruijn ? "_" : n; }

    // Classical precedence: 0 binder forms, 1 application, 2 atoms.
    void pc(const CTermPtr& m, int level, std::string& out) {
        switch (m->kind) {
        case CKind::Var: out += cref(m->name); return;
        case CKind::Unit: out += "()"; return;
        case CKind::NewConst: out += "new"; return;
        case CKind::MeasConst: out += "meas"; return;
        case CKind::Gate: out += m->gate->label(); return;
        case CKind::Pair:
            out += "(";
            pc(m->a, 0, out);
            out += ", ";
            pc(m->b, 0, out);
            out += ")";
            return;
        case CKind::Fst:
            if (level > 1) out += "(";
            out += "fst ";
            pc(m->a, 2, out);
            if (level > 1) out += ")";
            return;
        case CKind::Snd:
            if (level > 1) out += "(";
            out += "snd ";
            pc(m->a, 2, out);
            if (level > 1) out += ")";
            return;
        case CKind::In1:
        case CKind::In2:
            if (level > 1) out += "(";
            out += m->kind == CKind::In1 ? "inl[" : "inr[";
            out += print_type(m->ty);
            out += "] ";
            pc(m->a, 2, out);
            if (level > 1) out += ")";
            return;
        case CKind::Fold:
            if (level > 1) out += "(";
            out += "fold[" + print_type(m->ty) + "] ";
            pc(m->a, 2, out);
            if (level > 1) out += ")";
            return;
        case CKind::Unfold:
            if (level > 1) out += "(";
            out += "unfold ";
            pc(m->a, 2, out);
            if (level > 1) out += ")";
            return;
        case CKind::App:
            if (level > 1) out += "(";
            pc(m->a, 1, out);
            out += " ";
            pc(m->b, 2, out);
            if (level > 1) out += ")";
            return;
        case CKind::Lam: {
            if (level > 0) out += "(";
            out += "fun (" + cbind(m->name) + " : " + print_type(m->ty) + ") . ";
            cbound.push_back(m->name);
            pc(m->a, 0, out);
            cbound.pop_back();
            if (level > 0) out += ")";
            return;
        }
        case CKind::Case: {
            if (level > 0) out += "(";
            out += "case ";
            pc(m->a, 1, out);
            out += " of inl " + cbind(m->name) + " => ";
            cbound.push_back(m->name);
            pc(m->b, 0, out);
            cbound.pop_back();
            out += " | inr " + cbind(m->name2) + " => ";
            cbound.push_back(m->name2);
            pc(m->c, 0, out);
            cbound.pop_back();
            if (level > 0) out += ")";
            return;
        }
        case CKind::QLam: {
            if (level > 0) out += "(";
            out += "qfun (";
            for (std::size_t i = 0; i < m->qbinders.size(); i++) {
                if (i) out += ", ";
                out += cbind(m->qbinders[i].name) + " : " + print_type(m->qbinders[i].type);
            }
            out += ") . ";
            for (const auto& b : m->qbinders) qbound.push_back(b.name);
            pq(m->qbody, 0, out);
            for (std::size_t i = 0; i < m->qbinders.size(); i++) qbound.pop_back();
            if (level > 0) out += ")";
            return;
        }
        case CKind::Run: {
            if (level > 1) out += "(";
            const Configuration& c = *m->config;
            if (c.state.num_qubits() == 0 && c.link.empty()) {
                out += "run ";
                pq(c.term, 4, out);
            } else {
                // General configurations are internal; this form is canonical
                // but not part of the surface grammar.
                out += "run [" + config_state_key(c) + "; l={";
                bool first = true;
                for (const auto& [v, i] : c.link) {
                    if (!first) out += ",";
                    first = false;
                    out += qref(v) + ":" + std::to_string(i);
                }
                out += "}; ";
                pq(c.term, 0, out);
                out += "]";
            }
            if (level > 1) out += ")";
            return;
        }
        }
    }

    // Quantum precedence: 0 binder forms, 1 seq, 2 tensor, 3 application, 4 atoms.
    void pq(const QTermPtr& q, int level, std::string& out) {
        switch (q->kind) {
        case QKind::Var: out += qref(q->name); return;
        case QKind::Star: out += "*"; return;
        case QKind::Seq:
            if (level > 1) out += "(";
            pq(q->a, 2, out);
            out += " ; ";
            pq(q->b, 1, out);
            if (level > 1) out += ")";
            return;
        case QKind::Tensor:
            if (level > 2) out += "(";
            pq(q->a, 3, out);
            out += " (x) ";
            pq(q->b, 2, out);
            if (level > 2) out += ")";
            return;
        case QKind::LetTensor: {
            if (level > 0) out += "(";
            out += "let " + cbind(q->name) + " (x) " + cbind(q->name2) + " = ";
            pq(q->a, 1, out);
            out += " in ";
            qbound.push_back(q->name);
            qbound.push_back(q->name2);
            pq(q->b, 0, out);
            qbound.pop_back();
            qbound.pop_back();
            if (level > 0) out += ")";
            return;
        }
        case QKind::Fold:
            if (level > 3) out += "(";
            out += "fold[" + print_type(q->ty) + "] ";
            pq(q->a, 4, out);
            if (level > 3) out += ")";
            return;
        case QKind::Unfold:
            if (level > 3) out += "(";
            out += "unfold ";
            pq(q->a, 4, out);
            if (level > 3) out += ")";
            return;
        case QKind::In1:
        case QKind::In2:
            if (level > 3) out += "(";
            out += q->kind == QKind::In1 ? "inl[" : "inr[";
            out += print_type(q->ty);
            out += "] ";
            pq(q->a, 4, out);
            if (level > 3) out += ")";
            return;
        case QKind::Case: {
            if (level > 0) out += "(";
            out += "case ";
            pq(q->a, 1, out);
            out += " of inl " + cbind(q->name) + " => ";
            qbound.push_back(q->name);
            pq(q->b, 0, out);
            qbound.pop_back();
            out += " | inr " + cbind(q->name2) + " => ";
            qbound.push_back(q->name2);
            pq(q->c, 0, out);
            qbound.pop_back();
            if (level > 0) out += ")";
            return;
        }
        case QKind::App:
            if (level > 3) out += "(";
            pc(q->m, 2, out);
            out += " ";
            pq(q->a, 4, out);
            if (level > 3) out += ")";
            return;
        case QKind::Init:
            if (level > 3) out += "(";
            out += "init ";
            pc(q->m, 2, out);
            if (level > 3) out += ")";
            return;
        case QKind::Lift: {
            if (level > 0) out += "(";
            out += "let " + cbind(q->name) + " = lift ";
            pq(q->a, 2, out);
            out += " in ";
            cbound.push_back(q->name);
            pq(q->b, 0, out);
            cbound.pop_back();
            if (level > 0) out += ")";
            return;
        }
        }
    }

    static std::string config_state_key(const Configuration& c);
};

std::string round12(double x) {
    double r = std::round(x * 1e12) / 1e12;
    if (r == 0.0) r = 0.0; // normalise -0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", r);
    return buf;
}

std::string Printer::config_state_key(const Configuration& c) {
    std::string s = "n=" + std::to_string(c.state.num_qubits()) + "; ";
    for (std::size_t i = 0; i < c.state.dim(); i++) {
        if (i) s += ",";
        s += round12(c.state.amp(i).real()) + "+" + round12(c.state.amp(i).imag()) + "i";
    }
    return s;
}

} // namespace

std::string print_term(const CTermPtr& m) {
    Printer p;
    std::string s;
    p.pc(m, 0, s);
    return s;
}
std::string print_term(const QTermPtr& q) {
    Printer p;
    std::string s;
    p.pq(q, 0, s);
    return s;
}

std::string canonical_key(const CTermPtr& m) {
    Printer p;
    p.debruijn = true;
    std::string s;
    p.pc(m, 0, s);
    return s;
}
std::string canonical_key(const QTermPtr& q) {
    Printer p;
    p.debruijn = true;
    std::string s;
    p.pq(q, 0, s);
    return s;
}

std::string canonical_key(const Configuration& c) {
    // Free variables are renamed in first-occurrence order so path-dependent
    // fresh names collapse; linking indices are listed in the same order.
    std::vector<Ident> vars = free_qvars(c.term);
    QTermPtr t = c.term;
    std::string link;
    for (std::size_t i = 0; i < vars.size(); i++) {
        // '%' cannot appear in user or evaluator names, so sequential
        // substitution never merges distinct variables.
        Ident canon = "%q" + std::to_string(i + 1);
        t = subst_qvar(t, vars[i], qvar(canon));
        if (i) link += ",";
        auto it = c.link.find(vars[i]);
        link += it == c.link.end() ? "?" : std::to_string(it->second);
    }
    Printer p;
    p.debruijn = true;
    std::string s = "[" + Printer::config_state_key(c) + "; l=" + link + "; ";
    p.pq(t, 0, s);
    s += "]";
    return s;
}

// ---------------------------------------------------------------------------
// Structural equality
// ---------------------------------------------------------------------------

bool term_equal(const CTermPtr& x, const CTermPtr& y) {
    if (x->kind != y->kind) return false;
    auto subeq = [](const CTermPtr& a, const CTermPtr& b) {
        return (!a && !b) || (a && b && term_equal(a, b));
    };
    if (x->name != y->name || x->name2 != y->name2) return false;
    if ((x->ty == nullptr) != (y->ty == nullptr)) return false;
    if (x->ty && !type_equal(x->ty, y->ty)) return false;
    if (x->kind == CKind::Gate && !(*x->gate == *y->gate)) return false;
    if (x->kind == CKind::QLam) {
        if (x->qbinders.size() != y->qbinders.size()) return false;
        for (std::size_t i = 0; i < x->qbinders.size(); i++)
            if (x->qbinders[i].name != y->qbinders[i].name ||
                !type_equal(x->qbinders[i].type, y->qbinders[i].type))
                return false;
        return term_equal(x->qbody, y->qbody);
    }
    if (x->kind == CKind::Run)
        return x->config->state == y->config->state && x->config->link == y->config->link &&
               term_equal(x->config->term, y->config->term);
    return subeq(x->a, y->a) && subeq(x->b, y->b) && subeq(x->c, y->c);
}

bool term_equal(const QTermPtr& x, const QTermPtr& y) {
    if (x->kind != y->kind) return false;
    if (x->name != y->name || x->name2 != y->name2) return false;
    if ((x->ty == nullptr) != (y->ty == nullptr)) return false;
    if (x->ty && !type_equal(x->ty, y->ty)) return false;
    if ((x->m == nullptr) != (y->m == nullptr)) return false;
    if (x->m && !term_equal(x->m, y->m)) return false;
    auto subeq = [](const QTermPtr& a, const QTermPtr& b) {
        return (!a && !b) || (a && b && term_equal(a, b));
    };
    return subeq(x->a, y->a) && subeq(x->b, y->b) && subeq(x->c, y->c);
}

// ---------------------------------------------------------------------------
// Display forms
// ---------------------------------------------------------------------------

namespace {

// fold chains that spell a Nat render as decimal numerals.
bool nat_numeral(const CTermPtr& v, unsigned long& out) {
    unsigned long n = 0;
    CTermPtr cur = v;
    while (true) {
        if (cur->kind != CKind::Fold) return false;
        CTermPtr inner = cur->a;
        if (inner->kind == CKind::In1 && inner->a->kind == CKind::Unit) {
            out = n;
            return true;
        }
        if (inner->kind != CKind::In2) return false;
        n++;
        cur = inner->a;
    }
}

} // namespace

std::string display_value(const CTermPtr& v) {
    switch (v->kind) {
    case CKind::Unit: return "()";
    case CKind::Pair: return "(" + display_value(v->a) + ", " + display_value(v->b) + ")";
    case CKind::In1:
        if (v->a->kind == CKind::Unit) return "ff";
        return "inl " + display_value(v->a);
    case CKind::In2:
        if (v->a->kind == CKind::Unit) return "tt";
        return "inr " + display_value(v->a);
    case CKind::Fold: {
        unsigned long n;
        if (nat_numeral(v, n)) return std::to_string(n);
        return "fold " + display_value(v->a);
    }
    default: return print_term(v);
    }
}

std::string display_value(const QTermPtr& v) {
    switch (v->kind) {
    case QKind::Star: return "*";
    case QKind::Var: return v->name;
    case QKind::Tensor: return "(" + display_value(v->a) + " (x) " + display_value(v->b) + ")";
    case QKind::In1:
        if (v->a->kind == QKind::Star) return "ff";
        return "inl " + display_value(v->a);
    case QKind::In2:
        if (v->a->kind == QKind::Star) return "tt";
        return "inr " + display_value(v->a);
    case QKind::Fold: return "fold " + display_value(v->a);
    default: return print_term(v);
    }
}

std::string display_value(const Configuration& c) {
    std::ostringstream os;
    os << "[" << c.state.num_qubits() << " qubits; " << display_value(c.term) << "]";
    return os.str();
}

} // namespace vqpl
