#include "vqpl/parser.hpp"

#include <cmath>
#include <cstdlib>
#include <map>

namespace vqpl {

namespace {

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

enum class Tok {
    Ident, Number,
    LParen, RParen, LBrack, RBrack,
    Dot, Comma, Semi, Colon, Bar, Star,
    Eq, FatArrow, Arrow, Plus, Minus, Slash,
    SumOp,    // (+)
    TensorOp, // (x)
    Cons,     // ::
    End,
};

struct Token {
    Tok kind;
    std::string text;
    Span span;
    bool is_integer = false;
};

[[noreturn]] void fail(Span sp, const std::string& msg, std::vector<std::string> expected = {}) {
    Diagnostic d;
    d.message = msg;
    d.span = sp;
    d.expected = std::move(expected);
    throw ParseError({d});
}

bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
}

std::vector<Token> lex(const std::string& s) {
    std::vector<Token> out;
    std::size_t i = 0;
    const std::size_t n = s.size();
    while (i < n) {
        char c = s[i];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            i++;
            continue;
        }
        if (c == '-' && i + 1 < n && s[i + 1] == '-') {
            while (i < n && s[i] != '\n') i++;
            continue;
        }
        std::size_t start = i;
        auto push = [&](Tok k, std::size_t len) {
            out.push_back({k, s.substr(start, len), {start, start + len}, false});
            i = start + len;
        };
        if (c == '(') {
            if (i + 2 < n && s[i + 1] == '+' && s[i + 2] == ')') {
                push(Tok::SumOp, 3);
                continue;
            }
            if (i + 2 < n && s[i + 1] == 'x' && s[i + 2] == ')') {
                push(Tok::TensorOp, 3);
                continue;
            }
            push(Tok::LParen, 1);
            continue;
        }
        switch (c) {
        case ')': push(Tok::RParen, 1); continue;
        case '[': push(Tok::LBrack, 1); continue;
        case ']': push(Tok::RBrack, 1); continue;
        case '.': push(Tok::Dot, 1); continue;
        case ',': push(Tok::Comma, 1); continue;
        case ';': push(Tok::Semi, 1); continue;
        case '|': push(Tok::Bar, 1); continue;
        case '*': push(Tok::Star, 1); continue;
        case '+': push(Tok::Plus, 1); continue;
        case '/': push(Tok::Slash, 1); continue;
        default: break;
        }
        if (c == ':') {
            if (i + 1 < n && s[i + 1] == ':') {
                push(Tok::Cons, 2);
            } else {
                push(Tok::Colon, 1);
            }
            continue;
        }
        if (c == '=') {
            if (i + 1 < n && s[i + 1] == '>') {
                push(Tok::FatArrow, 2);
            } else {
                push(Tok::Eq, 1);
            }
            continue;
        }
        if (c == '-') {
            if (i + 1 < n && s[i + 1] == '>') {
                push(Tok::Arrow, 2);
            } else {
                push(Tok::Minus, 1);
            }
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            bool integer = true;
            while (j < n && std::isdigit(static_cast<unsigned char>(s[j]))) j++;
            if (j < n && s[j] == '.' && j + 1 < n &&
                std::isdigit(static_cast<unsigned char>(s[j + 1]))) {
                integer = false;
                j++;
                while (j < n && std::isdigit(static_cast<unsigned char>(s[j]))) j++;
            }
            if (j < n && (s[j] == 'e' || s[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < n && (s[k] == '+' || s[k] == '-')) k++;
                if (k < n && std::isdigit(static_cast<unsigned char>(s[k]))) {
                    integer = false;
                    j = k;
                    while (j < n && std::isdigit(static_cast<unsigned char>(s[j]))) j++;
                }
            }
            Token t{Tok::Number, s.substr(i, j - i), {i, j}, integer};
            out.push_back(t);
            i = j;
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i + 1;
            while (j < n && ident_char(s[j])) j++;
            out.push_back({Tok::Ident, s.substr(i, j - i), {i, j}, false});
            i = j;
            continue;
        }
        fail({i, i + 1}, std::string("unexpected character '") + c + "'");
    }
    out.push_back({Tok::End, "", {n, n}, false});
    return out;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

enum class Sort { Classical, Quantum };

const std::map<std::string, GateName> kFixedGates = {
    {"H", GateName::H},       {"X", GateName::X},   {"Y", GateName::Y},
    {"Z", GateName::Z},       {"S", GateName::S},   {"T", GateName::T},
    {"CNOT", GateName::CNOT}, {"CZ", GateName::CZ}, {"SWAP", GateName::SWAP}};

const std::map<std::string, GateName> kRotGates = {{"RX", GateName::RX},
                                                   {"RY", GateName::RY},
                                                   {"RZ", GateName::RZ},
                                                   {"PHASE", GateName::PHASE}};

bool is_keyword(const std::string& s) {
    static const std::set<std::string> kw = {
        "def",  "fun",  "qfun", "case", "of",   "fold", "unfold", "let",  "lift",
        "in",   "run",  "init", "new",  "meas", "fix",  "inl",    "inr",  "fst",
        "snd",  "nil",  "mu",   "qbit", "I",    "unit", "pi",     "coin", "tt",
        "ff",   "zero", "succ", "Q",    "sqrt", "arccos"};
    return kw.count(s) > 0 || kFixedGates.count(s) > 0 || kRotGates.count(s) > 0;
}

// Type variables live in their own namespace: only type-level names are
// reserved there, so X can be both the Pauli gate and a mu binder.
bool is_type_keyword(const std::string& s) {
    static const std::set<std::string> kw = {"mu",   "qbit", "I",    "unit", "Q",
                                             "Bool", "Nat",  "List", "Bit",  "QNat",
                                             "QList"};
    return kw.count(s) > 0;
}

struct Parser {
    const std::string& src;
    std::vector<Token> toks;
    std::size_t pos = 0;
    std::vector<std::pair<Ident, Sort>> scope;
    unsigned fix_counter = 0;

    explicit Parser(const std::string& text) : src(text), toks(lex(text)) {}

    const Token& peek(std::size_t k = 0) const {
        return toks[std::min(pos + k, toks.size() - 1)];
    }
    const Token& next() { return toks[pos < toks.size() - 1 ? pos++ : pos]; }
    bool at(Tok k) const { return peek().kind == k; }
    bool at_ident(const char* s) const { return at(Tok::Ident) && peek().text == s; }
    bool eat(Tok k) {
        if (at(k)) {
            pos++;
            return true;
        }
        return false;
    }
    bool eat_ident(const char* s) {
        if (at_ident(s)) {
            pos++;
            return true;
        }
        return false;
    }
    Token expect(Tok k, const char* what) {
        if (!at(k)) fail(peek().span, std::string("expected ") + what, {what});
        return toks[pos++];
    }
    void expect_ident(const char* s) {
        if (!at_ident(s)) fail(peek().span, std::string("expected '") + s + "'", {s});
        pos++;
    }
    Ident expect_name(const char* what) {
        if (!at(Tok::Ident) || is_keyword(peek().text))
            fail(peek().span, std::string("expected ") + what, {what});
        return toks[pos++].text;
    }
    Ident expect_tyvar() {
        if (!at(Tok::Ident) || is_type_keyword(peek().text))
            fail(peek().span, "expected type variable", {"type variable"});
        return toks[pos++].text;
    }

    std::optional<Sort> lookup_sort(const Ident& n) const {
        for (auto it = scope.rbegin(); it != scope.rend(); ++it)
            if (it->first == n) return it->second;
        return std::nullopt;
    }

    Ident fresh_binder(const char* base) {
        // Fresh within this file: never collides with source identifiers.
        for (;;) {
            Ident cand = std::string("_") + base + std::to_string(++fix_counter);
            if (src.find(cand) == std::string::npos) return cand;
        }
    }

    // --- constant numeric expressions (gate angles, coin bias) ---

    double num_expr() {
        double v = num_mul();
        for (;;) {
            if (eat(Tok::Plus)) v += num_mul();
            else if (eat(Tok::Minus)) v -= num_mul();
            else return v;
        }
    }
    double num_mul() {
        double v = num_atom();
        for (;;) {
            if (eat(Tok::Star)) v *= num_atom();
            else if (eat(Tok::Slash)) v /= num_atom();
            else return v;
        }
    }
    double num_atom() {
        if (eat(Tok::Minus)) return -num_atom();
        if (at(Tok::Number)) return std::strtod(next().text.c_str(), nullptr);
        if (eat_ident("pi")) return M_PI;
        if (eat_ident("sqrt")) {
            expect(Tok::LParen, "(");
            double v = num_expr();
            expect(Tok::RParen, ")");
            return std::sqrt(v);
        }
        if (eat_ident("arccos")) {
            expect(Tok::LParen, "(");
            double v = num_expr();
            expect(Tok::RParen, ")");
            return std::acos(v);
        }
        if (eat(Tok::LParen)) {
            double v = num_expr();
            expect(Tok::RParen, ")");
            return v;
        }
        fail(peek().span, "expected a numeric constant");
    }

    // --- types ---

    CTypePtr ctype() {
        CTypePtr a = ctype_sum();
        if (eat(Tok::Arrow)) return ct_arrow(a, ctype());
        return a;
    }
    CTypePtr ctype_sum() {
        CTypePtr a = ctype_prod();
        if (eat(Tok::Plus)) return ct_sum(a, ctype_sum());
        return a;
    }
    CTypePtr ctype_prod() {
        CTypePtr a = ctype_atom();
        if (eat(Tok::Star)) return ct_prod(a, ctype_prod());
        return a;
    }
    CTypePtr ctype_atom() {
        const Token& t = peek();
        if (t.kind == Tok::Number && t.text == "1") {
            pos++;
            return ct_unit();
        }
        if (eat_ident("unit")) return ct_unit();
        if (eat_ident("mu")) {
            Ident x = expect_tyvar();
            expect(Tok::Dot, ".");
            return ct_mu(x, ctype());
        }
        if (eat_ident("Q")) {
            expect(Tok::LParen, "(");
            QTypePtr a = qtype();
            expect(Tok::Comma, ",");
            QTypePtr b = qtype();
            expect(Tok::RParen, ")");
            return ct_qfun(a, b);
        }
        if (eat_ident("Bool")) return ct_bool();
        if (eat_ident("Nat")) return ct_mu("X", ct_sum(ct_unit(), ct_var("X")));
        if (eat_ident("List")) {
            expect(Tok::LParen, "(");
            CTypePtr p = ctype();
            expect(Tok::RParen, ")");
            return ct_mu("X", ct_sum(ct_unit(), ct_prod(p, ct_var("X"))));
        }
        if (t.kind == Tok::Ident && !is_type_keyword(t.text)) {
            pos++;
            return ct_var(t.text);
        }
        if (eat(Tok::LParen)) {
            CTypePtr a = ctype();
            expect(Tok::RParen, ")");
            return a;
        }
        fail(t.span, "expected a classical type");
    }

    QTypePtr qtype() {
        QTypePtr a = qtype_tensor();
        if (eat(Tok::SumOp)) return qt_sum(a, qtype());
        return a;
    }
    QTypePtr qtype_tensor() {
        QTypePtr a = qtype_atom();
        if (eat(Tok::TensorOp)) return qt_tensor(a, qtype_tensor());
        return a;
    }
    QTypePtr qtype_atom() {
        const Token& t = peek();
        if (eat_ident("I")) return qt_unit();
        if (eat_ident("qbit")) return qt_qbit();
        if (eat_ident("mu")) {
            Ident x = expect_tyvar();
            expect(Tok::Dot, ".");
            return qt_mu(x, qtype());
        }
        if (eat_ident("Bit")) return qt_bit();
        if (eat_ident("QNat")) return qt_mu("X", qt_sum(qt_unit(), qt_var("X")));
        if (eat_ident("QList")) {
            QTypePtr elem = qt_qbit();
            if (eat(Tok::LParen)) {
                elem = qtype();
                expect(Tok::RParen, ")");
            }
            return qt_mu("X", qt_sum(qt_unit(), qt_tensor(elem, qt_var("X"))));
        }
        if (t.kind == Tok::Ident && !is_type_keyword(t.text)) {
            pos++;
            return qt_var(t.text);
        }
        if (eat(Tok::LParen)) {
            QTypePtr a = qtype();
            expect(Tok::RParen, ")");
            return a;
        }
        fail(t.span, "expected a quantum type");
    }

    // --- classical terms ---

    CTermPtr nat_literal(unsigned long n) {
        CTypePtr nat = ct_mu("X", ct_sum(ct_unit(), ct_var("X")));
        CTypePtr unrolled = ct_sum(ct_unit(), nat);
        CTermPtr v = cfold(nat, cin1(unrolled, cunit()));
        for (unsigned long i = 0; i < n; i++) v = cfold(nat, cin2(unrolled, v));
        return v;
    }

    CTermPtr cterm() {
        Span sp = peek().span;
        if (eat_ident("fun")) {
            expect(Tok::LParen, "(");
            Ident x = expect_name("parameter name");
            expect(Tok::Colon, ":");
            CTypePtr t = ctype();
            expect(Tok::RParen, ")");
            expect(Tok::Dot, ".");
            scope.emplace_back(x, Sort::Classical);
            CTermPtr body = cterm();
            scope.pop_back();
            auto r = clam(x, t, body);
            const_cast<CTerm*>(r.get())->span = sp;
            return r;
        }
        if (eat_ident("qfun")) {
            expect(Tok::LParen, "(");
            std::vector<QBinder> binders;
            for (;;) {
                Ident x = expect_name("parameter name");
                expect(Tok::Colon, ":");
                binders.push_back({x, qtype()});
                if (!eat(Tok::Comma)) break;
            }
            expect(Tok::RParen, ")");
            expect(Tok::Dot, ".");
            for (const auto& b : binders) scope.emplace_back(b.name, Sort::Quantum);
            QTermPtr body = qterm();
            for (std::size_t i = 0; i < binders.size(); i++) scope.pop_back();
            auto r = cqlam(std::move(binders), body);
            const_cast<CTerm*>(r.get())->span = sp;
            return r;
        }
        if (eat_ident("fix")) return fix_sugar(sp);
        if (at_ident("case")) return ccase_term();
        return ccons_term();
    }

    // fix f : P -> R . body, desugared to the recursive-type self-application
    // form. The result value V satisfies V v ->4 body[V/f] v.
    CTermPtr fix_sugar(Span sp) {
        Ident f = expect_name("function name");
        expect(Tok::Colon, ":");
        CTypePtr ft = ctype();
        expect(Tok::Dot, ".");
        if (ft->kind != CTypeKind::Arrow)
            fail(sp, "fix requires a function type annotation, got " + print_type(ft));
        scope.emplace_back(f, Sort::Classical);
        CTermPtr body = cterm();
        scope.pop_back();

        Ident w = fresh_binder("fix_w"), x = fresh_binder("fix_x");
        CTypePtr wty = ct_mu("X", ct_arrow(ct_var("X"), ft));
        CTermPtr self = capp(cunfold(cvar(w)), cvar(w));                  // (unfold w) w
        CTermPtr inner = capp(capp(clam(f, ft, body), self), cvar(x));    // ((fun f. body) self) x
        CTermPtr g = clam(w, wty, clam(x, ft->a, inner));
        return capp(g, cfold(wty, g));
    }

    CTermPtr ccase_term() {
        Span sp = peek().span;
        expect_ident("case");
        CTermPtr s = capp_term();
        expect_ident("of");
        // Patterns: inl x / inr y, ff / tt, nil / x :: xs.
        if (eat_ident("inl")) {
            Ident x = expect_name("binder");
            expect(Tok::FatArrow, "=>");
            scope.emplace_back(x, Sort::Classical);
            CTermPtr n1 = cterm();
            scope.pop_back();
            expect(Tok::Bar, "|");
            expect_ident("inr");
            Ident y = expect_name("binder");
            expect(Tok::FatArrow, "=>");
            scope.emplace_back(y, Sort::Classical);
            CTermPtr n2 = cterm();
            scope.pop_back();
            auto r = ccase(s, x, n1, y, n2);
            const_cast<CTerm*>(r.get())->span = sp;
            return r;
        }
        if (eat_ident("ff")) {
            expect(Tok::FatArrow, "=>");
            CTermPtr n1 = cterm();
            expect(Tok::Bar, "|");
            expect_ident("tt");
            expect(Tok::FatArrow, "=>");
            CTermPtr n2 = cterm();
            Ident u1 = fresh_binder("u"), u2 = fresh_binder("u");
            return ccase(s, u1, n1, u2, n2);
        }
        if (eat_ident("nil")) {
            expect(Tok::FatArrow, "=>");
            CTermPtr n1 = cterm();
            expect(Tok::Bar, "|");
            Ident h = expect_name("head binder");
            expect(Tok::Cons, "::");
            Ident t = expect_name("tail binder");
            expect(Tok::FatArrow, "=>");
            scope.emplace_back(h, Sort::Classical);
            scope.emplace_back(t, Sort::Classical);
            CTermPtr n2 = cterm();
            scope.pop_back();
            scope.pop_back();
            // case unfold s of inl u => n1 | inr p => ((fun h. fun t. n2) (fst p)) (snd p)
            // is avoided: bind the pair components by two nested cases on
            // projections would need types. Use a pair binder with projections.
            Ident u = fresh_binder("u"), p = fresh_binder("p");
            CTermPtr n2sub = subst_cvar(subst_cvar(n2, h, cfst(cvar(p))), t, csnd(cvar(p)));
            return ccase(cunfold(s), u, n1, p, n2sub);
        }
        fail(peek().span, "expected a case pattern (inl/inr, ff/tt, nil/::)");
    }

    CTermPtr ccons_term() {
        CTermPtr a = capp_term();
        if (at(Tok::Cons)) {
            Span sp = peek().span;
            pos++;
            expect(Tok::LBrack, "[");
            CTypePtr elem = ctype();
            expect(Tok::RBrack, "]");
            CTermPtr rest = ccons_term();
            return c_cons(elem, a, rest, sp);
        }
        return a;
    }

    CTermPtr c_cons(const CTypePtr& elem, CTermPtr hd, CTermPtr tl, Span) {
        CTypePtr list = ct_mu("X", ct_sum(ct_unit(), ct_prod(elem, ct_var("X"))));
        CTypePtr unrolled = ct_sum(ct_unit(), ct_prod(elem, list));
        return cfold(list, cin2(unrolled, cpair(std::move(hd), std::move(tl))));
    }
    CTermPtr c_nil(const CTypePtr& elem) {
        CTypePtr list = ct_mu("X", ct_sum(ct_unit(), ct_prod(elem, ct_var("X"))));
        CTypePtr unrolled = ct_sum(ct_unit(), ct_prod(elem, list));
        return cfold(list, cin1(unrolled, cunit()));
    }

    CTermPtr capp_term() {
        CTermPtr head = cprefix_term();
        while (starts_catom()) head = capp(head, catom());
        return head;
    }

    bool starts_catom() const {
        switch (peek().kind) {
        case Tok::LParen: return true;
        case Tok::Number: return peek().is_integer;
        case Tok::LBrack: return true;
        case Tok::Ident: {
            const std::string& s = peek().text;
            if (!is_keyword(s)) return lookup_sort(s).has_value();
            return s == "new" || s == "meas" || s == "tt" || s == "ff" || s == "zero" ||
                   s == "succ" || kFixedGates.count(s) || kRotGates.count(s);
        }
        default: return false;
        }
    }

    CTermPtr cprefix_term() {
        Span sp = peek().span;
        if (eat_ident("fst")) return cfst(catom());
        if (eat_ident("snd")) return csnd(catom());
        if (eat_ident("inl")) {
            expect(Tok::LBrack, "[");
            CTypePtr t = ctype();
            expect(Tok::RBrack, "]");
            return cin1(t, catom());
        }
        if (eat_ident("inr")) {
            expect(Tok::LBrack, "[");
            CTypePtr t = ctype();
            expect(Tok::RBrack, "]");
            return cin2(t, catom());
        }
        if (eat_ident("fold")) {
            expect(Tok::LBrack, "[");
            CTypePtr t = ctype();
            expect(Tok::RBrack, "]");
            return cfold(t, catom());
        }
        if (eat_ident("unfold")) return cunfold(catom());
        if (eat_ident("run")) {
            QTermPtr q = qatom();
            auto r = crun(q);
            const_cast<CTerm*>(r.get())->span = sp;
            return r;
        }
        if (eat_ident("succ")) {
            if (starts_catom()) {
                CTypePtr nat = ct_mu("X", ct_sum(ct_unit(), ct_var("X")));
                return cfold(nat, cin2(ct_sum(ct_unit(), nat), catom()));
            }
            // bare `succ` is the successor function
            CTypePtr nat = ct_mu("X", ct_sum(ct_unit(), ct_var("X")));
            Ident n = fresh_binder("n");
            return clam(n, nat, cfold(nat, cin2(ct_sum(ct_unit(), nat), cvar(n))));
        }
        if (eat_ident("coin")) {
            double p;
            if (at(Tok::Number)) p = std::strtod(next().text.c_str(), nullptr);
            else if (eat(Tok::LParen)) {
                p = num_expr();
                expect(Tok::RParen, ")");
            } else
                fail(peek().span, "coin expects a probability");
            if (p < 0.0 || p > 1.0) fail(sp, "coin bias must be in [0, 1]");
            // coin p = run (meas (RY(2 arccos sqrt(p)) (new ff)))
            double angle = 2.0 * std::acos(std::sqrt(p));
            CTermPtr ry = cgate(GateSpec::rotation(GateName::RY, angle));
            QTermPtr q = qapp(cmeas(), qapp(ry, qapp(cnew(), q_ff())));
            auto r = crun(q);
            const_cast<CTerm*>(r.get())->span = sp;
            return r;
        }
        return catom();
    }

    CTermPtr catom() {
        Span sp = peek().span;
        const Token& t = peek();
        if (t.kind == Tok::Number && t.is_integer) {
            pos++;
            return nat_literal(std::strtoul(t.text.c_str(), nullptr, 10));
        }
        if (t.kind == Tok::LBrack) return clist_literal();
        if (eat(Tok::LParen)) {
            if (eat(Tok::RParen)) {
                auto r = cunit();
                const_cast<CTerm*>(r.get())->span = sp;
                return r;
            }
            CTermPtr a = cterm();
            if (eat(Tok::Comma)) {
                CTermPtr b = cterm();
                expect(Tok::RParen, ")");
                return cpair(a, b);
            }
            expect(Tok::RParen, ")");
            return a;
        }
        if (t.kind == Tok::Ident) {
            const std::string& s = t.text;
            if (s == "new") {
                pos++;
                return cnew();
            }
            if (s == "meas") {
                pos++;
                return cmeas();
            }
            if (s == "tt") {
                pos++;
                return c_tt();
            }
            if (s == "ff") {
                pos++;
                return c_ff();
            }
            if (s == "zero") {
                pos++;
                return nat_literal(0);
            }
            if (s == "nil") {
                pos++;
                expect(Tok::LBrack, "[");
                CTypePtr elem = ctype();
                expect(Tok::RBrack, "]");
                return c_nil(elem);
            }
            if (auto it = kFixedGates.find(s); it != kFixedGates.end()) {
                pos++;
                return cgate(GateSpec::named(it->second));
            }
            if (auto it = kRotGates.find(s); it != kRotGates.end()) {
                pos++;
                expect(Tok::LParen, "(");
                double angle = num_expr();
                expect(Tok::RParen, ")");
                return cgate(GateSpec::rotation(it->second, angle));
            }
            if (!is_keyword(s)) {
                auto sort = lookup_sort(s);
                if (!sort) fail(t.span, "unknown identifier " + s);
                if (*sort != Sort::Classical)
                    fail(t.span, s + " is a quantum variable; classical term expected");
                pos++;
                auto r = cvar(s);
                const_cast<CTerm*>(r.get())->span = sp;
                return r;
            }
        }
        fail(t.span, "expected a classical term");
    }

    CTermPtr clist_literal() {
        expect(Tok::LBrack, "[");
        std::vector<CTermPtr> items;
        if (!at(Tok::Bar)) {
            items.push_back(cterm());
            while (eat(Tok::Comma)) items.push_back(cterm());
        }
        expect(Tok::Bar, "|");
        CTypePtr elem = ctype();
        expect(Tok::RBrack, "]");
        CTermPtr acc = c_nil(elem);
        for (auto it = items.rbegin(); it != items.rend(); ++it)
            acc = c_cons(elem, *it, acc, {});
        return acc;
    }

    // --- quantum terms ---

    QTermPtr qterm() {
        Span sp = peek().span;
        if (at_ident("let")) {
            pos++;
            Ident x = expect_name("binder");
            if (eat(Tok::TensorOp)) {
                Ident y = expect_name("binder");
                expect(Tok::Eq, "=");
                QTermPtr q = qterm_seq();
                expect_ident("in");
                scope.emplace_back(x, Sort::Quantum);
                scope.emplace_back(y, Sort::Quantum);
                QTermPtr r = qterm();
                scope.pop_back();
                scope.pop_back();
                auto res = qlet_tensor(x, y, q, r);
                const_cast<QTerm*>(res.get())->span = sp;
                return res;
            }
            expect(Tok::Eq, "=");
            expect_ident("lift");
            QTermPtr q = qterm_tensor();
            expect_ident("in");
            scope.emplace_back(x, Sort::Classical);
            QTermPtr r = qterm();
            scope.pop_back();
            auto res = qlift(x, q, r);
            const_cast<QTerm*>(res.get())->span = sp;
            return res;
        }
        if (at_ident("case")) return qcase_term();
        return qterm_seq();
    }

    QTermPtr qcase_term() {
        Span sp = peek().span;
        expect_ident("case");
        QTermPtr s = qterm_seq();
        expect_ident("of");
        if (eat_ident("inl")) {
            Ident x = expect_name("binder");
            expect(Tok::FatArrow, "=>");
            scope.emplace_back(x, Sort::Quantum);
            QTermPtr r1 = qterm();
            scope.pop_back();
            expect(Tok::Bar, "|");
            expect_ident("inr");
            Ident y = expect_name("binder");
            expect(Tok::FatArrow, "=>");
            scope.emplace_back(y, Sort::Quantum);
            QTermPtr r2 = qterm();
            scope.pop_back();
            auto r = qcase(s, x, r1, y, r2);
            const_cast<QTerm*>(r.get())->span = sp;
            return r;
        }
        if (eat_ident("ff")) {
            expect(Tok::FatArrow, "=>");
            QTermPtr r1 = qterm();
            expect(Tok::Bar, "|");
            expect_ident("tt");
            expect(Tok::FatArrow, "=>");
            QTermPtr r2 = qterm();
            // the scrutinee has type Bit; each branch consumes the unit value
            Ident u1 = fresh_binder("u"), u2 = fresh_binder("u");
            return qcase(s, u1, qseq(qvar(u1), r1), u2, qseq(qvar(u2), r2));
        }
        if (eat_ident("nil")) {
            expect(Tok::FatArrow, "=>");
            QTermPtr r1 = qterm();
            expect(Tok::Bar, "|");
            Ident h = expect_name("head binder");
            expect(Tok::Cons, "::");
            Ident t = expect_name("tail binder");
            expect(Tok::FatArrow, "=>");
            scope.emplace_back(h, Sort::Quantum);
            scope.emplace_back(t, Sort::Quantum);
            QTermPtr r2 = qterm();
            scope.pop_back();
            scope.pop_back();
            Ident u = fresh_binder("u"), p = fresh_binder("p");
            return qcase(qunfold(s), u, qseq(qvar(u), r1), p, qlet_tensor(h, t, qvar(p), r2));
        }
        fail(peek().span, "expected a case pattern (inl/inr, ff/tt, nil/::)");
    }

    QTermPtr qterm_seq() {
        QTermPtr a = qterm_cons();
        if (eat(Tok::Semi)) return qseq(a, qterm_seq());
        return a;
    }

    QTermPtr qterm_cons() {
        QTermPtr a = qterm_tensor();
        if (at(Tok::Cons)) {
            pos++;
            expect(Tok::LBrack, "[");
            QTypePtr elem = qtype();
            expect(Tok::RBrack, "]");
            QTermPtr rest = qterm_cons();
            return q_cons(elem, a, rest);
        }
        return a;
    }

    QTermPtr q_cons(const QTypePtr& elem, QTermPtr hd, QTermPtr tl) {
        QTypePtr list = qt_mu("X", qt_sum(qt_unit(), qt_tensor(elem, qt_var("X"))));
        QTypePtr unrolled = qt_sum(qt_unit(), qt_tensor(elem, list));
        return qfold(list, qin2(unrolled, qtensor(std::move(hd), std::move(tl))));
    }
    QTermPtr q_nil(const QTypePtr& elem) {
        QTypePtr list = qt_mu("X", qt_sum(qt_unit(), qt_tensor(elem, qt_var("X"))));
        QTypePtr unrolled = qt_sum(qt_unit(), qt_tensor(elem, list));
        return qfold(list, qin1(unrolled, qstar()));
    }

    QTermPtr qterm_tensor() {
        QTermPtr a = qapp_term();
        if (eat(Tok::TensorOp)) return qtensor(a, qterm_tensor());
        return a;
    }

    bool starts_qatom() const {
        switch (peek().kind) {
        case Tok::Star:
        case Tok::LParen:
        case Tok::LBrack: return true;
        case Tok::Ident: {
            const std::string& s = peek().text;
            if (!is_keyword(s)) return true; // any variable
            return s == "tt" || s == "ff" || s == "nil";
        }
        default: return false;
        }
    }

    QTermPtr qapp_term() {
        Span sp = peek().span;
        if (eat_ident("fold")) {
            expect(Tok::LBrack, "[");
            QTypePtr t = qtype();
            expect(Tok::RBrack, "]");
            return qfold(t, qatom());
        }
        if (eat_ident("unfold")) return qunfold(qatom());
        if (eat_ident("inl")) {
            expect(Tok::LBrack, "[");
            QTypePtr t = qtype();
            expect(Tok::RBrack, "]");
            return qin1(t, qatom());
        }
        if (eat_ident("inr")) {
            expect(Tok::LBrack, "[");
            QTypePtr t = qtype();
            expect(Tok::RBrack, "]");
            return qin2(t, qatom());
        }
        if (eat_ident("init")) {
            CTermPtr m = catom();
            auto r = qinit(m);
            const_cast<QTerm*>(r.get())->span = sp;
            return r;
        }

        // A parenthesised group may be a quantum term or a classical
        // application head; a following quantum atom settles it.
        if (at(Tok::LParen)) {
            std::size_t save = pos;
            bool quantum_ok = true;
            QTermPtr q;
            try {
                pos++;
                q = qterm();
                expect(Tok::RParen, ")");
            } catch (const ParseError&) {
                quantum_ok = false;
            }
            if (quantum_ok && !starts_qatom()) return q;
            pos = save;
            CTermPtr head = catom();
            QTermPtr arg = qatom();
            auto r = qapp(head, arg);
            const_cast<QTerm*>(r.get())->span = sp;
            return r;
        }

        if (at(Tok::Ident) && !is_keyword(peek().text)) {
            auto sort = lookup_sort(peek().text);
            if (!sort) fail(peek().span, "unknown identifier " + peek().text);
            if (*sort == Sort::Quantum) return qatom();
            CTermPtr head = catom();
            QTermPtr arg = qatom();
            auto r = qapp(head, arg);
            const_cast<QTerm*>(r.get())->span = sp;
            return r;
        }

        // Constants and gates are classical heads.
        if (at(Tok::Ident)) {
            const std::string& s = peek().text;
            if (s == "new" || s == "meas" || kFixedGates.count(s) || kRotGates.count(s)) {
                CTermPtr head = catom();
                QTermPtr arg = qatom();
                auto r = qapp(head, arg);
                const_cast<QTerm*>(r.get())->span = sp;
                return r;
            }
        }
        return qatom();
    }

    QTermPtr qatom() {
        Span sp = peek().span;
        if (eat(Tok::Star)) {
            auto r = qstar();
            const_cast<QTerm*>(r.get())->span = sp;
            return r;
        }
        if (at(Tok::LBrack)) return qlist_literal();
        if (eat(Tok::LParen)) {
            QTermPtr q = qterm();
            expect(Tok::RParen, ")");
            return q;
        }
        if (at(Tok::Ident)) {
            const std::string& s = peek().text;
            if (s == "tt") {
                pos++;
                return q_tt();
            }
            if (s == "ff") {
                pos++;
                return q_ff();
            }
            if (s == "nil") {
                pos++;
                expect(Tok::LBrack, "[");
                QTypePtr elem = qtype();
                expect(Tok::RBrack, "]");
                return q_nil(elem);
            }
            if (!is_keyword(s)) {
                auto sort = lookup_sort(s);
                if (!sort) fail(peek().span, "unknown identifier " + s);
                if (*sort != Sort::Quantum)
                    fail(peek().span, s + " is a classical variable; quantum value expected");
                pos++;
                auto r = qvar(s);
                const_cast<QTerm*>(r.get())->span = sp;
                return r;
            }
        }
        fail(peek().span, "expected a quantum term");
    }

    QTermPtr qlist_literal() {
        expect(Tok::LBrack, "[");
        std::vector<QTermPtr> items;
        if (!at(Tok::Bar)) {
            items.push_back(qterm());
            while (eat(Tok::Comma)) items.push_back(qterm());
        }
        expect(Tok::Bar, "|");
        QTypePtr elem = qtype();
        expect(Tok::RBrack, "]");
        QTermPtr acc = q_nil(elem);
        for (auto it = items.rbegin(); it != items.rend(); ++it)
            acc = q_cons(elem, *it, acc);
        return acc;
    }

    // --- program ---

    SourceFile program() {
        SourceFile sf;
        while (!at(Tok::End)) {
            Span sp = peek().span;
            expect_ident("def");
            Ident name = expect_name("declaration name");
            if (sf.find(name)) fail(sp, "duplicate declaration " + name);
            std::optional<CTypePtr> ann;
            if (eat(Tok::Colon)) ann = ctype();
            expect(Tok::Eq, "=");
            CTermPtr body = cterm();
            eat(Tok::Semi);
            sf.decls.push_back({name, ann, body, sp});
            scope.emplace_back(name, Sort::Classical); // visible to later decls
        }
        return sf;
    }
};

} // namespace

const Decl* SourceFile::find(const Ident& name) const {
    for (const auto& d : decls)
        if (d.name == name) return &d;
    return nullptr;
}

SourceFile parse_program(const std::string& text) {
    Parser p(text);
    return p.program();
}

namespace {
// Splices declaration bodies into t until no declaration name occurs free.
// Declarations can only reference earlier ones, so this terminates.
CTermPtr splice_decls(const SourceFile& sf, CTermPtr t) {
    for (;;) {
        std::set<Ident> fv = free_cvars(t);
        bool changed = false;
        for (auto it = sf.decls.rbegin(); it != sf.decls.rend(); ++it) {
            if (fv.count(it->name)) {
                t = subst_cvar(t, it->name, it->term);
                changed = true;
            }
        }
        if (!changed) return t;
    }
}
} // namespace

CTermPtr link_decl(const SourceFile& sf, const Ident& name) {
    const Decl* d = sf.find(name);
    if (!d) {
        Diagnostic diag;
        diag.message = "no declaration named " + name;
        throw ParseError({diag});
    }
    return splice_decls(sf, d->term);
}

CTermPtr parse_cterm_text(const SourceFile& sf, const std::string& text) {
    Parser p(text);
    for (const auto& d : sf.decls) p.scope.emplace_back(d.name, Sort::Classical);
    CTermPtr t = p.cterm();
    if (!p.at(Tok::End)) fail(p.peek().span, "trailing input after term");
    return splice_decls(sf, t);
}

QTermPtr parse_qterm_text(const SourceFile& sf, const std::vector<Ident>& qvars,
                          const std::string& text) {
    Parser p(text);
    for (const auto& d : sf.decls) p.scope.emplace_back(d.name, Sort::Classical);
    for (const auto& v : qvars) p.scope.emplace_back(v, Sort::Quantum);
    QTermPtr t = p.qterm();
    if (!p.at(Tok::End)) fail(p.peek().span, "trailing input after term");
    for (;;) {
        std::set<Ident> fv = free_cvars(t);
        bool changed = false;
        for (auto it = sf.decls.rbegin(); it != sf.decls.rend(); ++it) {
            if (fv.count(it->name)) {
                t = subst_cvar(t, it->name, it->term);
                changed = true;
            }
        }
        if (!changed) return t;
    }
}

} // namespace vqpl
