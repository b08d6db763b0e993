#pragma once

#include "vqpl/denot.hpp"
#include "vqpl/eval.hpp"
#include "vqpl/parser.hpp"
#include "vqpl/typecheck.hpp"

#include <fstream>
#include <random>
#include <sstream>

#ifndef VQPL_PROGRAMS_DIR
#define VQPL_PROGRAMS_DIR "programs"
#endif

namespace vqpl::test {

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string program_path(const std::string& name) {
    return std::string(VQPL_PROGRAMS_DIR) + "/" + name;
}

inline SourceFile load_program(const std::string& name) {
    return parse_program(slurp(program_path(name)));
}

inline CTermPtr load_main(const std::string& name) {
    return link_decl(load_program(name), "main");
}

// Visits every reachable program point up to `bound` steps (deduplicated by
// canonical key), passing the node and its successors.
template <typename F>
long walk_reachable(const Program& start, int bound, long node_cap, F&& visit) {
    long visited = 0;
    std::vector<std::pair<Program, std::uint64_t>> frontier{{start, 0}};
    std::set<std::string> seen{program_key(start)};
    EvalOptions opts;
    for (int depth = 0; depth <= bound && !frontier.empty(); depth++) {
        std::vector<std::pair<Program, std::uint64_t>> next;
        for (auto& [prog, f0] : frontier) {
            if (visited >= node_cap) return visited;
            visited++;
            std::uint64_t fresh = f0;
            auto succs = is_terminal(prog)
                             ? std::vector<std::pair<double, Program>>{}
                             : step_program(prog, fresh, opts);
            visit(prog, succs);
            for (auto& [p, sp] : succs)
                if (seen.insert(program_key(sp)).second) next.emplace_back(std::move(sp), fresh);
        }
        frontier = std::move(next);
    }
    return visited;
}

// ---------------------------------------------------------------------------
// Random well-typed closed terms (type-directed, seeded)
// ---------------------------------------------------------------------------

class TermGen {
  public:
    explicit TermGen(std::uint64_t seed) : rng_(seed) {}

    // A small pool of goal types exercising products, sums, recursion,
    // functions and quantum operations.
    CTypePtr random_goal() {
        switch (pick(8)) {
        case 0: return ct_unit();
        case 1: return ct_bool();
        case 2: return nat();
        case 3: return ct_prod(ct_bool(), ct_bool());
        case 4: return ct_sum(ct_bool(), ct_unit());
        case 5: return ct_arrow(ct_bool(), ct_bool());
        case 6: return ct_qfun(qt_qbit(), qt_qbit());
        default: return ct_prod(ct_unit(), ct_sum(ct_unit(), ct_bool()));
        }
    }

    CTermPtr gen_closed(const CTypePtr& goal, int depth) {
        Ctx ctx;
        return gen(goal, ctx, depth);
    }

    static CTypePtr nat() { return ct_mu("X", ct_sum(ct_unit(), ct_var("X"))); }

  private:
    using Ctx = std::vector<std::pair<Ident, CTypePtr>>;
    std::mt19937_64 rng_;
    unsigned long fresh_ = 0;

    int pick(int n) { return static_cast<int>(rng_() % static_cast<unsigned>(n)); }
    bool chance(int percent) { return pick(100) < percent; }
    Ident fresh_var() { return "v" + std::to_string(++fresh_); }

    CTermPtr gen(const CTypePtr& t, Ctx& ctx, int fuel) {
        // Sometimes use a variable of the right type.
        if (!ctx.empty() && chance(20)) {
            std::vector<const std::pair<Ident, CTypePtr>*> hits;
            for (const auto& e : ctx)
                if (type_equal(e.second, t)) hits.push_back(&e);
            if (!hits.empty()) return cvar(hits[static_cast<std::size_t>(pick(
                static_cast<int>(hits.size())))]->first);
        }
        if (fuel > 0 && chance(65)) {
            CTermPtr elim = gen_elim(t, ctx, fuel);
            if (elim) return elim;
        }
        return gen_intro(t, ctx, fuel);
    }

    CTermPtr gen_intro(const CTypePtr& t, Ctx& ctx, int fuel) {
        switch (t->kind) {
        case CTypeKind::Unit: return cunit();
        case CTypeKind::Prod:
            return cpair(gen(t->a, ctx, fuel - 1), gen(t->b, ctx, fuel - 1));
        case CTypeKind::Sum:
            return pick(2) ? cin2(t, gen(t->b, ctx, fuel - 1)) : cin1(t, gen(t->a, ctx, fuel - 1));
        case CTypeKind::Arrow: {
            Ident x = fresh_var();
            ctx.emplace_back(x, t->a);
            CTermPtr body = gen(t->b, ctx, fuel - 1);
            ctx.pop_back();
            return clam(x, t->a, body);
        }
        case CTypeKind::Mu: {
            // Guarded unrolling: recurse with less fuel; at fuel 0 the sum
            // generator bottoms out on the left (unit) side for Nat/List.
            CTypePtr unrolled = type_subst(t->a, t->name, t);
            if (fuel <= 0 && unrolled->kind == CTypeKind::Sum &&
                unrolled->a->kind == CTypeKind::Unit)
                return cfold(t, cin1(unrolled, cunit()));
            return cfold(t, gen(unrolled, ctx, fuel - 1));
        }
        case CTypeKind::QFun: return gen_channel(t, fuel);
        default: return cunit();
        }
    }

    // A quantum lambda of the requested Q(A, B) shape, from a small bag of
    // shapes used by the suite.
    CTermPtr gen_channel(const CTypePtr& t, int fuel) {
        if (type_equal(t->qa, qt_qbit()) && type_equal(t->qb, qt_qbit())) {
            switch (fuel > 0 ? pick(4) : 0) {
            case 0: return cqlam({{"q", qt_qbit()}}, qvar("q"));
            case 1: return cgate(GateSpec::named(GateName::H));
            case 2: return cgate(GateSpec::named(GateName::X));
            default:
                return cqlam({{"q", qt_qbit()}},
                             qapp(cgate(GateSpec::named(GateName::Z)), qvar("q")));
            }
        }
        if (type_equal(t->qa, qt_qbit()) && type_equal(t->qb, qt_bit())) return cmeas();
        if (type_equal(t->qa, qt_bit()) && type_equal(t->qb, qt_qbit())) return cnew();
        // identity channel at any type
        return cqlam({{"q", t->qa}}, qvar("q"));
    }

    CTermPtr gen_elim(const CTypePtr& t, Ctx& ctx, int fuel) {
        switch (pick(5)) {
        case 0: { // beta redex
            CTypePtr argty = pick(2) ? ct_bool() : ct_unit();
            Ident x = fresh_var();
            ctx.emplace_back(x, argty);
            CTermPtr body = gen(t, ctx, fuel - 1);
            ctx.pop_back();
            return capp(clam(x, argty, body), gen(argty, ctx, fuel - 1));
        }
        case 1: { // projection
            CTypePtr other = ct_bool();
            bool first = pick(2) == 0;
            CTypePtr pt = first ? ct_prod(t, other) : ct_prod(other, t);
            CTermPtr pr = gen(pt, ctx, fuel - 1);
            return first ? cfst(pr) : csnd(pr);
        }
        case 2: { // case split
            CTypePtr st = ct_sum(ct_unit(), ct_bool());
            CTermPtr scrut = gen(st, ctx, fuel - 1);
            Ident x = fresh_var(), y = fresh_var();
            ctx.emplace_back(x, st->a);
            CTermPtr n1 = gen(t, ctx, fuel - 1);
            ctx.pop_back();
            ctx.emplace_back(y, st->b);
            CTermPtr n2 = gen(t, ctx, fuel - 1);
            ctx.pop_back();
            return ccase(scrut, x, n1, y, n2);
        }
        case 3: { // unfold of a fold
            if (t->kind != CTypeKind::Sum) return nullptr;
            if (!type_equal(t, ct_sum(ct_unit(), nat()))) return nullptr;
            return cunfold(gen(nat(), ctx, fuel - 1));
        }
        default: { // a quantum round trip producing a Bool
            if (!type_equal(t, ct_bool())) return nullptr;
            switch (pick(3)) {
            case 0:
                return crun(qapp(cmeas(), qapp(cnew(), pick(2) ? q_tt() : q_ff())));
            case 1:
                return crun(qapp(cmeas(), qapp(cgate(GateSpec::named(GateName::H)),
                                               qapp(cnew(), q_ff()))));
            default:
                return crun(qlift("b", qapp(cmeas(), qapp(cnew(), q_tt())),
                                  qinit(cvar("b"))));
            }
        }
        }
    }
};

} // namespace vqpl::test
