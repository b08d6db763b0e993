#include "vqpl/eval.hpp"

#include <random>
#include <thread>

namespace vqpl {

namespace {

using CSuccs = std::vector<std::pair<double, CTermPtr>>;
using QSuccs = std::vector<std::pair<double, Configuration>>;

Ident fresh_qvar(std::uint64_t& fresh) { return "#q" + std::to_string(++fresh); }

[[noreturn]] void stuck(const std::string& what) {
    throw Stuck("stuck (preservation/progress violation): " + what);
}

// Splits a tensor-tree value along its right spine into exactly n parts.
std::vector<QTermPtr> split_tensor(const QTermPtr& v, std::size_t n) {
    std::vector<QTermPtr> parts;
    QTermPtr cur = v;
    for (std::size_t i = 0; i + 1 < n; i++) {
        if (cur->kind != QKind::Tensor) stuck("tensor value of wrong shape");
        parts.push_back(cur->a);
        cur = cur->b;
    }
    parts.push_back(cur);
    return parts;
}

struct Stepper {
    std::uint64_t& fresh;
    const EvalOptions& opts;

    CSuccs step_c(const CTermPtr& m);
    QSuccs step_q(const Configuration& c);

    // Rebuilds E[m'] for every successor of the subterm.
    CSuccs map_c(const CSuccs& subs, const std::function<CTermPtr(const CTermPtr&)>& rebuild) {
        CSuccs out;
        out.reserve(subs.size());
        for (const auto& [p, t] : subs) out.emplace_back(p, rebuild(t));
        return out;
    }
};

CSuccs Stepper::step_c(const CTermPtr& m) {
    if (is_value(m)) return {};
    switch (m->kind) {
    case CKind::Pair:
        if (!is_value(m->a))
            return map_c(step_c(m->a), [&](const CTermPtr& t) { return cpair(t, m->b); });
        return map_c(step_c(m->b), [&](const CTermPtr& t) { return cpair(m->a, t); });
    case CKind::Fst:
        if (!is_value(m->a))
            return map_c(step_c(m->a), [&](const CTermPtr& t) { return cfst(t); });
        if (m->a->kind != CKind::Pair) stuck("fst of a non-pair");
        return {{1.0, m->a->a}};
    case CKind::Snd:
        if (!is_value(m->a))
            return map_c(step_c(m->a), [&](const CTermPtr& t) { return csnd(t); });
        if (m->a->kind != CKind::Pair) stuck("snd of a non-pair");
        return {{1.0, m->a->b}};
    case CKind::In1:
        return map_c(step_c(m->a), [&](const CTermPtr& t) { return cin1(m->ty, t); });
    case CKind::In2:
        return map_c(step_c(m->a), [&](const CTermPtr& t) { return cin2(m->ty, t); });
    case CKind::Case: {
        if (!is_value(m->a))
            return map_c(step_c(m->a), [&](const CTermPtr& t) {
                return ccase(t, m->name, m->b, m->name2, m->c);
            });
        if (m->a->kind == CKind::In1) return {{1.0, subst_cvar(m->b, m->name, m->a->a)}};
        if (m->a->kind == CKind::In2) return {{1.0, subst_cvar(m->c, m->name2, m->a->a)}};
        stuck("case of a non-injection");
    }
    case CKind::App: {
        if (!is_value(m->a))
            return map_c(step_c(m->a), [&](const CTermPtr& t) { return capp(t, m->b); });
        if (!is_value(m->b))
            return map_c(step_c(m->b), [&](const CTermPtr& t) { return capp(m->a, t); });
        if (m->a->kind != CKind::Lam) stuck("application of a non-function");
        return {{1.0, subst_cvar(m->a->a, m->a->name, m->b)}};
    }
    case CKind::Fold:
        return map_c(step_c(m->a), [&](const CTermPtr& t) { return cfold(m->ty, t); });
    case CKind::Unfold:
        if (!is_value(m->a))
            return map_c(step_c(m->a), [&](const CTermPtr& t) { return cunfold(t); });
        if (m->a->kind != CKind::Fold) stuck("unfold of a non-fold");
        return {{1.0, m->a->a}};
    case CKind::Run: {
        const Configuration& c = *m->config;
        if (is_qvalue(c.term)) {
            if (!c.link.empty()) stuck("run finished with linked variables");
            return {{1.0, obs_translate_value(c.term)}};
        }
        QSuccs subs = step_q(c);
        CSuccs out;
        out.reserve(subs.size());
        for (auto& [p, conf] : subs) out.emplace_back(p, crun(std::move(conf)));
        return out;
    }
    default: stuck("non-value classical term with no rule");
    }
}

QSuccs Stepper::step_q(const Configuration& c) {
    const QTermPtr& q = c.term;
    if (is_qvalue(q)) return {};

    // Rebuild helper for purely structural positions: state and linking come
    // from the sub-configuration's successors.
    auto descend = [&](const QTermPtr& sub,
                       const std::function<QTermPtr(const QTermPtr&)>& rebuild) -> QSuccs {
        QSuccs subs = step_q(Configuration{c.state, c.link, sub});
        QSuccs out;
        out.reserve(subs.size());
        for (auto& [p, conf] : subs)
            out.emplace_back(p, Configuration{std::move(conf.state), std::move(conf.link),
                                              rebuild(conf.term)});
        return out;
    };
    auto classical_pos = [&](const CTermPtr& sub,
                             const std::function<QTermPtr(const CTermPtr&)>& rebuild) -> QSuccs {
        CSuccs subs = step_c(sub);
        QSuccs out;
        out.reserve(subs.size());
        for (auto& [p, t] : subs) out.emplace_back(p, Configuration{c.state, c.link, rebuild(t)});
        return out;
    };

    switch (q->kind) {
    case QKind::Seq:
        if (!is_qvalue(q->a))
            return descend(q->a, [&](const QTermPtr& t) { return qseq(t, q->b); });
        if (q->a->kind != QKind::Star) stuck("sequencing a non-unit value");
        return {{1.0, Configuration{c.state, c.link, q->b}}};
    case QKind::Tensor:
        if (!is_qvalue(q->a))
            return descend(q->a, [&](const QTermPtr& t) { return qtensor(t, q->b); });
        return descend(q->b, [&](const QTermPtr& t) { return qtensor(q->a, t); });
    case QKind::LetTensor: {
        if (!is_qvalue(q->a))
            return descend(q->a,
                           [&](const QTermPtr& t) { return qlet_tensor(q->name, q->name2, t, q->b); });
        if (q->a->kind != QKind::Tensor) stuck("let-tensor of a non-tensor value");
        QTermPtr r = subst_qvar(subst_qvar(q->b, q->name, q->a->a), q->name2, q->a->b);
        return {{1.0, Configuration{c.state, c.link, r}}};
    }
    case QKind::Fold:
        return descend(q->a, [&](const QTermPtr& t) { return qfold(q->ty, t); });
    case QKind::Unfold:
        if (!is_qvalue(q->a))
            return descend(q->a, [&](const QTermPtr& t) { return qunfold(t); });
        if (q->a->kind != QKind::Fold) stuck("unfold of a non-fold");
        return {{1.0, Configuration{c.state, c.link, q->a->a}}};
    case QKind::In1:
        return descend(q->a, [&](const QTermPtr& t) { return qin1(q->ty, t); });
    case QKind::In2:
        return descend(q->a, [&](const QTermPtr& t) { return qin2(q->ty, t); });
    case QKind::Case: {
        if (!is_qvalue(q->a))
            return descend(q->a, [&](const QTermPtr& t) {
                return qcase(t, q->name, q->b, q->name2, q->c);
            });
        if (q->a->kind == QKind::In1)
            return {{1.0, Configuration{c.state, c.link, subst_qvar(q->b, q->name, q->a->a)}}};
        if (q->a->kind == QKind::In2)
            return {{1.0, Configuration{c.state, c.link, subst_qvar(q->c, q->name2, q->a->a)}}};
        stuck("case of a non-injection value");
    }
    case QKind::Lift: {
        if (!is_qvalue(q->a))
            return descend(q->a, [&](const QTermPtr& t) { return qlift(q->name, t, q->b); });
        CTermPtr observed = obs_translate_value(q->a);
        return {{1.0, Configuration{c.state, c.link, subst_cvar(q->b, q->name, observed)}}};
    }
    case QKind::Init: {
        if (!is_value(q->m))
            return classical_pos(q->m, [&](const CTermPtr& t) { return qinit(t); });
        return {{1.0, Configuration{c.state, c.link, obs_inv_value(q->m)}}};
    }
    case QKind::App: {
        if (!is_value(q->m))
            return classical_pos(q->m, [&](const CTermPtr& t) { return qapp(t, q->a); });
        if (!is_qvalue(q->a))
            return descend(q->a, [&](const QTermPtr& t) { return qapp(q->m, t); });

        const CTermPtr& head = q->m;
        const QTermPtr& arg = q->a;
        switch (head->kind) {
        case CKind::QLam: {
            std::vector<QTermPtr> vals = split_tensor(arg, head->qbinders.size());
            QTermPtr body = head->qbody;
            for (std::size_t i = 0; i < vals.size(); i++)
                body = subst_qvar(body, head->qbinders[i].name, vals[i]);
            return {{1.0, Configuration{c.state, c.link, body}}};
        }
        case CKind::Gate: {
            const GateSpec& g = *head->gate;
            std::vector<QTermPtr> vars = split_tensor(arg, static_cast<std::size_t>(g.arity));
            std::vector<int> targets;
            targets.reserve(vars.size());
            for (const auto& v : vars) {
                if (v->kind != QKind::Var) stuck("unitary applied to a non-variable");
                auto it = c.link.find(v->name);
                if (it == c.link.end()) stuck("unitary target is not linked");
                targets.push_back(it->second);
            }
            StateVector ns = apply_unitary(c.state, targets, g);
            return {{1.0, Configuration{std::move(ns), c.link, arg}}};
        }
        case CKind::NewConst: {
            int bit;
            if (arg->kind == QKind::In1 && arg->a->kind == QKind::Star) bit = 0;
            else if (arg->kind == QKind::In2 && arg->a->kind == QKind::Star) bit = 1;
            else stuck("new applied to a non-bit value");
            auto [ns, idx] = alloc_qubit(c.state, bit, opts.max_qubits);
            // Exploration of an intermediate configuration restarts the
            // counter, so skip names the linking already uses.
            Ident x = fresh_qvar(fresh);
            while (c.link.count(x)) x = fresh_qvar(fresh);
            Linking nl = c.link;
            nl[x] = idx;
            return {{1.0, Configuration{std::move(ns), std::move(nl), qvar(x)}}};
        }
        case CKind::MeasConst: {
            if (arg->kind != QKind::Var) stuck("meas applied to a non-variable");
            auto it = c.link.find(arg->name);
            if (it == c.link.end()) stuck("measured variable is not linked");
            const int j = it->second;
            Linking base = c.link;
            base.erase(arg->name);
            QSuccs out;
            for (const Branch& b : measure(c.state, j)) {
                if (b.probability < opts.prune_eps) continue;
                Linking nl = relink_after_removal(base, j);
                out.emplace_back(b.probability,
                                 Configuration{b.state, std::move(nl),
                                               b.outcome ? q_tt() : q_ff()});
            }
            return out;
        }
        default: stuck("quantum application of a non-operation value");
        }
    }
    default: stuck("non-value quantum term with no rule");
    }
}

} // namespace

bool is_terminal(const Program& p) {
    if (std::holds_alternative<CTermPtr>(p)) return is_value(std::get<CTermPtr>(p));
    return is_qvalue(std::get<Configuration>(p).term);
}

std::string program_key(const Program& p) {
    if (std::holds_alternative<CTermPtr>(p)) return canonical_key(std::get<CTermPtr>(p));
    return canonical_key(std::get<Configuration>(p));
}

std::string program_display(const Program& p) {
    if (std::holds_alternative<CTermPtr>(p)) return display_value(std::get<CTermPtr>(p));
    return display_value(std::get<Configuration>(p));
}

std::vector<std::pair<double, CTermPtr>> step_classical(const CTermPtr& m, std::uint64_t& fresh,
                                                        const EvalOptions& opts) {
    Stepper s{fresh, opts};
    return s.step_c(m);
}

std::vector<std::pair<double, Configuration>> step_config(const Configuration& c,
                                                          std::uint64_t& fresh,
                                                          const EvalOptions& opts) {
    Stepper s{fresh, opts};
    return s.step_q(c);
}

std::vector<std::pair<double, Program>> step_program(const Program& p, std::uint64_t& fresh,
                                                     const EvalOptions& opts) {
    std::vector<std::pair<double, Program>> out;
    if (std::holds_alternative<CTermPtr>(p)) {
        for (auto& [pr, t] : step_classical(std::get<CTermPtr>(p), fresh, opts))
            out.emplace_back(pr, Program{std::move(t)});
    } else {
        for (auto& [pr, conf] : step_config(std::get<Configuration>(p), fresh, opts))
            out.emplace_back(pr, Program{std::move(conf)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Exploration
// ---------------------------------------------------------------------------

namespace {

struct Node {
    double prob;
    Program prog;
    std::uint64_t fresh;
};

} // namespace

ExploreReport explore(const Program& p, int max_steps, const EvalOptions& opts, int threads) {
    ExploreReport rep{};
    rep.residual = 0.0;
    rep.steps_used = 0;
    rep.nodes_expanded = 0;

    std::vector<Node> frontier{{1.0, p, 0}};
    double pruned = 0.0;

    auto settle = [&](std::vector<Node>& nodes) {
        // Moves terminal nodes into the distribution.
        std::vector<Node> live;
        for (auto& n : nodes) {
            if (is_terminal(n.prog)) {
                std::string key = program_key(n.prog);
                rep.dist.add(key, n.prob);
                rep.reps.emplace(std::move(key), n.prog);
            } else {
                live.push_back(std::move(n));
            }
        }
        nodes = std::move(live);
    };

    settle(frontier);
    for (int depth = 0; depth < max_steps && !frontier.empty(); depth++) {
        rep.steps_used = depth + 1;
        rep.nodes_expanded += static_cast<long>(frontier.size());
        if (rep.nodes_expanded > opts.node_budget)
            throw NodeBudgetExceeded("explore exceeded the node budget");

        std::vector<std::vector<std::pair<double, Program>>> succs(frontier.size());
        std::vector<std::uint64_t> counters(frontier.size());
        auto expand = [&](std::size_t i) {
            std::uint64_t f = frontier[i].fresh;
            succs[i] = step_program(frontier[i].prog, f, opts);
            counters[i] = f;
        };
        if (threads <= 1 || frontier.size() < 2) {
            for (std::size_t i = 0; i < frontier.size(); i++) expand(i);
        } else {
            std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(threads),
                                                   frontier.size());
            std::vector<std::thread> pool;
            std::atomic<std::size_t> cursor{0};
            for (std::size_t t = 0; t < nt; t++)
                pool.emplace_back([&] {
                    for (;;) {
                        std::size_t i = cursor.fetch_add(1);
                        if (i >= frontier.size()) return;
                        expand(i);
                    }
                });
            for (auto& th : pool) th.join();
        }

        std::vector<Node> next;
        for (std::size_t i = 0; i < frontier.size(); i++) {
            for (auto& [q, prog] : succs[i]) {
                double mass = frontier[i].prob * q;
                if (mass < opts.prune_eps) {
                    pruned += mass;
                    continue;
                }
                next.push_back(Node{mass, std::move(prog), counters[i]});
            }
        }
        frontier = std::move(next);
        settle(frontier);
    }

    for (const auto& n : frontier) rep.residual += n.prob;
    rep.residual += pruned;
    return rep;
}

ExploreReport explore(const CTermPtr& m, int max_steps, const EvalOptions& opts, int threads) {
    return explore(Program{m}, max_steps, opts, threads);
}

SampleResult sample(const Program& p, std::uint64_t seed, int max_steps, const EvalOptions& opts) {
    std::mt19937_64 gen(seed);
    auto draw = [&]() { return (gen() >> 11) * 0x1.0p-53; };

    Program cur = p;
    std::uint64_t fresh = 0;
    for (int step = 0; step <= max_steps; step++) {
        if (is_terminal(cur)) return SampleResult{cur, step};
        if (step == max_steps) break;
        auto succs = step_program(cur, fresh, opts);
        if (succs.empty()) throw Stuck("sample reached a non-value with no successors");
        if (succs.size() == 1) {
            cur = std::move(succs[0].second);
        } else {
            double u = draw();
            cur = u < succs[0].first ? std::move(succs[0].second) : std::move(succs[1].second);
        }
    }
    return SampleResult{std::nullopt, max_steps};
}

} // namespace vqpl
