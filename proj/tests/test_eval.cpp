#include "vqpl/eval.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace vqpl;
using namespace vqpl::test;

TEST_CASE("classical reduction rules") {
    std::uint64_t fresh = 0;
    SUBCASE("beta") {
        CTermPtr m = capp(clam("x", ct_unit(), cvar("x")), cunit());
        auto s = step_classical(m, fresh);
        REQUIRE(s.size() == 1);
        CHECK(s[0].first == 1.0);
        CHECK(s[0].second->kind == CKind::Unit);
    }
    SUBCASE("projection") {
        CTermPtr m = cfst(cpair(cunit(), c_tt()));
        auto s = step_classical(m, fresh);
        REQUIRE(s.size() == 1);
        CHECK(s[0].second->kind == CKind::Unit);
    }
    SUBCASE("run of a value configuration extracts the observable value") {
        CTermPtr m = crun(qin1(qt_bit(), qstar()));
        auto s = step_classical(m, fresh);
        REQUIRE(s.size() == 1);
        CHECK(term_equal(s[0].second, c_ff()));
    }
    SUBCASE("unfold of fold") {
        CTypePtr n = TermGen::nat();
        CTermPtr m = cunfold(cfold(n, cin1(ct_sum(ct_unit(), n), cunit())));
        auto s = step_classical(m, fresh);
        REQUIRE(s.size() == 1);
        CHECK(s[0].second->kind == CKind::In1);
    }
    SUBCASE("values do not step") {
        CHECK(step_classical(c_tt(), fresh).empty());
        CHECK(step_classical(clam("x", ct_unit(), cvar("x")), fresh).empty());
    }
}

TEST_CASE("configuration reduction rules") {
    std::uint64_t fresh = 0;
    SUBCASE("measurement bifurcates with Born weights") {
        const double r = 1.0 / std::sqrt(2.0);
        Configuration c{StateVector::from_amplitudes(1, {r, r}), {{"y", 1}},
                        qapp(cmeas(), qvar("y"))};
        auto s = step_config(c, fresh);
        REQUIRE(s.size() == 2);
        CHECK(s[0].first == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(s[1].first == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(s[0].second.state.num_qubits() == 0);
        CHECK(s[0].second.link.empty());
        CHECK(term_equal(s[0].second.term, q_ff()));
        CHECK(term_equal(s[1].second.term, q_tt()));
    }
    SUBCASE("new allocates a fresh linked qubit") {
        Configuration c{StateVector{}, {}, qapp(cnew(), q_ff())};
        auto s = step_config(c, fresh);
        REQUIRE(s.size() == 1);
        const Configuration& c2 = s[0].second;
        CHECK(c2.state.num_qubits() == 1);
        CHECK(std::abs(c2.state.amp(0) - 1.0) == 0.0);
        REQUIRE(c2.term->kind == QKind::Var);
        CHECK(c2.link.at(c2.term->name) == 1);
    }
    SUBCASE("lift substitutes the observed classical value") {
        Configuration c{StateVector::basis(1, 1), {{"x", 1}},
                        qlift("b", qapp(cmeas(), qvar("x")), qinit(cvar("b")))};
        // step 1: measurement (deterministic here, |1>)
        auto s1 = step_config(c, fresh);
        REQUIRE(s1.size() == 1);
        CHECK(s1[0].first == 1.0);
        // step 2: lift of the value tt substitutes classically
        auto s2 = step_config(s1[0].second, fresh);
        REQUIRE(s2.size() == 1);
        REQUIRE(s2[0].second.term->kind == QKind::Init);
        CHECK(term_equal(s2[0].second.term->m, c_tt()));
        // step 3: init of a value becomes the quantum value
        auto s3 = step_config(s2[0].second, fresh);
        REQUIRE(s3.size() == 1);
        CHECK(term_equal(s3[0].second.term, q_tt()));
    }
    SUBCASE("unitary application keeps the tensor of variables") {
        Configuration c{StateVector::basis(2, 0), {{"a", 1}, {"b", 2}},
                        qapp(cgate(GateSpec::named(GateName::CNOT)),
                             qtensor(qvar("a"), qvar("b")))};
        auto s = step_config(c, fresh);
        REQUIRE(s.size() == 1);
        CHECK(s[0].second.term->kind == QKind::Tensor);
        CHECK(s[0].second.link == c.link);
    }
    SUBCASE("measuring with an auxiliary qubit keeps the projected remainder") {
        // 0.6|00> + 0.8|11> with only qubit 1 linked: the leftover qubit
        // stays in the branch states and the auxiliary count is preserved.
        StateVector s = StateVector::from_amplitudes(2, {0.6, 0, 0, 0.8});
        Configuration c{s, {{"x", 1}}, qapp(cmeas(), qvar("x"))};
        auto bs = step_config(c, fresh);
        REQUIRE(bs.size() == 2);
        CHECK(bs[0].first == doctest::Approx(0.36).epsilon(1e-12));
        CHECK(bs[1].first == doctest::Approx(0.64).epsilon(1e-12));
        CHECK(bs[0].second.state.num_qubits() == 1);
        CHECK(std::abs(bs[0].second.state.amp(0) - 1.0) < 1e-12);
        CHECK(std::abs(bs[1].second.state.amp(1) - 1.0) < 1e-12);
        ClassicalCtx phi;
        for (const auto& [p, conf] : bs) CHECK(check_config(phi, conf).aux_qubits == 1);
    }
}

TEST_CASE("explore") {
    SourceFile empty;
    SUBCASE("fair coin") {
        ExploreReport rep = explore(parse_cterm_text(empty, "coin 0.5"), 50);
        CHECK(rep.dist.size() == 2);
        CHECK(rep.dist.at(canonical_key(c_ff())) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(rep.dist.at(canonical_key(c_tt())) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(rep.residual == 0.0);
    }
    SUBCASE("a value explores to itself in one report") {
        ExploreReport rep = explore(cunit(), 1);
        CHECK(rep.dist.at(canonical_key(cunit())) == 1.0);
        CHECK(rep.residual == 0.0);
    }
    SUBCASE("geometric program leaves residual 2^-4 after 4 rounds") {
        CTermPtr m = load_main("rus.vqpl");
        ExploreReport rep = explore(m, 1 + 10 * 4); // 10 steps per round
        CHECK(rep.residual == doctest::Approx(0.0625).epsilon(1e-12));
        CHECK(rep.dist.at(canonical_key(c_tt())) ==
              doctest::Approx(1.0 - 0.0625).epsilon(1e-12));
    }
    SUBCASE("node budget is enforced") {
        EvalOptions opts;
        opts.node_budget = 3;
        CTermPtr m = load_main("rus.vqpl");
        CHECK_THROWS_AS(explore(m, 100, opts), NodeBudgetExceeded);
    }
    SUBCASE("qubit capacity is enforced") {
        EvalOptions opts;
        opts.max_qubits = 1;
        CTermPtr m = load_main("bell.vqpl");
        CHECK_THROWS_AS(explore(m, 100, opts), CapacityExceeded);
    }
}

TEST_CASE("one-step distribution invariance") {
    // explore(m, n).dist == sum_b p_b explore(m_b, n-1).dist at every
    // reachable node of every bundled program, n <= 30; configurations too.
    auto check_node = [](const Program& node, const auto& succs) {
        if (succs.empty()) return;
        CHECK(succs.size() <= 2); // only measurement bifurcates
        const int n = 12;
        ExploreReport whole = explore(node, n);
        std::vector<double> ws;
        std::vector<SubDist> ds;
        for (const auto& [p, sp] : succs) {
            ws.push_back(p);
            ds.push_back(explore(sp, n - 1).dist);
        }
        SubDist mix = convex_sum(ws, ds);
        CHECK(max_pointwise_diff(whole.dist, mix) < 1e-12);
    };
    for (const char* name : {"coin.vqpl", "bell.vqpl", "initlift.vqpl", "rus.vqpl"})
        walk_reachable(Program{load_main(name)}, 30, 400, check_node);
    SourceFile sf = load_program("teleport.vqpl");
    const double r = 1.0 / std::sqrt(2.0);
    Configuration c{StateVector::from_amplitudes(1, {Complex{r, 0}, Complex{0, r}}),
                    {{"in0", 1}},
                    parse_qterm_text(sf, {"in0"}, "main in0")};
    walk_reachable(Program{c}, 30, 400, check_node);
}

TEST_CASE("monotone convergence and the halt bound") {
    CTermPtr m = load_main("rus.vqpl");
    SubDist prev;
    double prev_res = 1.0;
    for (int n : {5, 11, 21, 31, 41, 61}) {
        ExploreReport rep = explore(m, n);
        CHECK(rep.dist.total() <= 1.0 + 1e-12);
        CHECK(rep.dist.total() + rep.residual == doctest::Approx(1.0).epsilon(1e-9));
        for (const auto& [k, p] : prev.entries()) CHECK(rep.dist.at(k) >= p - 1e-15);
        CHECK(rep.residual <= prev_res + 1e-15);
        prev = rep.dist;
        prev_res = rep.residual;
    }
}

TEST_CASE("explore is deterministic and thread-count independent") {
    CTermPtr m = load_main("bell.vqpl");
    ExploreReport a = explore(Program{m}, 60, {}, 1);
    ExploreReport b = explore(Program{m}, 60, {}, 1);
    ExploreReport c = explore(Program{m}, 60, {}, 4);
    CHECK(a.dist == b.dist);
    CHECK(a.dist == c.dist);
    CHECK(a.residual == c.residual);
    CHECK(a.nodes_expanded == c.nodes_expanded);
}

TEST_CASE("sample") {
    SourceFile empty;
    SUBCASE("values sample to themselves") {
        SampleResult r = sample(Program{cunit()}, 123, 10);
        REQUIRE(r.value.has_value());
        CHECK(program_display(*r.value) == "()");
    }
    SUBCASE("a diverging program times out") {
        CTermPtr m = load_main("omega.vqpl");
        SampleResult r = sample(Program{m}, 0, 100);
        CHECK(!r.value.has_value());
    }
    SUBCASE("same seed, same trace") {
        CTermPtr m = load_main("rus.vqpl");
        for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
            SampleResult r1 = sample(Program{m}, seed, 5000);
            SampleResult r2 = sample(Program{m}, seed, 5000);
            REQUIRE(r1.value.has_value());
            CHECK(program_key(*r1.value) == program_key(*r2.value));
            CHECK(r1.steps == r2.steps);
        }
    }
    SUBCASE("coin frequencies concentrate") {
        CTermPtr m = parse_cterm_text(empty, "coin 0.5");
        int tt = 0;
        const int n = 100000;
        for (int s = 0; s < n; s++) {
            SampleResult r = sample(Program{m}, static_cast<std::uint64_t>(s), 100);
            REQUIRE(r.value.has_value());
            if (program_display(*r.value) == "tt") tt++;
        }
        double freq = static_cast<double>(tt) / n;
        CHECK(std::abs(freq - 0.5) < 0.01); // 3 sigma is about 0.0047
    }
}

TEST_CASE("sampler agrees with explore on the bundled programs") {
    // 4-sigma binomial bounds per outcome.
    for (const char* name : {"coin.vqpl", "bell.vqpl", "initlift.vqpl", "rus.vqpl"}) {
        CTermPtr m = load_main(name);
        ExploreReport rep = explore(m, 200);
        REQUIRE(rep.dist.size() <= 8);
        const int n = 100000;
        std::map<std::string, int> counts;
        for (int s = 0; s < n; s++) {
            SampleResult r = sample(Program{m}, static_cast<std::uint64_t>(s), 2000);
            REQUIRE(r.value.has_value());
            counts[program_key(*r.value)]++;
        }
        for (const auto& [k, p] : rep.dist.entries()) {
            double freq = static_cast<double>(counts[k]) / n;
            double sigma = std::sqrt(p * (1 - p) / n);
            CHECK_MESSAGE(std::abs(freq - p) <= 4 * sigma + 1e-9,
                          name << " outcome " << k << ": freq " << freq << " vs p " << p);
        }
    }
}
