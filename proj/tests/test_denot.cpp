#include "vqpl/denot.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <random>

using namespace vqpl;
using namespace vqpl::test;

namespace {

Matrix random_density(std::mt19937_64& rng, int dim) {
    std::normal_distribution<double> g;
    Matrix a(dim, dim);
    for (int r = 0; r < dim; r++)
        for (int c = 0; c < dim; c++) a(r, c) = Complex{g(rng), g(rng)};
    Matrix rho = a * a.adjoint();
    return rho / rho.trace().real();
}

Matrix kroneckerish(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); i++)
        for (int j = 0; j < a.cols(); j++)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Choi matrix of the single-block component of a channel M_e -> M_d, in the
// Heisenberg representation stored by Superoperator.
Matrix choi(const Superoperator& s) {
    REQUIRE(s.dom().blocks.size() == 1);
    REQUIRE(s.cod().blocks.size() == 1);
    const int e = s.cod().blocks[0];
    const int d = s.dom().blocks[0];
    Matrix c = Matrix::Zero(e * d, e * d);
    for (int r = 0; r < e; r++)
        for (int cc = 0; cc < e; cc++) {
            BlockElem out = s.apply_heisenberg(BlockElem::basis(s.cod(), 0, r, cc));
            c.block(r * d, cc * d, d, d) = out.mats[0];
        }
    return c;
}

QTypePtr obs3() { return qt_sum(qt_unit(), qt_tensor(qt_bit(), qt_bit())); } // 5 values

} // namespace

TEST_CASE("interpretation of quantum types") {
    CHECK(interp_qtype(qt_qbit()) == FinAlg{{2}});
    CHECK(interp_qtype(qt_bit()) == FinAlg{{1, 1}});
    CHECK(interp_qtype(qt_tensor(qt_qbit(), qt_qbit())) == FinAlg{{4}});
    CHECK(interp_qtype(qt_sum(qt_qbit(), qt_unit())) == FinAlg{{2, 1}});
    CHECK(interp_qtype(qt_tensor(qt_bit(), qt_qbit())) == FinAlg{{2, 2}});
    CHECK_THROWS_AS(interp_qtype(qt_mu("X", qt_sum(qt_unit(), qt_var("X")))), UnsupportedMu);
}

TEST_CASE("primitive channel algebra") {
    SUBCASE("meas after new is the identity on bits") {
        Superoperator id2 = compose(meas_op(), new_op());
        CHECK(id2.max_abs_diff(Superoperator::identity(FinAlg{{1, 1}})) < 1e-15);
    }
    SUBCASE("X twice is the identity channel") {
        Superoperator x = unitary_op(GateSpec::named(GateName::X));
        CHECK(compose(x, x).max_abs_diff(Superoperator::identity(FinAlg::qubit())) < 1e-12);
    }
    SUBCASE("drop after attaching a state is the identity") {
        std::mt19937_64 rng(31);
        for (int k : {1, 2, 3}) {
            for (int trial = 0; trial < 10; trial++) {
                Matrix rho = random_density(rng, 1 << k);
                FinAlg a = FinAlg::qubit();
                Superoperator attach = tensor(Superoperator::identity(a), state_op(rho));
                Superoperator round =
                    compose(drop_op(a, k), attach.relabel(a, a.tensor(FinAlg::qubits(k))));
                CHECK(round.max_abs_diff(Superoperator::identity(a)) < 1e-12);
            }
        }
    }
    SUBCASE("trace is the terminal discard") {
        // tr after attaching a normalised state is the identity on scalars
        std::mt19937_64 rng(5);
        Matrix rho = random_density(rng, 4);
        Superoperator round = compose(tr_op(4), state_op(rho));
        CHECK(round.max_abs_diff(Superoperator::identity(FinAlg::scalar())) < 1e-12);
    }
}

TEST_CASE("ncpsu_check") {
    SUBCASE("unitary channels pass") {
        NcpsuReport r = ncpsu_check(unitary_op(GateSpec::named(GateName::H)));
        CHECK(r.ok);
        CHECK(r.min_choi_eig > -1e-12);
    }
    SUBCASE("the transpose map violates complete positivity with eigenvalue -1") {
        FinAlg m2 = FinAlg::qubit();
        Superoperator transpose = Superoperator::from_action(m2, m2, [](const BlockElem& e) {
            BlockElem out = e;
            out.mats[0] = e.mats[0].transpose().eval();
            return out;
        });
        NcpsuReport r = ncpsu_check(transpose);
        CHECK(!r.ok);
        CHECK(r.min_choi_eig == doctest::Approx(-1.0).epsilon(1e-9));
    }
    SUBCASE("scaling by 0.9 stays subunital") {
        Superoperator m = meas_op();
        Superoperator scaled = barycentre({{0.9, m}}, m.dom(), m.cod());
        CHECK(ncpsu_check(scaled).ok);
    }
    SUBCASE("a superunital map fails") {
        Superoperator m = meas_op();
        Superoperator doubled(m.dom(), m.cod(), 2.0 * m.hmat());
        CHECK(!ncpsu_check(doubled).ok);
    }
    SUBCASE("all primitives pass") {
        std::mt19937_64 rng(77);
        CHECK(ncpsu_check(meas_op()).ok);
        CHECK(ncpsu_check(new_op()).ok);
        CHECK(ncpsu_check(tr_op(3)).ok);
        CHECK(ncpsu_check(state_op(random_density(rng, 4))).ok);
        CHECK(ncpsu_check(drop_op(FinAlg{{1, 2}}, 2)).ok);
        for (GateName n : {GateName::H, GateName::T, GateName::CNOT})
            CHECK(ncpsu_check(unitary_op(GateSpec::named(n))).ok);
    }
}

TEST_CASE("barycentre") {
    Superoperator x = unitary_op(GateSpec::named(GateName::X));
    Superoperator id = Superoperator::identity(FinAlg::qubit());
    SUBCASE("dirac") {
        CHECK(barycentre({{1.0, x}}, x.dom(), x.cod()).max_abs_diff(x) == 0.0);
    }
    SUBCASE("empty is the zero channel") {
        Superoperator z = barycentre({}, x.dom(), x.cod());
        CHECK(z.hmat().cwiseAbs().maxCoeff() == 0.0);
        CHECK(ncpsu_check(z).ok);
    }
    SUBCASE("bit-flip channel: Choi is the average of the two Choi matrices") {
        Superoperator bf = barycentre({{0.5, x}, {0.5, id}}, x.dom(), x.cod());
        Matrix expect = 0.5 * (choi(x) + choi(id));
        CHECK((choi(bf) - expect).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(ncpsu_check(bf).ok);
        // and it acts like rho |-> (X rho X + rho)/2 on states
        std::mt19937_64 rng(13);
        Matrix rho = random_density(rng, 2);
        AlgState s{FinAlg::qubit(), {rho}};
        AlgState out = s.push_through(bf);
        Matrix xm = GateSpec::named(GateName::X).matrix;
        Matrix want = 0.5 * (xm * rho * xm.adjoint() + rho);
        CHECK((out.rho[0] - want).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("weights above one overflow") {
        CHECK_THROWS_AS(barycentre({{0.6, x}, {0.6, id}}, x.dom(), x.cod()), WeightOverflow);
    }
    SUBCASE("algebra map: barycentre of a convex sum is the convex sum of barycentres") {
        std::mt19937_64 rng(3);
        for (int t = 0; t < 50; t++) {
            std::uniform_real_distribution<double> u(0.0, 0.5);
            double w1 = u(rng), w2 = u(rng);
            Superoperator h = unitary_op(GateSpec::named(GateName::H));
            // nested: w1*(bary of {x}) + w2*(bary of {0.5 h, 0.5 id})
            Superoperator inner = barycentre({{0.5, h}, {0.5, id}}, x.dom(), x.cod());
            Superoperator nested = barycentre({{w1, x}, {w2, inner}}, x.dom(), x.cod());
            Superoperator flat = barycentre(
                {{w1, x}, {w2 * 0.5, h}, {w2 * 0.5, id}}, x.dom(), x.cod());
            CHECK(nested.max_abs_diff(flat) < 1e-12);
        }
    }
}

TEST_CASE("structural channels") {
    FinAlg bit{{1, 1}};
    FinAlg m2 = FinAlg::qubit();
    SUBCASE("swap is an involution") {
        Superoperator s = swap_op(bit, m2);
        Superoperator back = compose(swap_op(m2, bit), s);
        CHECK(back.max_abs_diff(Superoperator::identity(bit.tensor(m2))) == 0.0);
        CHECK(ncpsu_check(s).ok);
    }
    SUBCASE("a 3-cycle composes to the identity") {
        std::vector<FinAlg> fs{bit, m2, FinAlg{{1, 2}}};
        Superoperator rot = perm_op(fs, {1, 2, 0});
        std::vector<FinAlg> fs2{m2, FinAlg{{1, 2}}, bit};
        Superoperator rot2 = perm_op(fs2, {1, 2, 0});
        std::vector<FinAlg> fs3{FinAlg{{1, 2}}, bit, m2};
        Superoperator rot3 = perm_op(fs3, {1, 2, 0});
        Superoperator round = compose(rot3, compose(rot2, rot));
        CHECK(round.max_abs_diff(Superoperator::identity(tensor_many(fs))) == 0.0);
    }
    SUBCASE("swap acts correctly on product states") {
        std::mt19937_64 rng(8);
        Matrix r1 = random_density(rng, 2), r2 = random_density(rng, 3);
        AlgState s{FinAlg{{2}}.tensor(FinAlg{{3}}), {kroneckerish(r1, r2)}};
        AlgState out = s.push_through(swap_op(FinAlg{{2}}, FinAlg{{3}}));
        AlgState want{FinAlg{{3}}.tensor(FinAlg{{2}}), {kroneckerish(r2, r1)}};
        CHECK(out.max_abs_diff(want) < 1e-12);
    }
    SUBCASE("distributivity is a *-isomorphism") {
        Superoperator d = distrib(m2, bit, m2);
        CHECK(ncpsu_check(d).ok);
        // bijective on vec: the matrix is a permutation
        Matrix h = d.hmat();
        CHECK((h * h.transpose() - Matrix::Identity(h.rows(), h.rows()))
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
    }
}

TEST_CASE("interpretation of quantum terms") {
    SUBCASE("a variable is the identity channel") {
        Superoperator s = interp_qterm(qvar("x"), {{"x", qt_qbit()}});
        CHECK(s.max_abs_diff(Superoperator::identity(FinAlg::qubit())) == 0.0);
    }
    SUBCASE("meas x is the measurement channel") {
        Superoperator s = interp_qterm(qapp(cmeas(), qvar("x")), {{"x", qt_qbit()}});
        CHECK(s.max_abs_diff(meas_op()) < 1e-15);
    }
    SUBCASE("two-qubit lambdas match hand-built channels") {
        SourceFile empty;
        CTermPtr cnot_lam = parse_cterm_text(empty, "qfun (x : qbit, y : qbit) . CNOT (x (x) y)");
        Superoperator s = interp_value_channel(cnot_lam);
        CHECK(s.max_abs_diff(unitary_op(GateSpec::named(GateName::CNOT))) < 1e-12);

        CTermPtr split = parse_cterm_text(empty, "qfun (x : qbit, y : qbit) . (meas x) (x) y");
        Superoperator s2 = interp_value_channel(split);
        Superoperator want = tensor(meas_op(), Superoperator::identity(FinAlg::qubit()));
        CHECK(s2.max_abs_diff(want.relabel(s2.dom(), s2.cod())) < 1e-12);

        // the same with the context used in swapped order
        CTermPtr crossed = parse_cterm_text(empty, "qfun (x : qbit, y : qbit) . (meas y) (x) x");
        Superoperator s3 = interp_value_channel(crossed);
        Superoperator base = tensor(meas_op(), Superoperator::identity(FinAlg::qubit()));
        Superoperator want3 = compose(base.relabel(base.dom(), base.cod()),
                                      swap_op(FinAlg::qubit(), FinAlg::qubit()));
        CHECK(s3.max_abs_diff(want3.relabel(s3.dom(), s3.cod())) < 1e-12);
    }
    SUBCASE("probabilistic head: barycentre of the explored channels") {
        // (case coin 0.5 of ff => X | tt => identity) applied to x
        SourceFile empty;
        CTermPtr head = parse_cterm_text(
            empty, "case coin 0.5 of ff => X | tt => qfun (q : qbit) . q");
        Superoperator s = interp_qterm(qapp(head, qvar("x")), {{"x", qt_qbit()}});
        Superoperator x = unitary_op(GateSpec::named(GateName::X));
        Superoperator expect =
            barycentre({{0.5, x}, {0.5, Superoperator::identity(FinAlg::qubit())}},
                       x.dom(), x.cod());
        CHECK(s.max_abs_diff(expect) < 1e-12);
        Matrix avg = 0.5 * (choi(x) + choi(Superoperator::identity(FinAlg::qubit())));
        CHECK((choi(s) - avg).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("interpreted terms pass the NCPSU check") {
        CTermPtr tele = load_main("teleport.vqpl");
        Superoperator chan = interp_value_channel(tele);
        CHECK(ncpsu_check(chan).ok);
        CHECK(chan.max_abs_diff(Superoperator::identity(FinAlg::qubit())) < 1e-9);
    }
    SUBCASE("recursive types are rejected by the oracle but still run") {
        CTermPtr ts = load_main("ts.vqpl");
        ExploreReport rep = explore(ts, 50);
        CHECK(rep.residual == 0.0); // evaluates fine
        CTermPtr v = std::get<CTermPtr>(rep.reps.begin()->second);
        CHECK_THROWS_AS(interp_value_channel(v), UnsupportedMu);
    }
}

TEST_CASE("semantic substitution laws on random terms") {
    // 50 random mu-free shapes: sequencing with *, let-tensor on a tensor
    // value, case on an injection value; each interpretation must agree with
    // the interpretation of the reduct (computed through substitution, a
    // different code path than the composite plumbing).
    std::mt19937_64 rng(2024);
    auto random_1q = [&](Ident v) -> QTermPtr {
        switch (rng() % 4) {
        case 0: return qvar(v);
        case 1: return qapp(cgate(GateSpec::named(GateName::H)), qvar(v));
        case 2: return qapp(cgate(GateSpec::named(GateName::X)), qvar(v));
        default:
            return qapp(cgate(GateSpec::rotation(GateName::RY,
                                                 0.01 * static_cast<double>(rng() % 600))),
                        qvar(v));
        }
    };
    for (int trial = 0; trial < 50; trial++) {
        std::vector<QBinder> gamma{{"a", qt_qbit()}, {"b", qt_qbit()}};
        // seq: * ; r  ==  r
        {
            QTermPtr r = qtensor(random_1q("a"), random_1q("b"));
            Superoperator lhs = interp_qterm(qseq(qstar(), r), gamma);
            Superoperator rhs = interp_qterm(r, gamma);
            CHECK(lhs.max_abs_diff(rhs) < 1e-12);
        }
        // let x (x) y = a (x) b in r  ==  r[a/x, b/y]
        {
            QTermPtr body = qtensor(random_1q("x"), random_1q("y"));
            QTermPtr let = qlet_tensor("x", "y", qtensor(qvar("a"), qvar("b")), body);
            QTermPtr reduct = subst_qvar(subst_qvar(body, "x", qvar("a")), "y", qvar("b"));
            Superoperator lhs = interp_qterm(let, gamma);
            Superoperator rhs = interp_qterm(reduct, gamma);
            CHECK(lhs.max_abs_diff(rhs) < 1e-12);
        }
        // case inl v of inl x => r1 | inr y => r2  ==  r1[v/x]
        {
            QTypePtr sum = qt_sum(qt_qbit(), qt_qbit());
            QTermPtr r1 = qtensor(random_1q("x"), random_1q("b"));
            QTermPtr r2 = qtensor(qapp(cgate(GateSpec::named(GateName::Z)), qvar("y")),
                                  random_1q("b"));
            QTermPtr scrut = qin1(sum, random_1q("a"));
            QTermPtr cs = qcase(scrut, "x", r1, "y", r2);
            Superoperator lhs = interp_qterm(cs, gamma);
            QTermPtr reduct = subst_qvar(r1, "x", scrut->a);
            Superoperator rhs = interp_qterm(reduct, gamma);
            CHECK(lhs.max_abs_diff(rhs) < 1e-12);
        }
    }
}

TEST_CASE("interpretation of configurations") {
    SUBCASE("identity term keeps the pure state") {
        Configuration c{StateVector::basis(1, 0), {{"x", 1}}, qvar("x")};
        AlgState s = interp_config(c);
        CHECK(s.alg == FinAlg{{2}});
        Matrix want = Matrix::Zero(2, 2);
        want(0, 0) = 1.0;
        CHECK((s.rho[0] - want).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("measuring |+> gives the uniform state on bits") {
        const double r = 1.0 / std::sqrt(2.0);
        Configuration c{StateVector::from_amplitudes(1, {r, r}), {{"x", 1}},
                        qapp(cmeas(), qvar("x"))};
        AlgState s = interp_config(c);
        CHECK(s.alg == FinAlg{{1, 1}});
        CHECK(s.rho[0](0, 0).real() == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(s.rho[1](0, 0).real() == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("init tt is the Dirac state at tt") {
        Configuration c{StateVector{}, {}, qinit(c_tt())};
        AlgState s = interp_config(c);
        CHECK(s.alg == FinAlg{{1, 1}});
        CHECK(s.rho[0](0, 0).real() == doctest::Approx(0.0));
        CHECK(s.rho[1](0, 0).real() == doctest::Approx(1.0));
    }
    SUBCASE("the linking permutation is honoured") {
        // |01> with x linked to qubit 2: measuring x must give outcome 1.
        Configuration c{StateVector::basis(2, 1), {{"x", 2}}, qapp(cmeas(), qvar("x"))};
        AlgState s = interp_config(c);
        // algebra bit (x) qbit: blocks [2, 2]; outcome tt block carries |0><0|
        CHECK(s.alg == FinAlg{{2, 2}});
        CHECK(std::abs(s.rho[0].trace()) < 1e-12);
        CHECK(s.rho[1](0, 0).real() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("r isomorphism") {
    SUBCASE("spec examples") {
        AlgState s = AlgState::zero(FinAlg{{1, 1}});
        s.rho[0](0, 0) = 1.0;
        SubDist d = r_iso(s, qt_bit());
        CHECK(d.at(canonical_key(c_ff())) == 1.0);
        CHECK(d.size() == 1);

        AlgState h = AlgState::zero(FinAlg{{1, 1}});
        h.rho[0](0, 0) = 0.5;
        h.rho[1](0, 0) = 0.5;
        SubDist dh = r_iso(h, qt_bit());
        CHECK(dh.at(canonical_key(c_ff())) == 0.5);
        CHECK(dh.at(canonical_key(c_tt())) == 0.5);

        AlgState back = r_inv(SubDist::dirac(canonical_key(c_tt())), ct_bool());
        CHECK(back.rho[0](0, 0).real() == 0.0);
        CHECK(back.rho[1](0, 0).real() == 1.0);
    }
    SUBCASE("round trips on random subdistributions") {
        std::mt19937_64 rng(606);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        CTypePtr obs = obs_translate_type(obs3());
        std::vector<CTermPtr> values = enumerate_observable_values(obs);
        for (int trial = 0; trial < 100; trial++) {
            SubDist d;
            double budget = u(rng);
            for (const auto& v : values) {
                double w = u(rng) * budget / static_cast<double>(values.size());
                if (w > 0) d.add(canonical_key(v), w);
            }
            AlgState s = r_inv(d, obs);
            SubDist back = r_iso(s, obs3());
            CHECK(max_pointwise_diff(back, d) < 1e-12);
            AlgState s2 = r_inv(back, obs);
            CHECK(s.max_abs_diff(s2) < 1e-12);
        }
    }
    SUBCASE("r is linear") {
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> u(0.0, 0.5);
        for (int trial = 0; trial < 50; trial++) {
            AlgState s1 = AlgState::zero(FinAlg{{1, 1}});
            AlgState s2 = AlgState::zero(FinAlg{{1, 1}});
            s1.rho[0](0, 0) = u(rng);
            s1.rho[1](0, 0) = u(rng);
            s2.rho[0](0, 0) = u(rng);
            s2.rho[1](0, 0) = u(rng);
            double w1 = u(rng), w2 = u(rng);
            AlgState mix = s1.scaled(w1).plus(s2.scaled(w2));
            SubDist lhs = r_iso(mix, qt_bit());
            SubDist rhs = convex_sum({w1, w2}, {r_iso(s1, qt_bit()), r_iso(s2, qt_bit())});
            CHECK(max_pointwise_diff(lhs, rhs) < 1e-12);
        }
    }
    SUBCASE("Dirac distributions correspond to star-homomorphisms") {
        CTypePtr obs = obs_translate_type(obs3());
        for (const auto& v : enumerate_observable_values(obs)) {
            AlgState s = r_inv(SubDist::dirac(canonical_key(v)), obs);
            // multiplicative: weights form an indicator vector
            int ones = 0;
            for (const auto& m : s.rho) {
                double w = m(0, 0).real();
                CHECK((std::abs(w) < 1e-12 || std::abs(w - 1.0) < 1e-12));
                if (std::abs(w - 1.0) < 1e-12) ones++;
            }
            CHECK(ones == 1);
        }
    }
    SUBCASE("r rejects non-commutative algebras") {
        AlgState s = AlgState::zero(FinAlg{{2}});
        CHECK_THROWS_AS(r_iso(s, qt_qbit()), NonCommutative);
    }
}

TEST_CASE("adequacy on small programs") {
    SUBCASE("fair coin") {
        CTermPtr m = load_main("coin.vqpl");
        AdequacyReport rep = adequacy_check(Program{m}, 50, 1e-9);
        CHECK(rep.pass);
        CHECK(rep.tv < 1e-9);
        CHECK(rep.residual == 0.0);
        CHECK(rep.soundness_max_dev < 1e-12);
    }
    SUBCASE("a value compares exactly") {
        AdequacyReport rep = adequacy_check(Program{cunit()}, 5, 1e-12);
        CHECK(rep.pass);
        CHECK(rep.tv == 0.0);
    }
    SUBCASE("init/lift round trip") {
        CTermPtr m = load_main("initlift.vqpl");
        AdequacyReport rep = adequacy_check(Program{m}, 60, 1e-9);
        CHECK(rep.pass);
        CHECK(rep.tv < 1e-9);
        CHECK(rep.soundness_max_dev < 1e-12);
    }
    SUBCASE("Bell measurement") {
        CTermPtr m = load_main("bell.vqpl");
        AdequacyReport rep = adequacy_check(Program{m}, 60, 1e-9);
        CHECK(rep.pass);
        CHECK(rep.residual == 0.0);
        CHECK(rep.soundness_max_dev < 1e-12);
        CTermPtr both = cpair(c_tt(), c_tt());
        CHECK(rep.denotational.at(canonical_key(both)) == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("auxiliary qubits are dropped consistently on both sides") {
        // measuring half of an entangled pair, the other half discarded
        StateVector s = StateVector::from_amplitudes(2, {0.6, 0, 0, 0.8});
        Configuration c{s, {{"x", 1}}, qapp(cmeas(), qvar("x"))};
        AdequacyReport rep = adequacy_check(Program{c}, 10, 1e-9);
        CHECK(rep.pass);
        CHECK(rep.denotational.at(canonical_key(c_ff())) ==
              doctest::Approx(0.36).epsilon(1e-12));
        CHECK(rep.denotational.at(canonical_key(c_tt())) ==
              doctest::Approx(0.64).epsilon(1e-12));
        CHECK(max_pointwise_diff(rep.denotational, rep.operational) < 1e-12);
    }
}
