#include "vqpl/qstate.hpp"

#include "vqpl/json_io.hpp"

#include <doctest.h>

#include <random>

using namespace vqpl;

namespace {

// Independent oracle: builds the full 2^n x 2^n operator sigma (U (x) I)
// sigma^-1 with explicit permutation matrices and multiplies it out, then
// checks the strided implementation against it.
Matrix full_operator(int n, const std::vector<int>& targets, const Matrix& u) {
    const int dim = 1 << n;
    const int k = static_cast<int>(targets.size());

    // sigma sends logical position i (of the gate) to qubit targets[i]; fill
    // the remaining positions with the unused qubits in ascending order.
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
    for (int i = 0; i < k; i++) {
        perm[static_cast<std::size_t>(i)] = targets[static_cast<std::size_t>(i)];
        used[static_cast<std::size_t>(targets[static_cast<std::size_t>(i)])] = true;
    }
    int next = k;
    for (int q = 1; q <= n; q++)
        if (!used[static_cast<std::size_t>(q)]) perm[static_cast<std::size_t>(next++)] = q;

    // P maps |b_1..b_n> (logical) to the physical layout: physical qubit
    // perm[i] carries logical position i+1.
    Matrix p = Matrix::Zero(dim, dim);
    for (int b = 0; b < dim; b++) {
        int phys = 0;
        for (int i = 0; i < n; i++) {
            int bit = (b >> (n - 1 - i)) & 1;
            if (bit) phys |= 1 << (n - perm[static_cast<std::size_t>(i)]);
        }
        p(phys, b) = 1.0;
    }

    Matrix rest = Matrix::Identity(dim / u.rows(), dim / u.rows());
    Matrix big = Matrix::Zero(dim, dim);
    for (int i = 0; i < u.rows(); i++)
        for (int j = 0; j < u.cols(); j++)
            big.block(i * rest.rows(), j * rest.cols(), rest.rows(), rest.cols()) =
                u(i, j) * rest;
    return p * big * p.transpose();
}

StateVector ref_apply(const StateVector& s, const std::vector<int>& targets, const GateSpec& g) {
    Matrix op = full_operator(s.num_qubits(), targets, g.matrix);
    std::vector<Complex> out(s.dim(), Complex{0, 0});
    for (std::size_t r = 0; r < s.dim(); r++)
        for (std::size_t c = 0; c < s.dim(); c++)
            out[r] += op(static_cast<int>(r), static_cast<int>(c)) * s.amp(c);
    return StateVector::from_amplitudes(s.num_qubits(), std::move(out));
}

StateVector random_state(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> g;
    std::vector<Complex> amps(std::size_t{1} << n);
    double norm2 = 0;
    for (auto& a : amps) {
        a = Complex{g(rng), g(rng)};
        norm2 += std::norm(a);
    }
    double inv = 1.0 / std::sqrt(norm2);
    for (auto& a : amps) a *= inv;
    return StateVector::from_amplitudes(n, std::move(amps));
}

GateSpec random_gate(std::mt19937_64& rng) {
    switch (rng() % 6) {
    case 0: return GateSpec::named(GateName::H);
    case 1: return GateSpec::named(GateName::X);
    case 2: return GateSpec::named(GateName::T);
    case 3: return GateSpec::rotation(GateName::RY, 0.1 + 0.001 * static_cast<double>(rng() % 1000));
    case 4: return GateSpec::named(GateName::CNOT);
    default: return GateSpec::named(GateName::SWAP);
    }
}

} // namespace

TEST_CASE("named gates are unitary and have the expected arity") {
    for (GateName n : {GateName::H, GateName::X, GateName::Y, GateName::Z, GateName::S,
                       GateName::T, GateName::CNOT, GateName::CZ, GateName::SWAP}) {
        GateSpec g = GateSpec::named(n);
        CHECK(is_unitary(g.matrix));
        CHECK(g.matrix.rows() == (1 << g.arity));
    }
    CHECK(is_unitary(GateSpec::rotation(GateName::RY, 1.234).matrix));
    Matrix bad = Matrix::Zero(2, 2);
    bad(0, 0) = 2.0;
    CHECK_THROWS_AS(GateSpec::custom(bad), NotUnitaryError);
}

TEST_CASE("apply_unitary basics") {
    StateVector zero = StateVector::basis(1, 0);
    SUBCASE("X on |0> gives |1>") {
        StateVector s = apply_unitary(zero, {1}, GateSpec::named(GateName::X));
        CHECK(std::abs(s.amp(0)) == doctest::Approx(0.0));
        CHECK(std::abs(s.amp(1) - 1.0) == doctest::Approx(0.0));
    }
    SUBCASE("H on |0> gives (|0>+|1>)/sqrt2") {
        StateVector s = apply_unitary(zero, {1}, GateSpec::named(GateName::H));
        const double r = 1.0 / std::sqrt(2.0);
        CHECK(std::abs(s.amp(0) - r) < 1e-12);
        CHECK(std::abs(s.amp(1) - r) < 1e-12);
    }
    SUBCASE("T on each qubit of |111> gives the phase e^{i 3 pi / 4}") {
        StateVector s = StateVector::basis(3, 7);
        for (int q = 1; q <= 3; q++) s = apply_unitary(s, {q}, GateSpec::named(GateName::T));
        Complex expected = std::exp(Complex{0.0, 3.0 * M_PI / 4.0});
        CHECK(std::abs(s.amp(7) - expected) < 1e-9);
        for (int i = 0; i < 7; i++) CHECK(std::abs(s.amp(static_cast<std::size_t>(i))) == 0.0);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(apply_unitary(zero, {2}, GateSpec::named(GateName::X)), QStateError);
        StateVector two = StateVector::basis(2, 0);
        CHECK_THROWS_AS(apply_unitary(two, {1, 1}, GateSpec::named(GateName::CNOT)), QStateError);
    }
}

TEST_CASE("apply_unitary agrees with the explicit-permutation oracle") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 200; trial++) {
        int n = 1 + static_cast<int>(rng() % 4);
        GateSpec g = random_gate(rng);
        if (g.arity > n) continue;
        std::vector<int> targets;
        while (static_cast<int>(targets.size()) < g.arity) {
            int t = 1 + static_cast<int>(rng() % static_cast<unsigned>(n));
            if (std::find(targets.begin(), targets.end(), t) == targets.end())
                targets.push_back(t);
        }
        StateVector s = random_state(rng, n);
        StateVector fast = apply_unitary(s, targets, g);
        StateVector slow = ref_apply(s, targets, g);
        CHECK(fast.max_abs_diff(slow) < 1e-12);
    }
}

TEST_CASE("norm preservation over random gates and states") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 1000; trial++) {
        int n = 1 + static_cast<int>(rng() % 4);
        GateSpec g = random_gate(rng);
        if (g.arity > n) continue;
        std::vector<int> targets{1 + static_cast<int>(rng() % static_cast<unsigned>(n))};
        if (g.arity == 2) targets.push_back(targets[0] % n + 1);
        StateVector s = apply_unitary(random_state(rng, n), targets, g);
        CHECK(std::abs(s.norm() - 1.0) < 1e-9);
    }
}

TEST_CASE("unitary then its adjoint is the identity") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; trial++) {
        StateVector s = random_state(rng, 3);
        GateSpec g = random_gate(rng);
        std::vector<int> targets = g.arity == 1 ? std::vector<int>{2} : std::vector<int>{1, 3};
        GateSpec ginv = GateSpec::custom(g.matrix.adjoint());
        StateVector round = apply_unitary(apply_unitary(s, targets, g), targets, ginv);
        CHECK(round.max_abs_diff(s) < 1e-9);
    }
}

TEST_CASE("alloc_qubit") {
    SUBCASE("from the scalar state") {
        auto [s, idx] = alloc_qubit(StateVector{}, 0);
        CHECK(idx == 1);
        CHECK(s.num_qubits() == 1);
        CHECK(std::abs(s.amp(0) - 1.0) == 0.0);
    }
    SUBCASE("|1> extended by |1> is |11>") {
        auto [s, idx] = alloc_qubit(StateVector::basis(1, 1), 1);
        CHECK(idx == 2);
        CHECK(std::abs(s.amp(3) - 1.0) == 0.0);
    }
    SUBCASE("|+> extended by |0>") {
        const double r = 1.0 / std::sqrt(2.0);
        StateVector plus = StateVector::from_amplitudes(1, {r, r});
        auto [s, idx] = alloc_qubit(plus, 0);
        CHECK(idx == 2);
        CHECK(std::abs(s.amp(0) - r) < 1e-12); // |00>
        CHECK(std::abs(s.amp(2) - r) < 1e-12); // |10>
        CHECK(std::abs(s.amp(1)) == 0.0);
        CHECK(std::abs(s.amp(3)) == 0.0);
    }
    SUBCASE("capacity") {
        StateVector s = StateVector::basis(3, 0);
        CHECK_THROWS_AS(alloc_qubit(s, 0, 3), CapacityExceeded);
    }
}

TEST_CASE("measure") {
    SUBCASE("|+> measures evenly and leaves the scalar state") {
        const double r = 1.0 / std::sqrt(2.0);
        auto bs = measure(StateVector::from_amplitudes(1, {r, r}), 1);
        REQUIRE(bs.size() == 2);
        CHECK(bs[0].probability == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(bs[1].probability == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(bs[0].outcome == 0);
        CHECK(bs[1].outcome == 1);
        CHECK(bs[0].state.num_qubits() == 0);
    }
    SUBCASE("deterministic outcome drops the zero branch") {
        auto bs = measure(StateVector::basis(1, 0), 1);
        REQUIRE(bs.size() == 1);
        CHECK(bs[0].probability == 1.0);
        CHECK(bs[0].outcome == 0);
    }
    SUBCASE("0.6|00> + 0.8|11>, measuring qubit 1") {
        StateVector s = StateVector::from_amplitudes(2, {0.6, 0, 0, 0.8});
        auto bs = measure(s, 1);
        REQUIRE(bs.size() == 2);
        CHECK(bs[0].probability == doctest::Approx(0.36).epsilon(1e-12));
        CHECK(bs[1].probability == doctest::Approx(0.64).epsilon(1e-12));
        CHECK(std::abs(bs[0].state.amp(0) - 1.0) < 1e-12); // |0>
        CHECK(std::abs(bs[1].state.amp(1) - 1.0) < 1e-12); // |1>
    }
    SUBCASE("completeness on random states") {
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 200; trial++) {
            int n = 1 + static_cast<int>(rng() % 4);
            int j = 1 + static_cast<int>(rng() % static_cast<unsigned>(n));
            auto bs = measure(random_state(rng, n), j);
            double tot = 0;
            for (const auto& b : bs) {
                tot += b.probability;
                CHECK(std::abs(b.state.norm() - 1.0) < 1e-9);
            }
            CHECK(std::abs(tot - 1.0) < 1e-12);
        }
    }
    SUBCASE("meas after alloc returns the allocated bit with probability 1") {
        for (int bit : {0, 1}) {
            std::mt19937_64 rng(17);
            StateVector base = random_state(rng, 2);
            auto [s, idx] = alloc_qubit(base, bit);
            auto bs = measure(s, idx);
            REQUIRE(bs.size() == 1);
            CHECK(bs[0].outcome == bit);
            CHECK(bs[0].probability == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(bs[0].state.max_abs_diff(base) < 1e-9);
        }
    }
}

TEST_CASE("relink_after_removal") {
    CHECK(relink_after_removal({{"x", 1}, {"y", 3}}, 2) == Linking{{"x", 1}, {"y", 2}});
    CHECK(relink_after_removal({{"x", 1}}, 2) == Linking{{"x", 1}});
    CHECK(relink_after_removal({{"x", 3}, {"y", 1}}, 2) == Linking{{"x", 2}, {"y", 1}});
}

TEST_CASE("golden-state JSON fixtures round trip") {
    const char* bell = R"({"qubits": 2, "amps": [[0.7071067811865476, 0.0], [0.0, 0.0],
                            [0.0, 0.0], [0.7071067811865476, 0.0]]})";
    StateVector golden = state_from_json(Json::parse(bell));

    StateVector built = StateVector::basis(2, 0);
    built = apply_unitary(built, {1}, GateSpec::named(GateName::H));
    built = apply_unitary(built, {1, 2}, GateSpec::named(GateName::CNOT));
    CHECK(built.max_abs_diff(golden) < 1e-12);

    std::mt19937_64 rng(1);
    StateVector s = random_state(rng, 3);
    CHECK(state_from_json(state_to_json(s)).max_abs_diff(s) == 0.0);
}
