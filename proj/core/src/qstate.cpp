#include "vqpl/qstate.hpp"

#include <cmath>

namespace vqpl {

StateVector::StateVector() : n_(0), amps_{Complex{1.0, 0.0}} {}

StateVector StateVector::basis(int num_qubits, std::size_t basis_index) {
    StateVector s;
    s.n_ = num_qubits;
    s.amps_.assign(std::size_t{1} << num_qubits, Complex{0.0, 0.0});
    s.amps_.at(basis_index) = Complex{1.0, 0.0};
    return s;
}

StateVector StateVector::from_amplitudes(int num_qubits, std::vector<Complex> amps) {
    if (amps.size() != (std::size_t{1} << num_qubits))
        throw QStateError("amplitude vector has wrong length");
    StateVector s;
    s.n_ = num_qubits;
    s.amps_ = std::move(amps);
    return s;
}

double StateVector::norm() const {
    double t = 0.0;
    for (const auto& a : amps_) t += std::norm(a);
    return std::sqrt(t);
}

double StateVector::max_abs_diff(const StateVector& other) const {
    if (amps_.size() != other.amps_.size())
        throw QStateError("state dimension mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < amps_.size(); i++)
        m = std::max(m, std::abs(amps_[i] - other.amps_[i]));
    return m;
}

double StateVector::fidelity(const StateVector& other) const {
    if (amps_.size() != other.amps_.size())
        throw QStateError("state dimension mismatch");
    Complex ip{0.0, 0.0};
    for (std::size_t i = 0; i < amps_.size(); i++)
        ip += std::conj(amps_[i]) * other.amps_[i];
    return std::norm(ip);
}

StateVector apply_unitary(const StateVector& s, const std::vector<int>& targets,
                          const GateSpec& g) {
    const int n = s.num_qubits();
    const int k = g.arity;
    if (static_cast<int>(targets.size()) != k)
        throw QStateError("target count does not match gate arity");
    for (std::size_t i = 0; i < targets.size(); i++) {
        if (targets[i] < 1 || targets[i] > n) throw QStateError("qubit index out of range");
        for (std::size_t j = i + 1; j < targets.size(); j++)
            if (targets[i] == targets[j]) throw QStateError("duplicate target qubit");
    }

    // Bit position (from LSB) of 1-based qubit j: qubit 1 is the MSB.
    std::vector<int> shift(k);
    for (int i = 0; i < k; i++) shift[i] = n - targets[i];

    std::size_t free_mask = (std::size_t{1} << n) - 1;
    for (int i = 0; i < k; i++) free_mask &= ~(std::size_t{1} << shift[i]);

    const std::size_t local_dim = std::size_t{1} << k;
    std::vector<Complex> out(s.dim());
    std::vector<std::size_t> idx(local_dim);
    std::vector<Complex> local(local_dim);

    // Iterate over assignments of the non-target qubits.
    std::size_t base = 0;
    while (true) {
        for (std::size_t m = 0; m < local_dim; m++) {
            std::size_t index = base;
            for (int i = 0; i < k; i++)
                if (m & (std::size_t{1} << (k - 1 - i))) index |= std::size_t{1} << shift[i];
            idx[m] = index;
            local[m] = s.amp(index);
        }
        for (std::size_t r = 0; r < local_dim; r++) {
            Complex acc{0.0, 0.0};
            for (std::size_t c = 0; c < local_dim; c++) acc += g.matrix(r, c) * local[c];
            out[idx[r]] = acc;
        }
        if (base == free_mask) break;
        base = (base - free_mask) & free_mask; // next subset of free_mask
    }
    return StateVector::from_amplitudes(n, std::move(out));
}

std::pair<StateVector, int> alloc_qubit(const StateVector& s, int bit, int max_qubits) {
    const int n = s.num_qubits();
    if (n + 1 > max_qubits)
        throw CapacityExceeded("qubit capacity exceeded (" + std::to_string(max_qubits) + ")");
    std::vector<Complex> out(s.dim() * 2, Complex{0.0, 0.0});
    for (std::size_t i = 0; i < s.dim(); i++) out[2 * i + (bit ? 1 : 0)] = s.amp(i);
    return {StateVector::from_amplitudes(n + 1, std::move(out)), n + 1};
}

std::vector<Branch> measure(const StateVector& s, int j) {
    const int n = s.num_qubits();
    if (j < 1 || j > n) throw QStateError("measured qubit out of range");
    const int shift = n - j;
    const std::size_t bit = std::size_t{1} << shift;

    double p1 = 0.0;
    for (std::size_t i = 0; i < s.dim(); i++)
        if (i & bit) p1 += std::norm(s.amp(i));
    double p0 = 0.0;
    for (std::size_t i = 0; i < s.dim(); i++)
        if (!(i & bit)) p0 += std::norm(s.amp(i));

    std::vector<Branch> out;
    const std::size_t low_mask = bit - 1;
    for (int b = 0; b < 2; b++) {
        double p = b ? p1 : p0;
        if (p <= 0.0) continue;
        std::vector<Complex> amps(s.dim() / 2);
        const double scale = 1.0 / std::sqrt(p);
        for (std::size_t i = 0; i < amps.size(); i++) {
            std::size_t src = ((i & ~low_mask) << 1) | (b ? bit : 0) | (i & low_mask);
            amps[i] = s.amp(src) * scale;
        }
        out.push_back(Branch{p, StateVector::from_amplitudes(n - 1, std::move(amps)), b});
    }
    return out;
}

Linking relink_after_removal(const Linking& l, int removed) {
    Linking out;
    for (const auto& [name, idx] : l) out[name] = idx > removed ? idx - 1 : idx;
    return out;
}

} // namespace vqpl
