#pragma once

#include "vqpl/gates.hpp"

#include <complex>
#include <map>
#include <string>
#include <vector>

namespace vqpl {

struct QStateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CapacityExceeded : QStateError {
    using QStateError::QStateError;
};

// Pure state of n qubits as 2^n complex amplitudes. Qubit indices are 1-based
// and qubit 1 is the leftmost tensor factor (most significant bit of the
// amplitude index). n = 0 is the scalar state 1. Immutable by convention:
// operations return fresh vectors.
class StateVector {
  public:
    StateVector(); // scalar state
    static StateVector basis(int num_qubits, std::size_t basis_index);
    static StateVector from_amplitudes(int num_qubits, std::vector<Complex> amps);

    int num_qubits() const { return n_; }
    std::size_t dim() const { return amps_.size(); }
    const std::vector<Complex>& amplitudes() const { return amps_; }
    Complex amp(std::size_t i) const { return amps_[i]; }

    double norm() const;
    // Largest |a_i - b_i| over all amplitudes; states must have equal size.
    double max_abs_diff(const StateVector& other) const;
    // |<this|other>|^2, insensitive to global phase.
    double fidelity(const StateVector& other) const;

    bool operator==(const StateVector& o) const = default;

  private:
    int n_ = 0;
    std::vector<Complex> amps_;
};

// Injective map from quantum variable names to 1-based qubit positions.
using Linking = std::map<std::string, int>;

// One measurement outcome: probability, post-measurement state with the
// measured qubit deleted, and the observed bit.
struct Branch {
    double probability;
    StateVector state;
    int outcome; // 0 or 1
};

inline constexpr int kDefaultMaxQubits = 20;

// Applies g to the given distinct target qubits (g's i-th tensor factor acts
// on targets[i]). Index arithmetic is strided; no permutation matrices are
// materialised.
StateVector apply_unitary(const StateVector& s, const std::vector<int>& targets, const GateSpec& g);

// |psi> (x) |bit>; the new qubit is at position n+1. Throws CapacityExceeded
// past max_qubits.
std::pair<StateVector, int> alloc_qubit(const StateVector& s, int bit,
                                        int max_qubits = kDefaultMaxQubits);

// Born-rule measurement of qubit j. Surviving branches carry the projected,
// renormalised state of n-1 qubits; zero-probability branches are dropped.
std::vector<Branch> measure(const StateVector& s, int j);

// After deleting qubit `removed`, shifts every linked index above it down by
// one.
Linking relink_after_removal(const Linking& l, int removed);

} // namespace vqpl
