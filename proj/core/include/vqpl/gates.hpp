#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace vqpl {

using Matrix = Eigen::MatrixXcd;
using Complex = std::complex<double>;

enum class GateName { H, X, Y, Z, S, T, CNOT, CZ, SWAP, RX, RY, RZ, PHASE, CUSTOM };

const char* gate_name_str(GateName n);

// A unitary constant. Named gates precompute their matrix at construction so
// downstream code never branches on the name; CUSTOM gates supply one directly.
// The matrix must satisfy ||U U+ - I||_inf <= 1e-9.
struct GateSpec {
    GateName name = GateName::CUSTOM;
    std::vector<double> params; // rotation angles, radians
    int arity = 1;
    Matrix matrix;

    static GateSpec named(GateName n);                 // fixed gates
    static GateSpec rotation(GateName n, double angle); // RX/RY/RZ/PHASE
    static GateSpec custom(const Matrix& u, std::string label = "custom");

    std::string label() const; // e.g. "H", "RY(1.5708)", used by the printer

    bool operator==(const GateSpec& o) const;
};

// Thrown when a supposed unitary fails the unitarity tolerance.
struct NotUnitaryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

bool is_unitary(const Matrix& u, double tol = 1e-9);

} // namespace vqpl
