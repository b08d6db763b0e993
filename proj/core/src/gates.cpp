#include "vqpl/gates.hpp"

#include <cmath>
#include <cstdio>

namespace vqpl {

namespace {

const Complex I_UNIT{0.0, 1.0};

Matrix mat2(Complex a, Complex b, Complex c, Complex d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

} // namespace

const char* gate_name_str(GateName n) {
    switch (n) {
    case GateName::H: return "H";
    case GateName::X: return "X";
    case GateName::Y: return "Y";
    case GateName::Z: return "Z";
    case GateName::S: return "S";
    case GateName::T: return "T";
    case GateName::CNOT: return "CNOT";
    case GateName::CZ: return "CZ";
    case GateName::SWAP: return "SWAP";
    case GateName::RX: return "RX";
    case GateName::RY: return "RY";
    case GateName::RZ: return "RZ";
    case GateName::PHASE: return "PHASE";
    case GateName::CUSTOM: return "custom";
    }
    return "?";
}

bool is_unitary(const Matrix& u, double tol) {
    if (u.rows() != u.cols() || u.rows() == 0) return false;
    Matrix d = u * u.adjoint() - Matrix::Identity(u.rows(), u.cols());
    return d.cwiseAbs().maxCoeff() <= tol;
}

static GateSpec make(GateName n, std::vector<double> params, int arity, Matrix m) {
    if (!is_unitary(m))
        throw NotUnitaryError(std::string("gate ") + gate_name_str(n) + " matrix is not unitary");
    GateSpec g;
    g.name = n;
    g.params = std::move(params);
    g.arity = arity;
    g.matrix = std::move(m);
    return g;
}

GateSpec GateSpec::named(GateName n) {
    const double s = 1.0 / std::sqrt(2.0);
    switch (n) {
    case GateName::H: return make(n, {}, 1, mat2(s, s, s, -s));
    case GateName::X: return make(n, {}, 1, mat2(0, 1, 1, 0));
    case GateName::Y: return make(n, {}, 1, mat2(0, -I_UNIT, I_UNIT, 0));
    case GateName::Z: return make(n, {}, 1, mat2(1, 0, 0, -1));
    case GateName::S: return make(n, {}, 1, mat2(1, 0, 0, I_UNIT));
    case GateName::T: return make(n, {}, 1, mat2(1, 0, 0, std::exp(I_UNIT * (M_PI / 4.0))));
    case GateName::CNOT: {
        Matrix m = Matrix::Zero(4, 4);
        m(0, 0) = 1; m(1, 1) = 1; m(2, 3) = 1; m(3, 2) = 1;
        return make(n, {}, 2, m);
    }
    case GateName::CZ: {
        Matrix m = Matrix::Identity(4, 4);
        m(3, 3) = -1;
        return make(n, {}, 2, m);
    }
    case GateName::SWAP: {
        Matrix m = Matrix::Zero(4, 4);
        m(0, 0) = 1; m(1, 2) = 1; m(2, 1) = 1; m(3, 3) = 1;
        return make(n, {}, 2, m);
    }
    default:
        throw std::invalid_argument("gate requires parameters or a custom matrix");
    }
}

GateSpec GateSpec::rotation(GateName n, double angle) {
    const double c = std::cos(angle / 2.0), s = std::sin(angle / 2.0);
    switch (n) {
    case GateName::RX: return make(n, {angle}, 1, mat2(c, -I_UNIT * s, -I_UNIT * s, c));
    case GateName::RY: return make(n, {angle}, 1, mat2(c, -s, s, c));
    case GateName::RZ:
        return make(n, {angle}, 1,
                    mat2(std::exp(-I_UNIT * (angle / 2.0)), 0, 0, std::exp(I_UNIT * (angle / 2.0))));
    case GateName::PHASE: return make(n, {angle}, 1, mat2(1, 0, 0, std::exp(I_UNIT * angle)));
    default:
        throw std::invalid_argument("not a rotation gate");
    }
}

GateSpec GateSpec::custom(const Matrix& u, std::string) {
    int dim = static_cast<int>(u.rows());
    int arity = 0;
    while ((1 << arity) < dim) arity++;
    if ((1 << arity) != dim || dim < 2)
        throw std::invalid_argument("custom gate dimension must be 2^n, n >= 1");
    return make(GateName::CUSTOM, {}, arity, u);
}

std::string GateSpec::label() const {
    std::string s = gate_name_str(name);
    if (!params.empty()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "(%.17g)", params[0]);
        s += buf;
    }
    return s;
}

bool GateSpec::operator==(const GateSpec& o) const {
    if (name != o.name || arity != o.arity || params != o.params) return false;
    if (matrix.rows() != o.matrix.rows()) return false;
    return (matrix - o.matrix).cwiseAbs().maxCoeff() == 0.0;
}

} // namespace vqpl
