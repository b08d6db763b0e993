#pragma once

#include "vqpl/ast.hpp"
#include "vqpl/dist.hpp"

#include <cstdint>
#include <optional>
#include <variant>

namespace vqpl {

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Signals a preservation/progress bug: no rule applies to a non-value.
struct Stuck : EvalError {
    using EvalError::EvalError;
};
struct NodeBudgetExceeded : EvalError {
    using EvalError::EvalError;
};

struct EvalOptions {
    int max_qubits = kDefaultMaxQubits;
    long node_budget = 1'000'000;
    double prune_eps = 1e-15; // branch probabilities below this are dropped
};

// A program point: a closed classical term or a closed configuration.
using Program = std::variant<CTermPtr, Configuration>;

bool is_terminal(const Program& p);
std::string program_key(const Program& p);
std::string program_display(const Program& p);

// One step of the classical reduction relation. Empty result iff m is a
// value. Probabilities sum to 1; at most two successors (measurement).
// `fresh` numbers the quantum variables allocated by `new`.
std::vector<std::pair<double, CTermPtr>> step_classical(const CTermPtr& m, std::uint64_t& fresh,
                                                        const EvalOptions& opts = {});

std::vector<std::pair<double, Configuration>> step_config(const Configuration& c,
                                                          std::uint64_t& fresh,
                                                          const EvalOptions& opts = {});

std::vector<std::pair<double, Program>> step_program(const Program& p, std::uint64_t& fresh,
                                                     const EvalOptions& opts = {});

struct ExploreReport {
    SubDist dist;       // terminal mass, keyed by canonical value form
    double residual;    // mass not yet terminated at the step bound
    int steps_used;
    long nodes_expanded;
    std::map<std::string, Program> reps; // representative value per key
};

// Breadth-first expansion of the weighted reduction tree to depth max_steps.
// threads > 1 fans the frontier out across workers; results are merged in
// frontier order, so the report is identical for any thread count.
ExploreReport explore(const Program& p, int max_steps, const EvalOptions& opts = {},
                      int threads = 1);
ExploreReport explore(const CTermPtr& m, int max_steps, const EvalOptions& opts = {},
                      int threads = 1);

struct SampleResult {
    std::optional<Program> value; // empty on timeout
    int steps = 0;
};

// Follows a single reduction path, resolving measurements with a named,
// documented PRNG: std::mt19937_64 seeded with `seed`; each draw takes the
// top 53 bits of one output as a uniform double in [0,1), and branch 0 is
// taken when the draw is below its probability. Same seed, same trace.
SampleResult sample(const Program& p, std::uint64_t seed, int max_steps,
                    const EvalOptions& opts = {});

} // namespace vqpl
