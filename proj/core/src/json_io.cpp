#include "vqpl/json_io.hpp"

namespace vqpl {

Json state_to_json(const StateVector& s) {
    Json amps = Json::array();
    for (std::size_t i = 0; i < s.dim(); i++)
        amps.push_back(Json::array({s.amp(i).real(), s.amp(i).imag()}));
    return Json{{"qubits", s.num_qubits()}, {"amps", amps}};
}

StateVector state_from_json(const Json& j) {
    int n = j.at("qubits").get<int>();
    std::vector<Complex> amps;
    for (const auto& a : j.at("amps"))
        amps.emplace_back(a.at(0).get<double>(), a.at(1).get<double>());
    return StateVector::from_amplitudes(n, std::move(amps));
}

Json explore_report_to_json(const ExploreReport& rep) {
    // Merge by display string; the map keeps display order stable.
    std::map<std::string, double> shown;
    for (const auto& [key, p] : rep.dist.entries())
        shown[program_display(rep.reps.at(key))] += p;
    Json outcomes = Json::array();
    for (const auto& [v, p] : shown) outcomes.push_back(Json{{"value", v}, {"prob", p}});
    return Json{{"outcomes", outcomes},
                {"residual", rep.residual},
                {"steps", rep.steps_used},
                {"nodes", rep.nodes_expanded}};
}

Json subdist_to_json(const SubDist& d) {
    Json out = Json::object();
    for (const auto& [k, p] : d.entries()) out[k] = p;
    return out;
}

Json algstate_to_json(const AlgState& s) {
    Json blocks = Json::array();
    for (std::size_t i = 0; i < s.rho.size(); i++) {
        Json rows = Json::array();
        for (int r = 0; r < s.rho[i].rows(); r++) {
            Json row = Json::array();
            for (int c = 0; c < s.rho[i].cols(); c++)
                row.push_back(Json::array({s.rho[i](r, c).real(), s.rho[i](r, c).imag()}));
            rows.push_back(row);
        }
        blocks.push_back(rows);
    }
    return Json{{"algebra", s.alg.blocks}, {"blocks", blocks}};
}

Json superop_to_json(const Superoperator& s) {
    Json rows = Json::array();
    for (int r = 0; r < s.hmat().rows(); r++) {
        Json row = Json::array();
        for (int c = 0; c < s.hmat().cols(); c++)
            row.push_back(Json::array({s.hmat()(r, c).real(), s.hmat()(r, c).imag()}));
        rows.push_back(row);
    }
    return Json{{"dom", s.dom().blocks}, {"cod", s.cod().blocks}, {"heisenberg", rows}};
}

Json adequacy_report_to_json(const AdequacyReport& rep) {
    return Json{{"denotational", subdist_to_json(rep.denotational)},
                {"operational", subdist_to_json(rep.operational)},
                {"residual", rep.residual},
                {"tv", rep.tv},
                {"soundness_max_dev", rep.soundness_max_dev},
                {"soundness_nodes", rep.soundness_nodes},
                {"tol", rep.tol},
                {"pass", rep.pass}};
}

} // namespace vqpl
