#include "vqpl/dist.hpp"

#include <cmath>

namespace vqpl {

SubDist SubDist::dirac(const std::string& key) {
    SubDist d;
    d.add(key, 1.0);
    return d;
}

void SubDist::add(const std::string& key, double p) {
    if (p == 0.0) return;
    double& slot = entries_[key];
    slot += p;
    if (slot <= 0.0) entries_.erase(key);
}

double SubDist::at(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0.0 : it->second;
}

double SubDist::total() const {
    double t = 0.0;
    for (const auto& [k, p] : entries_) t += p;
    return t;
}

SubDist convex_sum(const std::vector<double>& weights, const std::vector<SubDist>& dists) {
    if (weights.size() != dists.size())
        throw std::invalid_argument("convex_sum: length mismatch");
    double wsum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw WeightOverflow("convex_sum: negative weight");
        wsum += w;
    }
    if (wsum > 1.0 + 1e-12) throw WeightOverflow("convex_sum: weights exceed 1");
    SubDist out;
    for (std::size_t i = 0; i < dists.size(); i++)
        for (const auto& [k, p] : dists[i].entries()) out.add(k, weights[i] * p);
    return out;
}

double halt(const SubDist& d) { return d.total(); }

SubDist pushforward(const std::function<std::string(const std::string&)>& f, const SubDist& d) {
    SubDist out;
    for (const auto& [k, p] : d.entries()) out.add(f(k), p);
    return out;
}

double total_variation(const SubDist& d1, const SubDist& d2) {
    double s = 0.0;
    for (const auto& [k, p] : d1.entries()) s += std::abs(p - d2.at(k));
    for (const auto& [k, p] : d2.entries())
        if (d1.at(k) == 0.0) s += std::abs(p);
    return 0.5 * s;
}

double max_pointwise_diff(const SubDist& d1, const SubDist& d2) {
    double m = 0.0;
    for (const auto& [k, p] : d1.entries()) m = std::max(m, std::abs(p - d2.at(k)));
    for (const auto& [k, p] : d2.entries())
        if (d1.at(k) == 0.0) m = std::max(m, std::abs(p));
    return m;
}

} // namespace vqpl
