#pragma once

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace vqpl {

struct WeightOverflow : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A finite subprobability distribution over canonical value keys: every
// weight is in (0, 1] and the total is at most 1 (within 1e-12 slack).
// Iteration order is key order, so serialisation is deterministic.
class SubDist {
  public:
    SubDist() = default;

    static SubDist dirac(const std::string& key);

    // Adds mass to a key; entries at or below zero are dropped.
    void add(const std::string& key, double p);
    double at(const std::string& key) const; // 0 when absent
    double total() const;
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }

    const std::map<std::string, double>& entries() const { return entries_; }

    bool operator==(const SubDist& o) const = default;

  private:
    std::map<std::string, double> entries_;
};

// Pointwise weighted sum  sum_i w_i * d_i. Throws WeightOverflow when the
// weights exceed 1 beyond tolerance.
SubDist convex_sum(const std::vector<double>& weights, const std::vector<SubDist>& dists);

// Total mass: the probability of termination accounted so far.
double halt(const SubDist& d);

// Relabels keys, summing collisions. f must be total on d's keys.
SubDist pushforward(const std::function<std::string(const std::string&)>& f, const SubDist& d);

// (1/2) sum over the key union of |d1(k) - d2(k)|.
double total_variation(const SubDist& d1, const SubDist& d2);

// Largest pointwise |d1(k) - d2(k)| over the key union.
double max_pointwise_diff(const SubDist& d1, const SubDist& d2);

} // namespace vqpl
