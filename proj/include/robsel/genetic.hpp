#pragma once

// Genetic algorithm over fixed-size subsets of {0, ..., n-1} (k-of-n encoding).

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace robsel {

struct GaOptions {
    int population = 50;
    int generations = 100;
    int tournament = 3;
    double mutation_rate = 0.1;  // probability that a child gets one index swapped
    int elitism = 2;
    int stagnation = 25;         // stop after this many generations without improvement
};

struct GaResult {
    std::vector<int> best;  // sorted
    double value = 0.0;
    int generations = 0;
    int evaluations = 0;
};

/// Minimizes `objective` over sorted k-subsets of {0..n-1}. `seeds` are injected
/// into the initial population, so the result is never worse than the best seed.
GaResult minimize_subset(int n, int k, const std::function<double(std::span<const int>)>& objective,
                         const GaOptions& options, std::uint64_t seed,
                         const std::vector<std::vector<int>>& seeds = {});

}  // namespace robsel
