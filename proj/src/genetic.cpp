#include "robsel/genetic.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "robsel/common.hpp"

namespace robsel {
namespace {

struct Individual {
    std::vector<int> genes;  // sorted
    double value = 0.0;
};

std::vector<int> random_subset(int n, int k, Rng& rng) {
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    auto out = sample_without_replacement(all, k, rng);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

GaResult minimize_subset(int n, int k, const std::function<double(std::span<const int>)>& objective,
                         const GaOptions& options, std::uint64_t seed, const std::vector<std::vector<int>>& seeds) {
    if (k < 0 || k > n) throw ValidationError("subset size must lie in [0, n]");
    if (options.population < 2 || options.tournament < 1) throw ValidationError("invalid genetic algorithm settings");
    Rng rng(seed);
    GaResult result;

    std::map<std::vector<int>, double> memo;
    auto evaluate = [&](const std::vector<int>& genes) {
        auto it = memo.find(genes);
        if (it != memo.end()) return it->second;
        const double v = objective(genes);
        ++result.evaluations;
        memo.emplace(genes, v);
        return v;
    };
    auto better = [](const Individual& a, const Individual& b) {
        return a.value < b.value || (a.value == b.value && a.genes < b.genes);
    };

    std::vector<Individual> pop;
    for (auto s : seeds) {
        if (static_cast<int>(pop.size()) >= options.population) break;
        std::sort(s.begin(), s.end());
        if (static_cast<int>(s.size()) == k) pop.push_back({s, evaluate(s)});
    }
    while (static_cast<int>(pop.size()) < options.population) {
        auto g = random_subset(n, k, rng);
        pop.push_back({g, evaluate(g)});
    }
    std::sort(pop.begin(), pop.end(), better);

    std::uniform_int_distribution<int> pick(0, options.population - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto tournament = [&]() -> const Individual& {
        int best = pick(rng);
        for (int t = 1; t < options.tournament; ++t) {
            const int c = pick(rng);
            if (better(pop[static_cast<std::size_t>(c)], pop[static_cast<std::size_t>(best)])) best = c;
        }
        return pop[static_cast<std::size_t>(best)];
    };

    int stagnant = 0;
    for (int gen = 0; gen < options.generations && stagnant < options.stagnation; ++gen) {
        std::vector<Individual> next(pop.begin(), pop.begin() + std::min<int>(options.elitism, options.population));
        while (static_cast<int>(next.size()) < options.population) {
            const Individual& a = tournament();
            const Individual& b = tournament();
            // Crossover: draw k genes from the union of the parents.
            std::vector<int> pool;
            std::set_union(a.genes.begin(), a.genes.end(), b.genes.begin(), b.genes.end(), std::back_inserter(pool));
            std::vector<int> child = sample_without_replacement(pool, k, rng);
            if (k > 0 && k < n && unit(rng) < options.mutation_rate) {
                std::sort(child.begin(), child.end());
                const std::vector<int> outside = complement(child, n);
                std::uniform_int_distribution<int> in_pos(0, k - 1);
                std::uniform_int_distribution<int> out_pos(0, static_cast<int>(outside.size()) - 1);
                child[static_cast<std::size_t>(in_pos(rng))] = outside[static_cast<std::size_t>(out_pos(rng))];
            }
            std::sort(child.begin(), child.end());
            const double v = evaluate(child);
            next.push_back({std::move(child), v});
        }
        std::sort(next.begin(), next.end(), better);
        stagnant = better(next.front(), pop.front()) ? 0 : stagnant + 1;
        pop = std::move(next);
        result.generations = gen + 1;
    }
    result.best = pop.front().genes;
    result.value = pop.front().value;
    return result;
}

}  // namespace robsel
