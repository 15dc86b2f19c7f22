#pragma once
// Success metrics and agreement statistics.

#include <cstddef>
#include <vector>

#include "rein/simulation.hpp"

namespace rein {

struct Rate {
    double rate = 0.0;
    double sem = 0.0;  // binomial: sqrt(p(1-p)/n)
};

// Throw EmptyInput when n == 0.
Rate pass_at_1(std::size_t passes, std::size_t n);
Rate pass_at_1(const std::vector<bool>& outcomes);
Rate pass_at_1(const std::vector<EpisodeRecord>& records);

double activation_rate(std::size_t yes, std::size_t n);
// Fraction of records with at least one Yes verdict; on targeted runs this is
// the targeted-turn activation rate.
double activation_rate(const std::vector<EpisodeRecord>& records);

// Throws LengthMismatch (or EmptyInput for zero-length vectors).
double cohen_kappa(const std::vector<bool>& a, const std::vector<bool>& b);
// rows are items, columns are runs. Throws ShapeError.
double fleiss_kappa(const std::vector<std::vector<bool>>& outcomes);
// Exact two-sided McNemar test over discordant pairs.
double mcnemar(const std::vector<bool>& a, const std::vector<bool>& b);
double mcnemar_exact(std::size_t b, std::size_t c);

}  // namespace rein
