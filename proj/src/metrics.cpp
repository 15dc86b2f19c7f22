#include "rein/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "rein/error.hpp"

namespace rein {

Rate pass_at_1(std::size_t passes, std::size_t n) {
    if (n == 0) throw EmptyInput("pass@1 over zero records");
    if (passes > n) throw InvalidValue("more passes than records");
    double p = static_cast<double>(passes) / static_cast<double>(n);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

Rate pass_at_1(const std::vector<bool>& outcomes) {
    return pass_at_1(static_cast<std::size_t>(std::count(outcomes.begin(), outcomes.end(), true)), outcomes.size());
}

Rate pass_at_1(const std::vector<EpisodeRecord>& records) {
    std::vector<bool> v;
    for (const auto& r : records) v.push_back(r.verdict && r.verdict->pass);
    return pass_at_1(v);
}

double activation_rate(std::size_t yes, std::size_t n) {
    if (n == 0) throw EmptyInput("activation rate over zero records");
    return static_cast<double>(yes) / static_cast<double>(n);
}

double activation_rate(const std::vector<EpisodeRecord>& records) {
    std::size_t yes = 0;
    for (const auto& r : records)
        if (std::any_of(r.activations.begin(), r.activations.end(), [](const Activation& a) { return a.verdict.yes(); }))
            ++yes;
    return activation_rate(yes, records.size());
}

double cohen_kappa(const std::vector<bool>& a, const std::vector<bool>& b) {
    if (a.size() != b.size()) throw LengthMismatch("cohen_kappa: vectors differ in length");
    if (a.empty()) throw EmptyInput("cohen_kappa: empty vectors");
    double n = static_cast<double>(a.size());
    double agree = 0, a1 = 0, b1 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        agree += a[i] == b[i];
        a1 += a[i];
        b1 += b[i];
    }
    double po = agree / n;
    double pe = (a1 / n) * (b1 / n) + (1 - a1 / n) * (1 - b1 / n);
    if (pe == 1.0) return 1.0;
    return (po - pe) / (1.0 - pe);
}

double fleiss_kappa(const std::vector<std::vector<bool>>& outcomes) {
    if (outcomes.empty()) throw ShapeError("fleiss_kappa: no items");
    std::size_t k = outcomes.front().size();
    if (k < 2) throw ShapeError("fleiss_kappa: need at least two runs");
    double n = static_cast<double>(outcomes.size());
    double kk = static_cast<double>(k);
    double p_bar = 0, yes_total = 0;
    for (const auto& row : outcomes) {
        if (row.size() != k) throw ShapeError("fleiss_kappa: ragged outcome matrix");
        double yes = static_cast<double>(std::count(row.begin(), row.end(), true));
        double no = kk - yes;
        p_bar += (yes * yes + no * no - kk) / (kk * (kk - 1));
        yes_total += yes;
    }
    p_bar /= n;
    double p1 = yes_total / (n * kk);
    double pe = p1 * p1 + (1 - p1) * (1 - p1);
    if (pe == 1.0) return 1.0;
    return (p_bar - pe) / (1.0 - pe);
}

double mcnemar_exact(std::size_t b, std::size_t c) {
    std::size_t n = b + c;
    if (n == 0) return 1.0;
    std::size_t m = std::min(b, c);
    // Binomial(n, 1/2) lower tail in log space so large n does not underflow.
    double tail = 0.0;
    double ln2n = static_cast<double>(n) * std::log(2.0);
    for (std::size_t i = 0; i <= m; ++i) {
        double lc = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0);
        tail += std::exp(lc - ln2n);
    }
    return std::min(1.0, 2.0 * tail);
}

double mcnemar(const std::vector<bool>& a, const std::vector<bool>& b) {
    if (a.size() != b.size()) throw LengthMismatch("mcnemar: vectors differ in length");
    std::size_t nb = 0, nc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] && !b[i]) ++nb;
        if (!a[i] && b[i]) ++nc;
    }
    return mcnemar_exact(nb, nc);
}

}  // namespace rein
