#include "qbdmanet/probabilities.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "qbdmanet/errors.hpp"

namespace qbdmanet {

namespace {

// Brackets such as 1 - 2((M-1)/M)^n + ((M-2)/M)^n cancel catastrophically when
// n is small against M; 50 significant digits leave ample headroom.
using Wide = boost::multiprecision::cpp_bin_float_50;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kComplementSlack = 1e-12;

Wide ipow(Wide base, int e) {
    Wide result = 1;
    while (e > 0) {
        if (e & 1) result *= base;
        base *= base;
        e >>= 1;
    }
    return result;
}

std::vector<double> log_factorials(int upto) {
    std::vector<double> lf(static_cast<std::size_t>(upto) + 1, 0.0);
    for (int i = 2; i <= upto; ++i) lf[i] = lf[i - 1] + std::log(static_cast<double>(i));
    return lf;
}

double log_binom(const std::vector<double>& lf, int a, int b) { return lf[a] - lf[b] - lf[a - b]; }

// 0^0 = 1; 0^e = 0 for e > 0.
double log_pow(double base, int e) {
    if (e == 0) return 0.0;
    if (base <= 0.0) return kNegInf;
    return e * std::log(base);
}

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// 1 - ((M-1)/M)^n
Wide occupied_fraction(int cells, int n) {
    const Wide M = cells;
    return 1 - ipow((M - 1) / M, n);
}

double clamp_complement(double value, const char* what, int j) {
    if (value >= 0.0) return value;
    if (value >= -kComplementSlack) return 0.0;
    std::ostringstream os;
    os << what << "(" << j << ") = " << value << " is negative";
    throw NumericalError(os.str());
}

}  // namespace

double contention_weight(int x) {
    if (x <= 0) throw std::domain_error("contention_weight: x must be >= 1");
    if (x <= 20) {
        std::uint64_t nine = 1;
        std::uint64_t eight = 1;
        for (int i = 0; i < x; ++i) {
            nine *= 9;
            eight *= 8;
        }
        return static_cast<double>(static_cast<long double>(nine - eight) / x);
    }
    return std::exp(log_contention_weight(x));
}

double log_contention_weight(int x) {
    if (x <= 0) throw std::domain_error("log_contention_weight: x must be >= 1");
    // ln(9^x (1 - (8/9)^x) / x)
    return x * std::log(9.0) + std::log1p(-std::pow(8.0 / 9.0, x)) - std::log(static_cast<double>(x));
}

double broadcast_probability(const Topology& t) {
    const Wide M = t.cells();
    const Wide coeff = Wide(t.q) * M / (Wide(t.alpha) * t.alpha * t.n);
    return static_cast<double>(coeff * occupied_fraction(t.cells(), t.n));
}

std::vector<double> copies_distribution(const Topology& t) {
    const int n = t.n;
    const double M = t.cells();
    const auto lf = log_factorials(n);
    // ln(M^n - (M-1)^n)
    const double log_den = n * std::log(M) + std::log(static_cast<double>(occupied_fraction(t.cells(), n)));
    const double log_outside = M > 9.0 ? std::log(M - 9.0) : kNegInf;

    std::vector<double> pc(n, 0.0);
    for (int j = 1; j <= n - 1; ++j) {
        // (M-9) f(j) + f(j+1)
        const double log_weight = log_add(log_outside + log_contention_weight(j), log_contention_weight(j + 1));
        const double log_num = std::log(static_cast<double>(n)) + log_binom(lf, n - 2, j - 1) +
                               log_pow(M - 9.0, n - 1 - j) + log_weight;
        pc[j] = std::exp(log_num - log_den);
    }
    return pc;
}

std::vector<double> receive_probability(const Topology& t) {
    const int n = t.n;
    const Wide M = t.cells();
    // 1 - ((M-1)/M)^n - (n/M)((M-9)/M)^(n-1)
    const Wide bracket = occupied_fraction(t.cells(), n) - Wide(n) / M * ipow((M - 9) / M, n - 1);
    const Wide per_copy = (1 - Wide(t.q)) * M / (Wide(t.alpha) * t.alpha * n * (n - 1)) * bracket;
    const double base = static_cast<double>(per_copy);

    std::vector<double> pr(n, 0.0);
    for (int j = 1; j <= n - 1; ++j) pr[j] = j * base;
    return pr;
}

double relay_delivery_during_broadcast(const NetworkParams& p, double p_b) {
    const int n = p.n;
    const Wide M = p.cells();
    const Wide a2 = Wide(p.alpha) * p.alpha;
    const Wide bracket = 1 - 2 * ipow((M - 1) / M, n) + ipow((M - 2) / M, n) -
                         Wide(n) / M * ipow((M - 9) / M, n - 1) + Wide(n) / M * ipow((M - 10) / M, n - 1);
    const Wide q = p.q;
    const Wide coeff = Wide(p.lambda) * (q - q * q) * (M * M - M * a2) /
                       (a2 * a2 * n * (n - 1) * (n - 2) * Wide(p_b));
    return static_cast<double>(coeff * bracket);
}

ProbabilityTable compute_table(const NetworkParams& p) {
    ProbabilityTable tab;
    const int n = p.n;
    tab.n = n;
    tab.lambda = p.lambda;
    tab.p_b = broadcast_probability(p);
    if (!(p.lambda < tab.p_b)) {
        std::ostringstream os;
        os << "source-queue service rate exceeded: lambda=" << p.lambda << " >= p_b=" << tab.p_b;
        throw StabilityError(os.str());
    }
    tab.lambda_prime = p.lambda / tab.p_b;
    tab.p_c = copies_distribution(p);
    tab.p_r = receive_probability(p);

    const double M = p.cells();
    const double a2 = static_cast<double>(p.alpha) * p.alpha;
    const auto lf = log_factorials(n);

    tab.p_0.assign(n, 0.0);
    const double scale = p.lambda * p.q / (a2 * tab.p_b);
    for (int j = 1; j <= n - 1; ++j) {
        const double log_term = log_binom(lf, n - 2, j - 1) + log_pow(M - 9.0, n - j) + log_contention_weight(j) -
                                (n - 1) * std::log(M);
        tab.p_0[j] = scale * std::exp(log_term);
    }
    {
        const Wide Mw = p.cells();
        const Wide out = Wide(p.lambda) * Wide(p.q) * (Mw - 9) / (Wide(a2) * (n - 1) * Wide(tab.p_b)) *
                         occupied_fraction(p.cells(), n - 1);
        tab.p_0[0] = clamp_complement(static_cast<double>(1 - out), "p_0", 0);
    }

    const double single = relay_delivery_during_broadcast(p, tab.p_b);
    tab.p_b_plus.assign(n, 0.0);
    tab.p_b_minus.assign(n, 0.0);
    tab.p_f_plus.assign(n, 0.0);
    tab.p_f_minus.assign(n, 0.0);
    for (int j = 1; j <= n - 1; ++j) {
        const double bp = (j - 1) * single;
        tab.p_b_plus[j] = bp;
        tab.p_b_minus[j] = clamp_complement(p.lambda - bp, "p_b_minus", j);
        tab.p_f_plus[j] = clamp_complement(tab.p_r[j] - bp, "p_f_plus", j);
        tab.p_f_minus[j] =
            clamp_complement(1.0 - tab.p_b_plus[j] - tab.p_b_minus[j] - tab.p_f_plus[j], "p_f_minus", j);
    }
    return tab;
}

void write_table_csv(std::ostream& os, const ProbabilityTable& t) {
    os << "j,p_c,p_r,p_0,p_b_plus,p_b_minus,p_f_plus,p_f_minus\n";
    const auto old_precision = os.precision(17);
    for (int j = 0; j < t.n; ++j) {
        os << j << ',' << t.p_c[j] << ',' << t.p_r[j] << ',' << t.p_0[j] << ',' << t.p_b_plus[j] << ','
           << t.p_b_minus[j] << ',' << t.p_f_plus[j] << ',' << t.p_f_minus[j] << '\n';
    }
    os.precision(old_precision);
}

}  // namespace qbdmanet
