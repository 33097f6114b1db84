#include "deltapi/basis.hpp"

#include "deltapi/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <set>

namespace deltapi {

MonomialTable::MonomialTable(int n_vars, std::vector<Exponents> exponents)
    : n_vars_(n_vars), exponents_(std::move(exponents)) {
    if (n_vars_ < 1) throw ContractViolation("monomial table needs at least one variable");
    std::set<Exponents> seen;
    for (const auto& e : exponents_) {
        if (static_cast<int>(e.size()) != n_vars_) throw ContractViolation("exponent tuple has wrong length");
        if (std::any_of(e.begin(), e.end(), [](int p) { return p < 0; })) {
            throw ContractViolation("negative exponent");
        }
        if (!seen.insert(e).second) throw ContractViolation("duplicate monomial in table");
    }
}

std::string MonomialTable::term_name(int i) const {
    std::string out;
    const auto& e = exponents_.at(static_cast<std::size_t>(i));
    for (int v = 0; v < n_vars_; ++v) {
        if (e[v] == 0) continue;
        if (!out.empty()) out += '*';
        out += "X" + std::to_string(v + 1);
        if (e[v] > 1) out += "^" + std::to_string(e[v]);
    }
    return out.empty() ? "1" : out;
}

MonomialTable build_monomial_table(int n_vars, const std::vector<int>& degrees) {
    if (n_vars < 1) throw ContractViolation("n_vars must be >= 1");
    std::vector<int> sorted(degrees);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    std::vector<Exponents> terms;
    Exponents current(static_cast<std::size_t>(n_vars), 0);
    // Leading exponent descends first, which yields descending lexicographic order.
    std::function<void(int, int)> fill = [&](int var, int remaining) {
        if (var == n_vars - 1) {
            current[var] = remaining;
            terms.push_back(current);
            return;
        }
        for (int p = remaining; p >= 0; --p) {
            current[var] = p;
            fill(var + 1, remaining - p);
        }
    };
    for (int d : sorted) {
        if (d < 0) throw ContractViolation("negative degree");
        fill(0, d);
    }
    return MonomialTable(n_vars, std::move(terms));
}

MonomialTable build_monomial_table(int n_vars, std::initializer_list<int> degrees) {
    return build_monomial_table(n_vars, std::vector<int>(degrees));
}

MonomialTable build_even_basis(int n_vars, const std::vector<int>& degrees) {
    for (int d : degrees) {
        if (d % 2 != 0 || d == 0) throw ContractViolation("even basis needs positive even degrees");
    }
    return build_monomial_table(n_vars, degrees);
}

MonomialTable build_odd_basis(int n_vars, const std::vector<int>& degrees) {
    for (int d : degrees) {
        if (d % 2 == 0) throw ContractViolation("odd basis needs odd degrees");
    }
    return build_monomial_table(n_vars, degrees);
}

namespace {

double int_pow(double base, int p) {
    double out = 1.0;
    for (int i = 0; i < p; ++i) out *= base;
    return out;
}

void require_vars(const MonomialTable& table, const Vector& x) {
    if (x.size() != table.n_vars()) {
        throw ContractViolation("basis evaluated at a point of dimension " + std::to_string(x.size()) +
                                ", table has " + std::to_string(table.n_vars()) + " variables");
    }
}

}  // namespace

Vector eval_basis(const MonomialTable& table, const Vector& x) {
    require_vars(table, x);
    Vector out(table.size());
    for (int i = 0; i < table.size(); ++i) {
        const auto& e = table.exponents()[static_cast<std::size_t>(i)];
        double value = 1.0;
        for (int v = 0; v < table.n_vars(); ++v) value *= int_pow(x(v), e[v]);
        out(i) = value;
    }
    return out;
}

Matrix eval_basis_jacobian(const MonomialTable& table, const Vector& x) {
    require_vars(table, x);
    const int n = table.n_vars();
    Matrix out = Matrix::Zero(table.size(), n);
    for (int i = 0; i < table.size(); ++i) {
        const auto& e = table.exponents()[static_cast<std::size_t>(i)];
        for (int v = 0; v < n; ++v) {
            if (e[v] == 0) continue;
            double value = static_cast<double>(e[v]) * int_pow(x(v), e[v] - 1);
            for (int w = 0; w < n && value != 0.0; ++w) {
                if (w != v) value *= int_pow(x(w), e[w]);
            }
            out(i, v) = value;
        }
    }
    return out;
}

std::string BasisSet::ordering_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::int64_t value) {
        for (int byte = 0; byte < 8; ++byte) {
            h ^= static_cast<std::uint64_t>((value >> (8 * byte)) & 0xff);
            h *= 0x100000001b3ULL;
        }
    };
    for (const MonomialTable* t : {&critic, &actor_u, &actor_d}) {
        mix(t->n_vars());
        mix(t->size());
        for (const auto& e : t->exponents()) {
            for (int p : e) mix(p);
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

BasisSet default_basis(int n_vars) {
    return {build_even_basis(n_vars), build_odd_basis(n_vars), build_odd_basis(n_vars)};
}

}  // namespace deltapi
