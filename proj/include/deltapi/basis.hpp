#pragma once

#include "deltapi/dynamics.hpp"

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace deltapi {

using Exponents = std::vector<int>;

/**
 * Ordered list of monomials in n_vars variables.
 *
 * Generated tables are ordered by total degree (ascending), and within one
 * degree by exponent tuple in descending lexicographic order, so X1 leads:
 * X1^2, X1 X2, X1 X3, ..., X4^2, X1^4, X1^3 X2, ...
 */
class MonomialTable {
public:
    MonomialTable() = default;
    /// Explicit table; rejects duplicates, negative exponents and ragged tuples.
    MonomialTable(int n_vars, std::vector<Exponents> exponents);

    int n_vars() const { return n_vars_; }
    int size() const { return static_cast<int>(exponents_.size()); }
    const std::vector<Exponents>& exponents() const { return exponents_; }

    /// Human-readable form, e.g. "X1^2*X3".
    std::string term_name(int i) const;

private:
    int n_vars_ = 0;
    std::vector<Exponents> exponents_;
};

/// Complete table of monomials whose total degree is in `degrees`.
MonomialTable build_monomial_table(int n_vars, std::initializer_list<int> degrees);
MonomialTable build_monomial_table(int n_vars, const std::vector<int>& degrees);
/// Even-degree critic features (defaults to degrees {2, 4}).
MonomialTable build_even_basis(int n_vars, const std::vector<int>& degrees = {2, 4});
/// Odd-degree actor features (defaults to degrees {1, 3}).
MonomialTable build_odd_basis(int n_vars, const std::vector<int>& degrees = {1, 3});

Vector eval_basis(const MonomialTable& table, const Vector& x);
/// Row i is the gradient of monomial i.
Matrix eval_basis_jacobian(const MonomialTable& table, const Vector& x);

/// Critic (rho), control actor (phi) and disturbance actor (varphi) features.
struct BasisSet {
    MonomialTable critic;
    MonomialTable actor_u;
    MonomialTable actor_d;

    int critic_size() const { return critic.size(); }
    int actor_u_size() const { return actor_u.size(); }
    int actor_d_size() const { return actor_d.size(); }

    /// FNV-1a over every table's shape and exponents, as 16 hex digits.
    std::string ordering_hash() const;
};

/// Even {2,4} critic and odd {1,3} actors on n_vars variables.
BasisSet default_basis(int n_vars);

}  // namespace deltapi
