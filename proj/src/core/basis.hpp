#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dcfr {

/// Clamped B-spline basis of order q (degree q-1) on [a,b] with strictly increasing interior knots.
/// Number of functions is (#interior knots) + q.
class UniSplineBasis {
public:
    UniSplineBasis() = default;
    UniSplineBasis(double a, double b, int order, std::vector<double> interior_knots);
    static UniSplineBasis uniform(double a, double b, int order, std::size_t interior_count);

    double a() const { return a_; }
    double b() const { return b_; }
    int order() const { return order_; }
    std::size_t size() const { return interior_.size() + static_cast<std::size_t>(order_); }
    const std::vector<double>& interior_knots() const { return interior_; }
    const std::vector<double>& knots() const { return knots_; }

    // Support of function i is [support_lo(i), support_hi(i)].
    double support_lo(std::size_t i) const { return knots_[i]; }
    double support_hi(std::size_t i) const { return knots_[i + static_cast<std::size_t>(order_)]; }

    /// All basis values at t (length size()). Throws DomainError outside [a,b].
    std::vector<double> eval(double t) const;

    // Writes the `order` possibly-nonzero values into out and returns the index of the first one.
    std::size_t eval_active(double t, std::span<double> out) const;

    // Distinct breakpoints a, interior..., b.
    std::vector<double> breakpoints() const;

private:
    double a_ = 0.0, b_ = 1.0;
    int order_ = 4;
    std::vector<double> interior_;
    std::vector<double> knots_;
};

/// Truncated tensor-product basis phi_k(s,t) = psi_i(s) psi_j(t) I{s<=t} with the identically
/// zero products dropped, plus the Gram matrix of the retained functions over [a,b]^2.
class CausalBasis {
public:
    struct Pair {
        std::size_t s_index;  // i: factor in s
        std::size_t t_index;  // j: factor in t
    };

    CausalBasis() = default;
    explicit CausalBasis(UniSplineBasis uni);

    const UniSplineBasis& uni() const { return uni_; }
    std::size_t size() const { return pairs_.size(); }
    const std::vector<Pair>& retained() const { return pairs_; }
    const Eigen::MatrixXd& omega() const { return omega_; }

    // Position of pair (i,j) in the retained list or -1 if dropped.
    std::ptrdiff_t index_of(std::size_t i, std::size_t j) const { return lookup_[i * uni_.size() + j]; }

    std::vector<double> eval_phi(double s, double t) const;

    // b as an N x N coefficient matrix in (s index, t index); dropped entries are 0.
    Eigen::MatrixXd coefficient_matrix(std::span<const double> b) const;

private:
    void build_gram();

    UniSplineBasis uni_;
    std::vector<Pair> pairs_;
    std::vector<std::ptrdiff_t> lookup_;
    Eigen::MatrixXd omega_;
};

CausalBasis build_causal_basis(const UniSplineBasis& uni);

/// beta(s,t) = sum_k b_k phi_k(s,t); exactly 0 for s > t.
double beta_surface(std::span<const double> b, const CausalBasis& basis, double s, double t);

} // namespace dcfr
