#include "basis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "errors.hpp"
#include "quadrature.hpp"

namespace dcfr {

UniSplineBasis::UniSplineBasis(double a, double b, int order, std::vector<double> interior_knots)
    : a_(a), b_(b), order_(order), interior_(std::move(interior_knots)) {
    if (!(b > a)) throw ContractError("spline basis needs a < b");
    if (order < 2) throw ContractError("spline order must be >= 2");
    double prev = a;
    for (double k : interior_) {
        if (!(k > prev) || !(k < b)) throw ContractError("interior knots must be strictly increasing inside (a,b)");
        prev = k;
    }
    knots_.assign(static_cast<std::size_t>(order), a);
    knots_.insert(knots_.end(), interior_.begin(), interior_.end());
    knots_.insert(knots_.end(), static_cast<std::size_t>(order), b);
}

UniSplineBasis UniSplineBasis::uniform(double a, double b, int order, std::size_t interior_count) {
    std::vector<double> k(interior_count);
    for (std::size_t i = 0; i < interior_count; ++i)
        k[i] = a + (b - a) * static_cast<double>(i + 1) / static_cast<double>(interior_count + 1);
    return UniSplineBasis(a, b, order, std::move(k));
}

std::size_t UniSplineBasis::eval_active(double t, std::span<double> out) const {
    const auto q = static_cast<std::size_t>(order_);
    // span index mu with knots[mu] <= t < knots[mu+1], t = b folded into the last span
    std::size_t mu;
    if (t >= b_) {
        mu = size() - 1;
    } else {
        auto it = std::upper_bound(knots_.begin() + static_cast<std::ptrdiff_t>(q - 1), knots_.end() - static_cast<std::ptrdiff_t>(q), t);
        mu = static_cast<std::size_t>(it - knots_.begin()) - 1;
    }
    // de Boor / Cox recursion on the q active functions
    double left[16], right[16];
    out[0] = 1.0;
    for (std::size_t d = 1; d < q; ++d) {
        left[d] = t - knots_[mu + 1 - d];
        right[d] = knots_[mu + d] - t;
        double saved = 0.0;
        for (std::size_t r = 0; r < d; ++r) {
            const double denom = right[r + 1] + left[d - r];
            const double temp = denom > 0.0 ? out[r] / denom : 0.0;
            out[r] = saved + right[r + 1] * temp;
            saved = left[d - r] * temp;
        }
        out[d] = saved;
    }
    return mu + 1 - q;
}

std::vector<double> UniSplineBasis::eval(double t) const {
    if (!(t >= a_ && t <= b_)) {
        std::ostringstream os;
        os << "spline evaluation at t=" << t << " outside [" << a_ << "," << b_ << "]";
        throw DomainError(os.str());
    }
    std::vector<double> v(size(), 0.0);
    double act[16];
    const std::size_t first = eval_active(t, std::span<double>(act, static_cast<std::size_t>(order_)));
    for (int r = 0; r < order_; ++r) v[first + static_cast<std::size_t>(r)] = act[r];
    return v;
}

std::vector<double> UniSplineBasis::breakpoints() const {
    std::vector<double> bp;
    bp.push_back(a_);
    bp.insert(bp.end(), interior_.begin(), interior_.end());
    bp.push_back(b_);
    return bp;
}

CausalBasis::CausalBasis(UniSplineBasis uni) : uni_(std::move(uni)) {
    if (uni_.order() > 15) throw ContractError("spline order too large");
    const std::size_t N = uni_.size();
    lookup_.assign(N * N, -1);
    // Keep (i,j) iff the support box meets the open triangle {s < t}: decided from knot spans.
    for (std::size_t j = 0; j < N; ++j)
        for (std::size_t i = 0; i < N; ++i)
            if (uni_.support_lo(i) < uni_.support_hi(j)) {
                lookup_[i * N + j] = static_cast<std::ptrdiff_t>(pairs_.size());
                pairs_.push_back({i, j});
            }
    build_gram();
}

void CausalBasis::build_gram() {
    const std::size_t N = uni_.size();
    const std::size_t p = pairs_.size();
    const auto q = static_cast<std::size_t>(uni_.order());
    const std::vector<double> bp = uni_.breakpoints();
    const GaussRule& rule = gauss_legendre(8);
    double act[16];

    // sum of w * psi psi^T over the Gauss nodes of [lo, hi]
    auto partial_gram = [&](double lo, double hi, Eigen::MatrixXd& acc) {
        if (hi <= lo) return;
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        for (std::size_t g = 0; g < rule.nodes.size(); ++g) {
            const double s = mid + half * rule.nodes[g];
            const std::size_t f = uni_.eval_active(s, std::span<double>(act, q));
            const double w = half * rule.weights[g];
            for (std::size_t r = 0; r < q; ++r)
                for (std::size_t c = 0; c < q; ++c) acc(f + r, f + c) += w * act[r] * act[c];
        }
    };

    omega_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    Eigen::MatrixXd prefix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
    double tact[16];
    for (std::size_t l = 0; l + 1 < bp.size(); ++l) {
        const double lo = bp[l], hi = bp[l + 1];
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        for (std::size_t g = 0; g < rule.nodes.size(); ++g) {
            const double t = mid + half * rule.nodes[g];
            const double wt = half * rule.weights[g];
            // inner integral over s in [a, t]
            Eigen::MatrixXd G = prefix;
            partial_gram(lo, t, G);
            const std::size_t ft = uni_.eval_active(t, std::span<double>(tact, q));
            for (std::size_t r = 0; r < q; ++r) {
                const std::size_t j = ft + r;
                for (std::size_t c = 0; c < q; ++c) {
                    const std::size_t jj = ft + c;
                    const double wjj = wt * tact[r] * tact[c];
                    for (std::size_t i = 0; i < N; ++i) {
                        const std::ptrdiff_t k = lookup_[i * N + j];
                        if (k < 0) continue;
                        for (std::size_t ii = 0; ii < N; ++ii) {
                            const std::ptrdiff_t kk = lookup_[ii * N + jj];
                            if (kk < 0) continue;
                            const double gv = G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(ii));
                            if (gv != 0.0) omega_(k, kk) += wjj * gv;
                        }
                    }
                }
            }
        }
        partial_gram(lo, hi, prefix);
    }
    omega_ = 0.5 * (omega_ + omega_.transpose()).eval();
}

std::vector<double> CausalBasis::eval_phi(double s, double t) const {
    if (!(s >= uni_.a() && s <= uni_.b() && t >= uni_.a() && t <= uni_.b())) {
        std::ostringstream os;
        os << "(s,t)=(" << s << "," << t << ") outside the domain";
        throw DomainError(os.str());
    }
    std::vector<double> phi(pairs_.size(), 0.0);
    if (s > t) return phi;
    const auto q = static_cast<std::size_t>(uni_.order());
    const std::size_t N = uni_.size();
    double sa[16], ta[16];
    const std::size_t fs = uni_.eval_active(s, std::span<double>(sa, q));
    const std::size_t ft = uni_.eval_active(t, std::span<double>(ta, q));
    for (std::size_t r = 0; r < q; ++r)
        for (std::size_t c = 0; c < q; ++c) {
            const std::ptrdiff_t k = lookup_[(fs + r) * N + (ft + c)];
            if (k >= 0) phi[static_cast<std::size_t>(k)] = sa[r] * ta[c];
        }
    return phi;
}

Eigen::MatrixXd CausalBasis::coefficient_matrix(std::span<const double> b) const {
    if (b.size() != pairs_.size()) throw ContractError("coefficient vector length does not match basis size");
    const auto N = static_cast<Eigen::Index>(uni_.size());
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(N, N);
    for (std::size_t k = 0; k < pairs_.size(); ++k)
        B(static_cast<Eigen::Index>(pairs_[k].s_index), static_cast<Eigen::Index>(pairs_[k].t_index)) = b[k];
    return B;
}

CausalBasis build_causal_basis(const UniSplineBasis& uni) { return CausalBasis(uni); }

double beta_surface(std::span<const double> b, const CausalBasis& basis, double s, double t) {
    if (b.size() != basis.size()) throw ContractError("coefficient vector length does not match basis size");
    if (s > t) {
        // still validate the domain
        if (!(s >= basis.uni().a() && s <= basis.uni().b() && t >= basis.uni().a() && t <= basis.uni().b()))
            throw DomainError("(s,t) outside the domain");
        return 0.0;
    }
    const std::vector<double> phi = basis.eval_phi(s, t);
    double v = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) v += b[k] * phi[k];
    return v;
}

} // namespace dcfr
