#include "mmco/socp.hpp"

#include <cstdio>

#include <Eigen/OrderingMethods>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mmco::socp {

int ConeDims::total() const {
    int n = linear;
    for (int q : soc) n += q;
    return n;
}

std::string to_string(Status status) {
    switch (status) {
        case Status::optimal: return "optimal";
        case Status::primal_infeasible: return "infeasible";
        case Status::dual_infeasible: return "unbounded";
        case Status::max_iterations: return "max-iterations";
        case Status::numerical_failure: return "numerical-failure";
    }
    return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double jdot(const Eigen::Ref<const Eigen::VectorXd>& u) {
    // Factored form keeps the sign reliable near the cone boundary.
    const double n = u.tail(u.size() - 1).norm();
    return (u(0) - n) * (u(0) + n);
}

// Smallest positive root of a*t^2 + b*t + c (c > 0 assumed), or inf.
double smallest_positive_root(double a, double b, double c) {
    const double scale = std::max({std::abs(a), std::abs(b), std::abs(c), 1e-300});
    if (std::abs(a) <= 1e-14 * scale) {
        return b < 0.0 ? -c / b : kInf;
    }
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return kInf;
    const double sq = std::sqrt(disc);
    const double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
    double best = kInf;
    for (double r : {q / a, q != 0.0 ? c / q : kInf}) {
        if (r > 0.0 && r < best) best = r;
    }
    return best;
}

// Nesterov-Todd scaling point for every cone in the product.
struct Scaling {
    const ConeDims* dims = nullptr;
    Eigen::VectorXd linear_w;
    std::vector<double> beta;
    std::vector<Eigen::VectorXd> wbar;
    Eigen::VectorXd lambda;

    static Scaling identity(const ConeDims& dims) {
        Scaling w;
        w.dims = &dims;
        w.linear_w = Eigen::VectorXd::Ones(dims.linear);
        for (int q : dims.soc) {
            w.beta.push_back(1.0);
            Eigen::VectorXd e = Eigen::VectorXd::Zero(q);
            e(0) = 1.0;
            w.wbar.push_back(e);
        }
        return w;
    }

    static bool compute(const ConeDims& dims, const Eigen::VectorXd& s, const Eigen::VectorXd& z,
                        Scaling& w) {
        w.dims = &dims;
        const int l = dims.linear;
        w.linear_w = (s.head(l).array() / z.head(l).array()).sqrt();
        w.beta.resize(dims.soc.size());
        w.wbar.resize(dims.soc.size());
        int offset = l;
        for (std::size_t k = 0; k < dims.soc.size(); ++k) {
            const int q = dims.soc[k];
            auto sk = s.segment(offset, q);
            auto zk = z.segment(offset, q);
            const double js = jdot(sk);
            const double jz = jdot(zk);
            if (!(js > 0.0) || !(jz > 0.0)) return false;
            Eigen::VectorXd sbar = sk / std::sqrt(js);
            Eigen::VectorXd zbar = zk / std::sqrt(jz);
            const double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
            Eigen::VectorXd wb = sbar;
            wb(0) += zbar(0);
            wb.tail(q - 1) -= zbar.tail(q - 1);
            wb /= 2.0 * gamma;
            w.beta[k] = std::pow(js / jz, 0.25);
            w.wbar[k] = std::move(wb);
            offset += q;
        }
        w.lambda = w.apply(z);
        return w.lambda.allFinite();
    }

    // W v. W is symmetric for both cone families.
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
        Eigen::VectorXd out(v.size());
        const int l = dims->linear;
        out.head(l) = linear_w.cwiseProduct(v.head(l));
        int offset = l;
        for (std::size_t k = 0; k < dims->soc.size(); ++k) {
            const int q = dims->soc[k];
            const Eigen::VectorXd& w = wbar[k];
            auto vk = v.segment(offset, q);
            const double w1v1 = w.tail(q - 1).dot(vk.tail(q - 1));
            out(offset) = beta[k] * (w(0) * vk(0) + w1v1);
            out.segment(offset + 1, q - 1) =
                beta[k] * (vk.tail(q - 1) + (vk(0) + w1v1 / (1.0 + w(0))) * w.tail(q - 1));
            offset += q;
        }
        return out;
    }

    // Dense W'W block of one second-order cone.
    Eigen::MatrixXd soc_wtw(std::size_t k) const {
        const Eigen::VectorXd& w = wbar[k];
        const int q = static_cast<int>(w.size());
        Eigen::MatrixXd m = 2.0 * w * w.transpose();
        m(0, 0) -= 1.0;
        for (int i = 1; i < q; ++i) m(i, i) += 1.0;
        return beta[k] * beta[k] * m;
    }
};

Eigen::VectorXd cone_identity(const ConeDims& dims) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dims.total());
    e.head(dims.linear).setOnes();
    int offset = dims.linear;
    for (int q : dims.soc) {
        e(offset) = 1.0;
        offset += q;
    }
    return e;
}

Eigen::VectorXd jordan_product(const ConeDims& dims, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    Eigen::VectorXd out(u.size());
    const int l = dims.linear;
    out.head(l) = u.head(l).cwiseProduct(v.head(l));
    int offset = l;
    for (int q : dims.soc) {
        auto uk = u.segment(offset, q);
        auto vk = v.segment(offset, q);
        out(offset) = uk.dot(vk);
        out.segment(offset + 1, q - 1) = uk(0) * vk.tail(q - 1) + vk(0) * uk.tail(q - 1);
        offset += q;
    }
    return out;
}

// x such that lambda o x = d.
Eigen::VectorXd jordan_divide(const ConeDims& dims, const Eigen::VectorXd& lambda, const Eigen::VectorXd& d) {
    Eigen::VectorXd out(d.size());
    const int l = dims.linear;
    out.head(l) = d.head(l).cwiseQuotient(lambda.head(l));
    int offset = l;
    for (int q : dims.soc) {
        auto lk = lambda.segment(offset, q);
        auto dk = d.segment(offset, q);
        const double x0 = (lk(0) * dk(0) - lk.tail(q - 1).dot(dk.tail(q - 1))) / jdot(lk);
        out(offset) = x0;
        out.segment(offset + 1, q - 1) = (dk.tail(q - 1) - x0 * lk.tail(q - 1)) / lk(0);
        offset += q;
    }
    return out;
}

// Sparse LDL' of a quasi-definite matrix with known pivot signs. Pivots that
// come out tiny or with the wrong sign are replaced by sign*delta.
class QuasiDefiniteLdl {
public:
    // `lower` holds the lower triangle of the symmetric matrix.
    void analyze(const SparseMatrix& lower, const std::vector<int>& signs) {
        const int n = static_cast<int>(lower.rows());
        SparseMatrix full = lower.selfadjointView<Eigen::Lower>();
        Eigen::AMDOrdering<int> amd;
        Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv;
        amd(full, pinv);
        perm_ = pinv.inverse();
        pinv_ = pinv;
        signs_.resize(n);
        for (int i = 0; i < n; ++i) signs_[perm_.indices()[i]] = signs[i];

        const SparseMatrix up = permuted_upper(lower);
        parent_.assign(n, -1);
        std::vector<int> flag(n), lnz(n, 0);
        for (int k = 0; k < n; ++k) {
            flag[k] = k;
            for (SparseMatrix::InnerIterator it(up, k); it; ++it) {
                for (int i = static_cast<int>(it.row()); i < k && flag[i] != k; i = parent_[i]) {
                    if (parent_[i] == -1) parent_[i] = k;
                    ++lnz[i];
                    flag[i] = k;
                }
            }
        }
        lp_.assign(n + 1, 0);
        for (int k = 0; k < n; ++k) lp_[k + 1] = lp_[k] + lnz[k];
        li_.resize(lp_[n]);
        lx_.resize(lp_[n]);
        d_.resize(n);
    }

    void factorize(const SparseMatrix& lower, double eps, double delta) {
        const SparseMatrix up = permuted_upper(lower);
        const int n = static_cast<int>(up.rows());
        std::vector<double> y(n, 0.0);
        std::vector<int> pattern(n), flag(n), fill(n);
        for (int k = 0; k < n; ++k) {
            int top = n;
            flag[k] = k;
            fill[k] = 0;
            for (SparseMatrix::InnerIterator it(up, k); it; ++it) {
                int i = static_cast<int>(it.row());
                y[i] += it.value();
                int len = 0;
                for (; flag[i] != k; i = parent_[i]) {
                    pattern[len++] = i;
                    flag[i] = k;
                }
                while (len > 0) pattern[--top] = pattern[--len];
            }
            double dk = y[k];
            y[k] = 0.0;
            for (; top < n; ++top) {
                const int i = pattern[top];
                const double yi = y[i];
                y[i] = 0.0;
                const int p2 = lp_[i] + fill[i];
                for (int p = lp_[i]; p < p2; ++p) y[li_[p]] -= lx_[p] * yi;
                const double l_ki = yi / d_[i];
                dk -= l_ki * yi;
                li_[p2] = k;
                lx_[p2] = l_ki;
                ++fill[i];
            }
            if (signs_[k] * dk <= eps) dk = signs_[k] * delta;
            d_[k] = dk;
        }
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
        Eigen::VectorXd x = perm_ * b;
        const int n = static_cast<int>(x.size());
        for (int j = 0; j < n; ++j) {
            for (int p = lp_[j]; p < lp_[j + 1]; ++p) x(li_[p]) -= lx_[p] * x(j);
        }
        for (int j = 0; j < n; ++j) x(j) /= d_[j];
        for (int j = n - 1; j >= 0; --j) {
            for (int p = lp_[j]; p < lp_[j + 1]; ++p) x(j) -= lx_[p] * x(li_[p]);
        }
        return pinv_ * x;
    }

private:
    SparseMatrix permuted_upper(const SparseMatrix& lower) const {
        SparseMatrix up(lower.rows(), lower.cols());
        up.selfadjointView<Eigen::Upper>() = lower.selfadjointView<Eigen::Lower>().twistedBy(perm_);
        return up;
    }

    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm_, pinv_;
    std::vector<int> signs_, parent_, lp_, li_;
    std::vector<double> lx_, d_;
};

class KktSystem {
public:
    KktSystem(const SparseMatrix& A, const SparseMatrix& G, const ConeDims& dims, double reg)
        : A_(A), G_(G), dims_(dims), reg_(reg), n_(static_cast<int>(A.cols())),
          p_(static_cast<int>(A.rows())), m_(static_cast<int>(G.rows())) {
        // Lower triangle: constraint blocks below the x block.
        for (int j = 0; j < A_.outerSize(); ++j) {
            for (SparseMatrix::InnerIterator it(A_, j); it; ++it) {
                base_.emplace_back(n_ + static_cast<int>(it.row()), j, it.value());
            }
        }
        for (int j = 0; j < G_.outerSize(); ++j) {
            for (SparseMatrix::InnerIterator it(G_, j); it; ++it) {
                base_.emplace_back(n_ + p_ + static_cast<int>(it.row()), j, it.value());
            }
        }
        for (int i = 0; i < n_; ++i) base_.emplace_back(i, i, reg_);
        for (int i = 0; i < p_; ++i) base_.emplace_back(n_ + i, n_ + i, -reg_);
        signs_.assign(n_ + p_ + m_, -1);
        std::fill(signs_.begin(), signs_.begin() + n_, 1);
    }

    // Iterative refinement in solve() runs against the unregularized operator.
    bool factor(const Scaling& w) {
        w_ = &w;
        std::vector<Eigen::Triplet<double>> trips = base_;
        const int zoff = n_ + p_;
        for (int i = 0; i < dims_.linear; ++i) {
            trips.emplace_back(zoff + i, zoff + i, -w.linear_w(i) * w.linear_w(i) - reg_);
        }
        int offset = dims_.linear;
        for (std::size_t k = 0; k < dims_.soc.size(); ++k) {
            const int q = dims_.soc[k];
            const Eigen::MatrixXd block = w.soc_wtw(k);
            for (int c = 0; c < q; ++c) {
                for (int r = c; r < q; ++r) {
                    trips.emplace_back(zoff + offset + r, zoff + offset + c,
                                       -block(r, c) - (r == c ? reg_ : 0.0));
                }
            }
            offset += q;
        }
        const int dim = n_ + p_ + m_;
        SparseMatrix K(dim, dim);
        K.setFromTriplets(trips.begin(), trips.end());
        if (!analyzed_) {
            ldl_.analyze(K, signs_);
            analyzed_ = true;
        }
        ldl_.factorize(K, 1e-13, 1e-7);
        return true;
    }

    // Solves [0 A' G'; A 0 0; G 0 -W'W] [dx; dy; dz] = [rx; ry; rz].
    void solve(const Eigen::VectorXd& rx, const Eigen::VectorXd& ry, const Eigen::VectorXd& rz,
               Eigen::VectorXd& dx, Eigen::VectorXd& dy, Eigen::VectorXd& dz, int refinement) const {
        Eigen::VectorXd rhs(n_ + p_ + m_);
        rhs << rx, ry, rz;
        Eigen::VectorXd sol = ldl_.solve(rhs);
        for (int it = 0; it < refinement; ++it) {
            const Eigen::VectorXd err = rhs - multiply(sol);
            if (err.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) break;
            sol += ldl_.solve(err);
        }
        dx = sol.head(n_);
        dy = sol.segment(n_, p_);
        dz = sol.tail(m_);
    }

private:
    Eigen::VectorXd multiply(const Eigen::VectorXd& v) const {
        const Eigen::VectorXd vx = v.head(n_);
        const Eigen::VectorXd vy = v.segment(n_, p_);
        const Eigen::VectorXd vz = v.tail(m_);
        Eigen::VectorXd out(n_ + p_ + m_);
        out.head(n_) = A_.transpose() * vy + G_.transpose() * vz;
        out.segment(n_, p_) = A_ * vx;
        out.tail(m_) = G_ * vx - w_->apply(w_->apply(vz));
        return out;
    }

    const SparseMatrix& A_;
    const SparseMatrix& G_;
    const ConeDims& dims_;
    double reg_;
    int n_, p_, m_;
    std::vector<Eigen::Triplet<double>> base_;
    std::vector<int> signs_;
    const Scaling* w_ = nullptr;
    QuasiDefiniteLdl ldl_;
    bool analyzed_ = false;
};

struct Equilibration {
    Eigen::VectorXd col;   // x = col .* x_scaled
    Eigen::VectorXd row_a; // b_scaled = row_a .* b
    Eigen::VectorXd row_g; // h_scaled = row_g .* h (uniform within each cone)
};

Equilibration equilibrate(SparseMatrix& A, SparseMatrix& G, const ConeDims& dims, int passes) {
    const int n = static_cast<int>(A.cols());
    const int p = static_cast<int>(A.rows());
    const int m = static_cast<int>(G.rows());
    Equilibration e{Eigen::VectorXd::Ones(n), Eigen::VectorXd::Ones(p), Eigen::VectorXd::Ones(m)};
    auto safe_inv_sqrt = [](double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : 1.0; };
    for (int pass = 0; pass < passes; ++pass) {
        Eigen::VectorXd cmax = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd amax = Eigen::VectorXd::Zero(p);
        Eigen::VectorXd gmax = Eigen::VectorXd::Zero(m);
        for (int j = 0; j < n; ++j) {
            for (SparseMatrix::InnerIterator it(A, j); it; ++it) {
                const double v = std::abs(it.value());
                cmax(j) = std::max(cmax(j), v);
                amax(it.row()) = std::max(amax(it.row()), v);
            }
            for (SparseMatrix::InnerIterator it(G, j); it; ++it) {
                const double v = std::abs(it.value());
                cmax(j) = std::max(cmax(j), v);
                gmax(it.row()) = std::max(gmax(it.row()), v);
            }
        }
        int offset = dims.linear;
        for (int q : dims.soc) {
            const double v = gmax.segment(offset, q).maxCoeff();
            gmax.segment(offset, q).setConstant(v);
            offset += q;
        }
        Eigen::VectorXd dc = cmax.unaryExpr(safe_inv_sqrt);
        Eigen::VectorXd da = amax.unaryExpr(safe_inv_sqrt);
        Eigen::VectorXd dg = gmax.unaryExpr(safe_inv_sqrt);
        A = da.asDiagonal() * A * dc.asDiagonal();
        G = dg.asDiagonal() * G * dc.asDiagonal();
        e.col = e.col.cwiseProduct(dc);
        e.row_a = e.row_a.cwiseProduct(da);
        e.row_g = e.row_g.cwiseProduct(dg);
    }
    return e;
}

void shift_into_cone(const ConeDims& dims, Eigen::VectorXd& u) {
    const double ts = -cone::min_eigenvalue(dims, u);
    if (ts >= -1e-8 * std::max(u.norm(), 1.0)) {
        u += (1.0 + ts) * cone_identity(dims);
    }
}

}  // namespace

namespace cone {

double min_eigenvalue(const ConeDims& dims, const Eigen::VectorXd& u) {
    double lo = kInf;
    if (dims.linear > 0) lo = u.head(dims.linear).minCoeff();
    int offset = dims.linear;
    for (int q : dims.soc) {
        lo = std::min(lo, u(offset) - u.segment(offset + 1, q - 1).norm());
        offset += q;
    }
    return lo;
}

double max_step(const ConeDims& dims, const Eigen::VectorXd& u, const Eigen::VectorXd& du) {
    double alpha = kInf;
    for (int i = 0; i < dims.linear; ++i) {
        if (du(i) < 0.0) alpha = std::min(alpha, -u(i) / du(i));
    }
    int offset = dims.linear;
    for (int q : dims.soc) {
        auto uk = u.segment(offset, q);
        auto dk = du.segment(offset, q);
        const double a = jdot(dk);
        const double b = 2.0 * (uk(0) * dk(0) - uk.tail(q - 1).dot(dk.tail(q - 1)));
        const double c = std::max(jdot(uk), 0.0);
        alpha = std::min(alpha, smallest_positive_root(a, b, c));
        if (dk(0) < 0.0) alpha = std::min(alpha, -uk(0) / dk(0));
        offset += q;
    }
    return alpha;
}

}  // namespace cone

namespace {

Result solve_impl(const Problem& problem, const Settings& settings);

// Phase 1: min t  s.t.  A x = b,  h - G x + t e in K,  t >= -1.
// A strictly positive optimum certifies primal infeasibility.
bool phase_one_infeasible(const Problem& problem, const Settings& settings) {
    const int n = static_cast<int>(problem.c.size());
    const int m = static_cast<int>(problem.h.size());
    const ConeDims& dims = problem.cones;
    const Eigen::VectorXd e = cone_identity(dims);

    std::vector<Eigen::Triplet<double>> trips;
    trips.emplace_back(0, n, -1.0);
    for (int j = 0; j < problem.G.outerSize(); ++j) {
        for (SparseMatrix::InnerIterator it(problem.G, j); it; ++it) {
            trips.emplace_back(1 + static_cast<int>(it.row()), j, it.value());
        }
    }
    for (int i = 0; i < m; ++i) {
        if (e(i) != 0.0) trips.emplace_back(1 + i, n, -e(i));
    }
    Problem phase;
    phase.G.resize(m + 1, n + 1);
    phase.G.setFromTriplets(trips.begin(), trips.end());
    phase.h.resize(m + 1);
    phase.h << 1.0, problem.h;
    phase.cones = ConeDims{dims.linear + 1, dims.soc};
    phase.c = Eigen::VectorXd::Zero(n + 1);
    phase.c(n) = 1.0;
    phase.A = problem.A;
    phase.A.conservativeResize(problem.A.rows(), n + 1);
    phase.b = problem.b;

    const Result r = solve_impl(phase, settings);
    if (r.status != Status::optimal) return false;
    const double hscale = std::max(1.0, problem.h.lpNorm<Eigen::Infinity>());
    return r.x(n) > std::sqrt(settings.feasibility_tol) * hscale;
}

}  // namespace

Result solve(const Problem& problem, const Settings& settings) {
    Result r = solve_impl(problem, settings);
    if (r.status == Status::max_iterations || r.status == Status::numerical_failure) {
        if (phase_one_infeasible(problem, settings)) r.status = Status::primal_infeasible;
    }
    return r;
}

namespace {

Result solve_impl(const Problem& problem, const Settings& settings) {
    const ConeDims& dims = problem.cones;
    const int n = static_cast<int>(problem.c.size());
    const int p = static_cast<int>(problem.b.size());
    const int m = static_cast<int>(problem.h.size());
    if (problem.A.rows() != p || (p > 0 && problem.A.cols() != n) || problem.G.rows() != m ||
        problem.G.cols() != n || dims.total() != m) {
        throw std::invalid_argument("socp::solve: inconsistent problem dimensions");
    }
    for (int q : dims.soc) {
        if (q < 2) throw std::invalid_argument("socp::solve: cone dimension must be >= 2");
    }

    SparseMatrix A = problem.A;
    if (A.cols() != n) A.resize(0, n);
    SparseMatrix G = problem.G;
    A.makeCompressed();
    G.makeCompressed();
    Equilibration eq{Eigen::VectorXd::Ones(n), Eigen::VectorXd::Ones(p), Eigen::VectorXd::Ones(m)};
    if (settings.equilibrate) eq = equilibrate(A, G, dims, settings.equilibration_passes);
    const Eigen::VectorXd c = eq.col.cwiseProduct(problem.c);
    const Eigen::VectorXd b = eq.row_a.cwiseProduct(problem.b);
    const Eigen::VectorXd h = eq.row_g.cwiseProduct(problem.h);

    Result result;
    auto finish = [&](Status status, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& s, const Eigen::VectorXd& z) {
        result.status = status;
        result.x = eq.col.cwiseProduct(x);
        result.y = eq.row_a.cwiseProduct(y);
        result.z = eq.row_g.cwiseProduct(z);
        result.s = s.cwiseQuotient(eq.row_g);
        result.primal_objective = problem.c.dot(result.x);
        result.dual_objective = -problem.b.dot(result.y) - problem.h.dot(result.z);
        return result;
    };

    KktSystem kkt(A, G, dims, settings.static_regularization);
    Scaling w = Scaling::identity(dims);
    if (!kkt.factor(w)) {
        return finish(Status::numerical_failure, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(p),
                      cone_identity(dims), cone_identity(dims));
    }

    Eigen::VectorXd x, y, z, s, dummy;
    kkt.solve(Eigen::VectorXd::Zero(n), b, h, x, dummy, s, settings.refinement_steps);
    s = -s;
    kkt.solve(-c, Eigen::VectorXd::Zero(p), Eigen::VectorXd::Zero(m), dummy, y, z, settings.refinement_steps);
    shift_into_cone(dims, s);
    shift_into_cone(dims, z);

    const double degree = std::max(1, dims.degree());
    const Eigen::VectorXd e = cone_identity(dims);
    const double bnorm = std::max(1.0, b.norm());
    const double hnorm = std::max(1.0, h.norm());
    const double cnorm = std::max(1.0, c.norm());

    for (int iter = 0; iter <= settings.max_iterations; ++iter) {
        result.iterations = iter;
        const Eigen::VectorXd rx = c + A.transpose() * y + G.transpose() * z;
        const Eigen::VectorXd ry = A * x - b;
        const Eigen::VectorXd rz = G * x + s - h;
        const double pcost = c.dot(x);
        const double dcost = -b.dot(y) - h.dot(z);
        const double gap = s.dot(z);
        const double pres = std::max(ry.norm() / bnorm, rz.norm() / hnorm);
        const double dres = rx.norm() / cnorm;
        double relgap = kInf;
        if (pcost < 0.0) relgap = gap / -pcost;
        else if (dcost > 0.0) relgap = gap / dcost;
        result.primal_residual = pres;
        result.dual_residual = dres;
        result.gap = gap;
        if (settings.verbose) {
            std::fprintf(stderr, "%3d  pcost %+.9e  dcost %+.9e  gap %.2e  pres %.2e  dres %.2e\n", iter, pcost, dcost,
                         gap, pres, dres);
        }

        if (pres <= settings.feasibility_tol && dres <= settings.feasibility_tol &&
            (gap <= settings.gap_tol || relgap <= settings.gap_tol)) {
            return finish(Status::optimal, x, y, s, z);
        }

        // Farkas certificates on the current iterate.
        const double hz_by = -(b.dot(y) + h.dot(z));
        if (hz_by > 0.0 && (rx - c).norm() <= settings.infeasibility_tol * hz_by) {
            return finish(Status::primal_infeasible, x, y / hz_by, s, z / hz_by);
        }
        if (pcost < 0.0 && (A * x).norm() <= settings.infeasibility_tol * -pcost &&
            (G * x + s).norm() <= settings.infeasibility_tol * -pcost) {
            return finish(Status::dual_infeasible, x / -pcost, y, s / -pcost, z);
        }
        if (iter == settings.max_iterations) break;

        if (!Scaling::compute(dims, s, z, w) || !kkt.factor(w)) {
            if (settings.verbose) std::fprintf(stderr, "     %s failed\n", w.lambda.allFinite() ? "factorization" : "scaling");
            return finish(Status::numerical_failure, x, y, s, z);
        }
        const Eigen::VectorXd& lambda = w.lambda;
        const double mu = gap / degree;
        const Eigen::VectorXd lambda_sq = jordan_product(dims, lambda, lambda);

        auto newton = [&](const Eigen::VectorXd& target, Eigen::VectorXd& dx, Eigen::VectorXd& dy,
                          Eigen::VectorXd& dz, Eigen::VectorXd& ds) {
            const Eigen::VectorXd q = jordan_divide(dims, lambda, target);
            kkt.solve(-rx, -ry, -rz - w.apply(q), dx, dy, dz, settings.refinement_steps);
            ds = w.apply(q - w.apply(dz));
        };

        Eigen::VectorXd dx, dy, dz, ds;
        newton(-lambda_sq, dx, dy, dz, ds);
        const double alpha_aff = std::min({1.0, cone::max_step(dims, s, ds), cone::max_step(dims, z, dz)});
        const double mu_aff = (s + alpha_aff * ds).dot(z + alpha_aff * dz) / degree;
        const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

        // W^{-T} ds_aff and W dz_aff live in the scaled (lambda) space.
        const Eigen::VectorXd wdz = w.apply(dz);
        const Eigen::VectorXd ds_scaled = jordan_divide(dims, lambda, -lambda_sq) - wdz;
        const Eigen::VectorXd target =
            -lambda_sq - jordan_product(dims, ds_scaled, wdz) + sigma * mu * e;
        newton(target, dx, dy, dz, ds);
        const double alpha_max = std::min(cone::max_step(dims, s, ds), cone::max_step(dims, z, dz));
        const double alpha = std::min(1.0, settings.step_fraction * alpha_max);
        if (settings.verbose) std::fprintf(stderr, "     sigma %.2e  alpha %.2e\n", sigma, alpha);
        if (!(alpha > 0.0) || !dx.allFinite() || !dz.allFinite()) {
            return finish(Status::numerical_failure, x, y, s, z);
        }
        x += alpha * dx;
        y += alpha * dy;
        z += alpha * dz;
        s += alpha * ds;
    }
    return finish(Status::max_iterations, x, y, s, z);
}

}  // namespace

}  // namespace mmco::socp
