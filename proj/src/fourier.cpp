#include "maplab/fourier.hpp"

#include "maplab/errors.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace maplab {

namespace {

constexpr double kSeparationFloor = 1e-6;
constexpr double kMaxSegmentStep = 0.05;
const Complex I(0.0, 1.0);

CMatrix one_step(const MapSpec& spec, const Vector& zeta) {
    if (zeta.size() != spec.dim()) throw InvalidSpec("frequency dimension differs from d");
    if (const auto& ct = spec.ct_source()) {
        const double z = zeta(0);
        return matrix_exp(ct->fourier_generator(z)) *
               std::exp(-I * z * spec.centering_shift()(0));
    }
    const auto S = spec.states();
    const Matrix& P = spec.kernel().P();
    CMatrix M = CMatrix::Zero(S, S);
    for (Eigen::Index x = 0; x < S; ++x) {
        for (Eigen::Index y = 0; y < S; ++y) {
            if (P(x, y) > 0.0) M(x, y) = P(x, y) * spec.law(x, y).cf(zeta);
        }
    }
    return M;
}

CMatrix matrix_power(CMatrix base, long n) {
    CMatrix result = CMatrix::Identity(base.rows(), base.cols());
    while (n > 0) {
        if (n & 1) result = result * base;
        n >>= 1;
        if (n) base = base * base;
    }
    return result;
}

Vector scalar_zeta(double z) {
    return Vector::Constant(1, z);
}

// Eigen-overlap weights; states outside the support keep a small weight so
// that eigenvectors living there stay comparable.
Vector overlap_weights(const Vector& pi) {
    return pi.cwiseMax(1e-12);
}

double overlap(const CVector& a, const CVector& b, const Vector& w) {
    Complex ip = 0.0;
    double na = 0.0, nb = 0.0;
    for (Eigen::Index x = 0; x < w.size(); ++x) {
        ip += w(x) * std::conj(a(x)) * b(x);
        na += w(x) * std::norm(a(x));
        nb += w(x) * std::norm(b(x));
    }
    return std::abs(ip) / std::sqrt(na * nb);
}

struct EigenData {
    CVector values;
    CMatrix vectors;
};

EigenData eigen(const CMatrix& S) {
    Eigen::ComplexEigenSolver<CMatrix> es(S, true);
    if (es.info() != Eigen::Success) throw BranchCollision("eigen solver failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

// Index of the branch eigenvalue given the previous eigenvector and eigenvalue.
Eigen::Index select_branch(const EigenData& e, const CVector& prev_v, Complex prev_lambda,
                           const Vector& w) {
    Eigen::Index best = 0;
    double best_ov = -1.0;
    for (Eigen::Index j = 0; j < e.values.size(); ++j) {
        const double ov = overlap(prev_v, e.vectors.col(j), w);
        if (ov > best_ov + 1e-12) {
            best = j;
            best_ov = ov;
        } else if (std::abs(ov - best_ov) <= 1e-12 &&
                   std::abs(e.values(j) - prev_lambda) < std::abs(e.values(best) - prev_lambda)) {
            best = j;
        }
    }
    return best;
}

double second_modulus(const CVector& values, Eigen::Index skip) {
    double k = 0.0;
    for (Eigen::Index j = 0; j < values.size(); ++j) {
        if (j != skip) k = std::max(k, std::abs(values(j)));
    }
    return k;
}

struct Tracked {
    Vector zeta;
    Complex lambda;
    CVector right;
    double kappa = 0.0;
    double separation = 0.0;
};

Tracked track_point(const MapSpec& spec, const Vector& zeta, const Tracked& prev, const Vector& w) {
    const auto e = eigen(one_step(spec, zeta));
    const auto j = select_branch(e, prev.right, prev.lambda, w);
    Tracked t;
    t.zeta = zeta;
    t.lambda = e.values(j);
    t.right = e.vectors.col(j);
    t.kappa = second_modulus(e.values, j);
    t.separation = std::abs(t.lambda) - t.kappa;
    return t;
}

[[noreturn]] void collision(const Vector& zeta, double sep) {
    std::ostringstream msg;
    msg << "dominant eigenvalue loses separation (" << sep << ") near zeta = (";
    for (Eigen::Index i = 0; i < zeta.size(); ++i) msg << (i ? ", " : "") << zeta(i);
    msg << ")";
    throw BranchCollision(msg.str());
}

Tracked origin(const MapSpec& spec) {
    const Vector zero = Vector::Zero(spec.dim());
    const auto e = eigen(one_step(spec, zero));
    Eigen::Index j = 0;
    for (Eigen::Index k = 1; k < e.values.size(); ++k) {
        if (std::abs(e.values(k) - 1.0) < std::abs(e.values(j) - 1.0)) j = k;
    }
    Tracked t;
    t.zeta = zero;
    t.lambda = e.values(j);
    t.right = e.vectors.col(j);
    t.kappa = second_modulus(e.values, j);
    t.separation = std::abs(t.lambda) - t.kappa;
    if (t.separation < kSeparationFloor) collision(zero, t.separation);
    return t;
}

// Walks from `from` to `to` in steps of at most kMaxSegmentStep, refining by
// golden section wherever the separation has an interior minimum.
Tracked track_segment(const MapSpec& spec, const Tracked& from, const Vector& to, const Vector& w,
                      double& min_sep) {
    const double len = (to - from.zeta).norm();
    const int m = std::max(8, static_cast<int>(std::ceil(len / kMaxSegmentStep)));
    std::vector<Tracked> samples{from};
    samples.reserve(static_cast<std::size_t>(m + 1));
    for (int s = 1; s <= m; ++s) {
        const Vector z = from.zeta + (static_cast<double>(s) / m) * (to - from.zeta);
        samples.push_back(track_point(spec, z, samples.back(), w));
        min_sep = std::min(min_sep, samples.back().separation);
        if (samples.back().separation < kSeparationFloor) collision(z, samples.back().separation);
    }
    for (int s = 1; s < m; ++s) {
        const double here = samples[s].separation;
        if (here >= 0.1 || here > samples[s - 1].separation || here > samples[s + 1].separation) continue;
        // Golden-section search for the minimum on [s-1, s+1].
        const Tracked& anchor = samples[s - 1];
        const Vector a0 = samples[s - 1].zeta, b0 = samples[s + 1].zeta;
        auto sep_at = [&](double u) {
            return track_point(spec, a0 + u * (b0 - a0), anchor, w);
        };
        const double g = (std::sqrt(5.0) - 1.0) / 2.0;
        double lo = 0.0, hi = 1.0;
        double u1 = hi - g * (hi - lo), u2 = lo + g * (hi - lo);
        Tracked t1 = sep_at(u1), t2 = sep_at(u2);
        for (int it = 0; it < 80 && hi - lo > 1e-14; ++it) {
            if (t1.separation < t2.separation) {
                hi = u2;
                u2 = u1;
                t2 = t1;
                u1 = hi - g * (hi - lo);
                t1 = sep_at(u1);
            } else {
                lo = u1;
                u1 = u2;
                t1 = t2;
                u2 = lo + g * (hi - lo);
                t2 = sep_at(u2);
            }
        }
        const Tracked& best = t1.separation < t2.separation ? t1 : t2;
        min_sep = std::min(min_sep, best.separation);
        if (best.separation < kSeparationFloor) collision(best.zeta, best.separation);
    }
    return samples.back();
}

BranchPoint finish_point(const MapSpec& spec, const Tracked& t) {
    const CMatrix S = one_step(spec, t.zeta);
    const auto n = S.rows();
    const CMatrix A = (S - t.lambda * CMatrix::Identity(n, n)).transpose();
    Eigen::JacobiSVD<CMatrix> svd(A, Eigen::ComputeFullV);
    const CVector left = svd.matrixV().col(n - 1);
    const Complex denom = left.transpose() * t.right;
    if (std::abs(denom) < 1e-12 * left.norm() * t.right.norm()) {
        collision(t.zeta, 0.0);
    }
    BranchPoint p;
    p.zeta = t.zeta;
    p.lambda = t.lambda;
    p.right = t.right;
    p.left = left;
    p.projection = t.right * left.transpose() / denom;
    p.kappa = t.kappa;
    p.separation = t.separation;
    return p;
}

BranchPoint branch_at(const MapSpec& spec, const Vector& zeta) {
    const Vector w = overlap_weights(spec.kernel().pi());
    double min_sep = 1.0;
    Tracked t = origin(spec);
    if (zeta.norm() > 0.0) t = track_segment(spec, t, zeta, w, min_sep);
    return finish_point(spec, t);
}

double weighted_condition(const CMatrix& V, const Vector& pi) {
    if (pi.minCoeff() <= 0.0) {
        Eigen::JacobiSVD<CMatrix> svd(V);
        const auto& s = svd.singularValues();
        return s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : INFINITY;
    }
    const Vector sq = pi.cwiseSqrt();
    const CMatrix B = sq.asDiagonal() * V;
    Eigen::JacobiSVD<CMatrix> svd(B);
    const auto& s = svd.singularValues();
    if (s(s.size() - 1) <= 1e-12 * s(0)) return INFINITY;
    return s(0) / s(s.size() - 1);
}

}  // namespace

// ---------------------------------------------------------------- operators

FourierOperator build_fourier(const MapSpec& spec, const Vector& zeta, int t) {
    if (t < 0) throw InvalidSpec("time must be non-negative");
    FourierOperator op;
    op.zeta = zeta;
    op.t = t;
    op.M = matrix_power(one_step(spec, zeta), t);
    return op;
}

FourierOperator build_fourier(const MapSpec& spec, double zeta, int t) {
    return build_fourier(spec, scalar_zeta(zeta), t);
}

FourierOperator build_fourier(const CtMapSpec& spec, double zeta, double t) {
    if (!(t >= 0.0)) throw InvalidSpec("time must be non-negative");
    FourierOperator op;
    op.zeta = scalar_zeta(zeta);
    op.t = t;
    op.M = matrix_exp(CMatrix(t * spec.fourier_generator(zeta)));
    return op;
}

double check_semigroup(const MapSpec& spec, const Vector& zeta, int s, int t) {
    if (s <= 0 || t <= 0) throw InvalidSpec("semigroup check needs s, t > 0");
    const CMatrix lhs = build_fourier(spec, zeta, s + t).M;
    const CMatrix rhs = build_fourier(spec, zeta, s).M * build_fourier(spec, zeta, t).M;
    return l2_operator_norm(CMatrix(lhs - rhs), spec.kernel().pi());
}

double check_semigroup(const CtMapSpec& spec, double zeta, double s, double t) {
    if (!(s > 0.0) || !(t > 0.0)) throw InvalidSpec("semigroup check needs s, t > 0");
    const CMatrix lhs = build_fourier(spec, zeta, s + t).M;
    const CMatrix rhs = build_fourier(spec, zeta, s).M * build_fourier(spec, zeta, t).M;
    return l2_operator_norm(CMatrix(lhs - rhs), spec.pi());
}

double spectral_radius(const CMatrix& M) {
    Eigen::ComplexEigenSolver<CMatrix> es(M, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------- branch

SpectralSummary lambda_branch(const MapSpec& spec, const std::vector<Vector>& grid) {
    if (grid.empty()) throw InvalidSpec("empty frequency grid");
    for (const auto& z : grid) {
        if (z.size() != spec.dim()) throw InvalidSpec("grid point dimension differs from d");
    }
    const auto zero_it = std::find_if(grid.begin(), grid.end(), [](const Vector& z) { return z.norm() == 0.0; });
    if (zero_it == grid.end()) throw InvalidSpec("frequency grid must contain 0");

    std::vector<std::size_t> order(grid.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return grid[a].norm() < grid[b].norm(); });

    const Vector w = overlap_weights(spec.kernel().pi());
    std::vector<std::optional<Tracked>> tracked(grid.size());
    std::vector<std::size_t> done;
    SpectralSummary summary;
    summary.min_separation = INFINITY;
    const Tracked root = origin(spec);
    summary.min_separation = root.separation;
    for (auto i : order) {
        if (grid[i].norm() == 0.0) {
            tracked[i] = root;
            done.push_back(i);
            continue;
        }
        // Predecessor: nearest point already on the branch (the origin if none closer).
        const Tracked* prev = &root;
        double best = grid[i].norm();
        for (auto j : done) {
            const double dist = (grid[i] - grid[j]).norm();
            if (dist < best) {
                best = dist;
                prev = &*tracked[j];
            }
        }
        tracked[i] = track_segment(spec, *prev, grid[i], w, summary.min_separation);
        done.push_back(i);
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        summary.points.push_back(finish_point(spec, *tracked[i]));
        summary.kappa_hat = std::max(summary.kappa_hat, summary.points.back().kappa);
        summary.min_separation = std::min(summary.min_separation, summary.points.back().separation);
    }
    return summary;
}

SpectralSummary lambda_branch(const MapSpec& spec, const std::vector<double>& grid) {
    std::vector<Vector> g;
    g.reserve(grid.size());
    for (double z : grid) g.push_back(scalar_zeta(z));
    return lambda_branch(spec, g);
}

double branch_radius(const MapSpec& spec, double r_max, double step) {
    if (spec.dim() != 1) throw InvalidSpec("branch_radius requires d = 1");
    if (!(step > 0.0) || !(r_max > 0.0)) throw InvalidSpec("branch_radius needs positive step and range");
    const Vector w = overlap_weights(spec.kernel().pi());
    const Tracked root = origin(spec);
    double radius = r_max;
    for (double sign : {1.0, -1.0}) {
        Tracked cur = root;
        double reached = 0.0;
        double min_sep = 1.0;
        try {
            for (double r = step; r <= r_max + 1e-12; r += step) {
                cur = track_segment(spec, cur, scalar_zeta(sign * std::min(r, r_max)), w, min_sep);
                reached = std::min(r, r_max);
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::BranchCollision) throw;
        }
        radius = std::min(radius, reached);
    }
    return radius;
}

// ---------------------------------------------------------------- derivatives

Derivatives derivatives_at_zero(const MapSpec& spec, int order) {
    if (order < 1 || order > 3) throw InvalidSpec("derivative order must be 1, 2 or 3");
    const int d = spec.dim();
    if (order == 3 && d != 1) throw InvalidSpec("third derivative requires d = 1");
    const double hs[2] = {1e-2, 5e-3};

    std::vector<Vector> pts{Vector::Zero(d)};
    auto add = [&](const Vector& z) {
        pts.push_back(z);
        return pts.size() - 1;
    };
    struct Idx {
        std::vector<std::size_t> p1, m1, p2, m2;
        std::vector<std::vector<std::array<std::size_t, 4>>> mixed;
    } idx[2];
    for (int k = 0; k < 2; ++k) {
        const double h = hs[k];
        idx[k].mixed.assign(static_cast<std::size_t>(d), std::vector<std::array<std::size_t, 4>>(d));
        for (int i = 0; i < d; ++i) {
            const Vector e = Vector::Unit(d, i);
            idx[k].p1.push_back(add(h * e));
            idx[k].m1.push_back(add(-h * e));
            idx[k].p2.push_back(add(2 * h * e));
            idx[k].m2.push_back(add(-2 * h * e));
            for (int j = 0; j < i; ++j) {
                const Vector f = Vector::Unit(d, j);
                idx[k].mixed[i][j] = {add(h * (e + f)), add(h * (e - f)), add(h * (f - e)), add(-h * (e + f))};
            }
        }
    }
    const auto summary = lambda_branch(spec, pts);
    auto lam = [&](std::size_t i) { return summary.points[i].lambda; };
    const Complex f0 = lam(0);

    auto rich = [](Complex coarse, Complex fine) { return (4.0 * fine - coarse) / 3.0; };
    Derivatives out;
    out.grad = CVector::Zero(d);
    out.hess = CMatrix::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        Complex D1[2], D2[2], D3[2];
        for (int k = 0; k < 2; ++k) {
            const double h = hs[k];
            const Complex p1 = lam(idx[k].p1[i]), m1 = lam(idx[k].m1[i]);
            const Complex p2 = lam(idx[k].p2[i]), m2 = lam(idx[k].m2[i]);
            D1[k] = (p1 - m1) / (2 * h);
            D2[k] = (p1 - 2.0 * f0 + m1) / (h * h);
            D3[k] = (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2 * h * h * h);
        }
        out.grad(i) = rich(D1[0], D1[1]);
        out.hess(i, i) = rich(D2[0], D2[1]);
        if (order == 3) out.third = rich(D3[0], D3[1]);
        for (int j = 0; j < i; ++j) {
            Complex Dm[2];
            for (int k = 0; k < 2; ++k) {
                const auto& q = idx[k].mixed[i][j];
                Dm[k] = (lam(q[0]) - lam(q[1]) - lam(q[2]) + lam(q[3])) / (4 * hs[k] * hs[k]);
            }
            out.hess(i, j) = out.hess(j, i) = rich(Dm[0], Dm[1]);
        }
    }
    const CMatrix sigma_c = -out.hess + out.grad * out.grad.transpose();
    out.Sigma = sigma_c.real();
    if (d == 1) {
        out.sigma2 = out.Sigma(0, 0);
        if (out.third) {
            const Complex g = out.grad(0), h2 = out.hess(0, 0);
            const Complex log3 = *out.third - 3.0 * g * h2 + 2.0 * g * g * g;
            out.mu3 = (I * log3).real();
        }
    }
    return out;
}

// ---------------------------------------------------------------- expansion

ExpansionEvaluation evaluate_expansion(const MapSpec& spec, const Vector& zeta, int n, const Vector& f) {
    if (n < 0) throw InvalidSpec("n must be non-negative");
    if (f.size() != spec.states()) throw InvalidSpec("test function length differs from state count");
    const auto bp = branch_at(spec, zeta);
    const CMatrix S = one_step(spec, zeta);
    const CMatrix N = S - bp.lambda * bp.projection;
    const CVector pi = spec.kernel().pi().cast<Complex>();
    const CVector fc = f.cast<Complex>();

    // N Pi = 0, so N^n (I - Pi) = N^n for n >= 1 and the identity also holds at n = 0.
    CVector u = fc, r = fc - bp.projection * fc;
    for (int k = 0; k < n; ++k) {
        u = S * u;
        r = N * r;
    }
    ExpansionEvaluation ev;
    ev.zeta = zeta;
    ev.n = n;
    ev.lambda = bp.lambda;
    ev.L = pi.transpose() * (bp.projection * fc);
    ev.lhs = pi.transpose() * u;
    ev.rhs_main = std::pow(bp.lambda, n) * ev.L;
    ev.rhs_rem = pi.transpose() * r;
    ev.kappa = bp.kappa;
    ev.remainder_constant = weighted_condition(eigen(S).vectors, spec.kernel().pi());
    return ev;
}

ExpansionEvaluation evaluate_expansion(const MapSpec& spec, double zeta, int n, const Vector& f) {
    return evaluate_expansion(spec, scalar_zeta(zeta), n, f);
}

std::vector<Complex> remainder_sequence(const MapSpec& spec, double zeta, int n_max, const Vector& f) {
    if (n_max < 0) throw InvalidSpec("n_max must be non-negative");
    const Vector z = scalar_zeta(zeta);
    const auto bp = branch_at(spec, z);
    const CMatrix N = one_step(spec, z) - bp.lambda * bp.projection;
    const CVector pi = spec.kernel().pi().cast<Complex>();
    CVector r = f.cast<Complex>();
    r -= bp.projection * r;
    std::vector<Complex> out;
    out.reserve(static_cast<std::size_t>(n_max + 1));
    for (int k = 0; k <= n_max; ++k) {
        out.push_back(pi.transpose() * r);
        r = N * r;
    }
    return out;
}

// ---------------------------------------------------------------- nonlattice

NonlatticeScan nonlattice_scan(const MapSpec& spec, const std::vector<Vector>& K) {
    if (K.empty()) throw InvalidSpec("empty frequency set");
    NonlatticeScan scan;
    scan.rho_hat = -1.0;
    for (const auto& z : K) {
        if (z.norm() == 0.0) throw InvalidSpec("nonlattice scan set must exclude 0");
        const double r = spectral_radius(one_step(spec, z));
        scan.radius.push_back(r);
        if (r > scan.rho_hat) {
            scan.rho_hat = r;
            scan.worst_zeta = z;
        }
    }
    scan.nonlattice = scan.rho_hat < 1.0 - 1e-8;
    return scan;
}

NonlatticeScan nonlattice_scan(const MapSpec& spec, const std::vector<double>& K) {
    std::vector<Vector> g;
    g.reserve(K.size());
    for (double z : K) g.push_back(scalar_zeta(z));
    return nonlattice_scan(spec, g);
}

// ---------------------------------------------------------------- contour

ContourResult contour_crosscheck(const MapSpec& spec, double zeta, int n, std::optional<double> kappa) {
    if (n < 1) throw InvalidSpec("contour cross-check needs n >= 1");
    const Vector z = scalar_zeta(zeta);
    const auto bp = branch_at(spec, z);
    const double lam_abs = std::abs(bp.lambda);

    double k = 0.0;
    if (kappa) {
        k = *kappa;
    } else {
        k = 0.5 * (bp.kappa + lam_abs);
        const auto table = spectral_gap_report(spec.kernel(), 32);
        if (table.fit && table.fit->epsilon > 0.0) {
            const double paper_k = 0.5 * (1.0 + std::exp(-table.fit->epsilon));
            if (paper_k > bp.kappa + 1e-6 && paper_k < lam_abs - 1e-6) k = paper_k;
        }
    }
    const CMatrix S = one_step(spec, z);
    const auto e = eigen(S);
    const double r1 = 1.0 - k;
    if (!(r1 > 1e-8) || !(k > 0.0)) throw SingularResolvent("contour radius degenerate");
    for (Eigen::Index j = 0; j < e.values.size(); ++j) {
        const Complex mu = e.values(j);
        if (std::abs(std::abs(mu - 1.0) - r1) < 1e-8 || std::abs(std::abs(mu) - k) < 1e-8) {
            throw SingularResolvent("an eigenvalue lies on the integration contour");
        }
    }
    if (std::abs(bp.lambda - 1.0) >= r1) {
        throw BranchCollision("contour around 1 does not enclose the branch eigenvalue");
    }
    for (Eigen::Index j = 0; j < e.values.size(); ++j) {
        if (std::abs(e.values(j) - bp.lambda) > 1e-9 && std::abs(e.values(j) - 1.0) < r1) {
            throw BranchCollision("contour around 1 encloses a second eigenvalue");
        }
    }

    constexpr int kNodes = 256;
    const auto m = S.rows();
    const CMatrix Id = CMatrix::Identity(m, m);
    CMatrix proj = CMatrix::Zero(m, m), rem = CMatrix::Zero(m, m);
    for (int q = 0; q < kNodes; ++q) {
        const Complex unit = std::exp(I * (2.0 * std::numbers::pi * q / kNodes));
        const Complex z1 = 1.0 + r1 * unit;
        proj += (z1 * Id - S).partialPivLu().inverse() * (r1 * unit);
        const Complex z0 = k * unit;
        rem += (z0 * Id - S).partialPivLu().inverse() * (std::pow(z0, n) * k * unit);
    }
    proj /= static_cast<double>(kNodes);
    rem /= static_cast<double>(kNodes);

    const CMatrix N = S - bp.lambda * bp.projection;
    const CMatrix Nn = matrix_power(N, n);
    ContourResult out;
    out.kappa = k;
    out.projection_residual = l2_operator_norm(CMatrix(proj - bp.projection), spec.kernel().pi());
    out.remainder_residual = l2_operator_norm(CMatrix(rem - Nn), spec.kernel().pi());
    return out;
}

// ---------------------------------------------------------------- inversion

std::vector<double> inversion_cdf(const MapSpec& spec, int n, double sigma, const std::vector<double>& a,
                                  const std::optional<Vector>& initial, const InversionOptions& options) {
    if (spec.dim() != 1) throw InvalidSpec("Fourier inversion requires d = 1");
    if (n < 1 || !(sigma > 0.0)) throw InvalidSpec("Fourier inversion needs n >= 1 and sigma > 0");
    if (detect_lattice(spec).is_lattice) {
        throw LatticeSpec("lattice increments: the distribution of Y_n has atoms");
    }
    const Vector mu = initial ? *initial : spec.kernel().pi();
    if (mu.size() != spec.states()) throw InvalidSpec("initial distribution has wrong length");
    const double scale = sigma * std::sqrt(static_cast<double>(n));

    auto psi = [&](double v) {
        const CMatrix Sn = matrix_power(one_step(spec, scalar_zeta(v / scale)), n);
        const CVector ones = CVector::Ones(spec.states());
        return Complex(mu.cast<Complex>().transpose() * (Sn * ones));
    };
    if (std::abs(psi(options.v_max)) > 1e-12) {
        throw LatticeSpec("characteristic function does not decay over the inversion range");
    }

    using GL = boost::math::quadrature::gauss<double, 20>;
    const auto& xs = GL::abscissa();
    const auto& ws = GL::weights();
    const double width = options.v_max / options.panels;
    std::vector<double> nodes, weights;
    std::vector<Complex> values;
    for (int p = 0; p < options.panels; ++p) {
        const double mid = (p + 0.5) * width, half = 0.5 * width;
        for (std::size_t q = 0; q < xs.size(); ++q) {
            for (double sgn : {-1.0, 1.0}) {
                if (xs[q] == 0.0 && sgn < 0.0) continue;
                const double v = mid + sgn * half * xs[q];
                nodes.push_back(v);
                weights.push_back(half * ws[q]);
                values.push_back(psi(v));
            }
        }
    }
    std::vector<double> out;
    out.reserve(a.size());
    for (double y : a) {
        double s = 0.0;
        for (std::size_t q = 0; q < nodes.size(); ++q) {
            s += weights[q] * (std::exp(-I * nodes[q] * y) * values[q]).imag() / nodes[q];
        }
        out.push_back(0.5 - s / std::numbers::pi);
    }
    return out;
}

}  // namespace maplab
