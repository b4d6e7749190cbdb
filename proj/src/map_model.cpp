#include "maplab/map_model.hpp"

#include "maplab/errors.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace maplab {

namespace {

constexpr double kBinom[5][5] = {
    {1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0}, {1, 3, 3, 1, 0}, {1, 4, 6, 4, 1}};

void require_finite(const Vector& v, const char* what) {
    if (!v.allFinite()) throw InvalidSpec(std::string(what) + " has non-finite entries");
}

// Geometric envelope ||P^k - Pi||_2 <= kappa^floor(k / tau).
struct GeometricEnvelope {
    int tau = 1;
    double kappa = 0.0;

    double tail_from(long k) const {
        if (kappa == 0.0) return k >= tau ? 0.0 : static_cast<double>(tau);
        return tau * std::pow(kappa, static_cast<double>(k / tau)) / (1.0 - kappa);
    }
};

GeometricEnvelope gap_envelope(const StochasticKernel& kernel) {
    const Matrix Pi = kernel.projection();
    const double b1 = l2_operator_norm(Matrix(kernel.P() - Pi), kernel.pi());
    if (b1 < 1.0 - 1e-12) return {1, b1};
    const auto table = spectral_gap_report(kernel, 65);
    for (int t = 2; t <= table.t_max(); ++t) {
        if (table.at(t) < 1.0 - 1e-12) return {t - 1, table.at(t)};
    }
    throw GapAbsent("no L2 contraction of P^k - Pi found for k <= 64");
}

double weighted_ratio_norm(const Vector& r, const Vector& pi) {
    double s = 0.0;
    for (Eigen::Index x = 0; x < pi.size(); ++x) {
        if (pi(x) > 0.0) s += r(x) * r(x) / pi(x);
    }
    return std::sqrt(s);
}

double weighted_norm(const Vector& g, const Vector& pi) {
    double s = 0.0;
    for (Eigen::Index x = 0; x < pi.size(); ++x) s += pi(x) * g(x) * g(x);
    return std::sqrt(s);
}

Vector validated_initial(const Vector& mu, const Vector& pi) {
    if (mu.size() != pi.size()) throw InvalidSpec("initial distribution has wrong length");
    if (!mu.allFinite() || mu.minCoeff() < 0.0 || std::abs(mu.sum() - 1.0) > 1e-9) {
        throw InvalidSpec("initial distribution must be non-negative and sum to 1");
    }
    return mu;
}

// Real gcd by Euclid with a remainder tolerance; zero entries are ignored.
double real_gcd(const std::vector<double>& values, double tol) {
    double g = 0.0;
    for (double v : values) {
        double b = std::abs(v);
        if (b <= tol) continue;
        double a = g;
        if (a == 0.0) {
            g = b;
            continue;
        }
        if (a < b) std::swap(a, b);
        while (b > tol) {
            double r = std::fmod(a, b);
            if (b - r <= tol) r = 0.0;
            a = b;
            b = r;
        }
        g = a;
    }
    return g;
}

bool on_lattice(double x, double h, double tol) {
    const double q = x / h;
    return std::abs(q - std::round(q)) * h <= tol;
}

}  // namespace

// ---------------------------------------------------------------- IncrementLaw

IncrementLaw IncrementLaw::deterministic(Vector value) {
    if (value.size() == 0) throw InvalidSpec("increment must have dimension >= 1");
    require_finite(value, "deterministic increment");
    IncrementLaw law;
    law.kind_ = Kind::Deterministic;
    law.dim_ = static_cast<int>(value.size());
    law.value_ = std::move(value);
    return law;
}

IncrementLaw IncrementLaw::deterministic(double value) {
    return deterministic(Vector::Constant(1, value));
}

IncrementLaw IncrementLaw::gaussian(Vector mean, Matrix cov) {
    const auto d = mean.size();
    if (d == 0) throw InvalidSpec("increment must have dimension >= 1");
    if (cov.rows() != d || cov.cols() != d) throw InvalidSpec("covariance shape mismatch");
    require_finite(mean, "gaussian mean");
    if (!cov.allFinite()) throw InvalidSpec("covariance has non-finite entries");
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw InvalidSpec("covariance is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
        throw InvalidSpec("covariance is not positive semidefinite");
    }
    IncrementLaw law;
    law.kind_ = Kind::Gaussian;
    law.dim_ = static_cast<int>(d);
    law.value_ = std::move(mean);
    law.cov_ = 0.5 * (cov + cov.transpose());
    law.chol_ = eig.eigenvectors() *
                eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    return law;
}

IncrementLaw IncrementLaw::gaussian(double mean, double variance) {
    return gaussian(Vector::Constant(1, mean), Matrix::Constant(1, 1, variance));
}

IncrementLaw IncrementLaw::mixture(std::vector<Atom> atoms) {
    if (atoms.empty()) throw InvalidSpec("mixture needs at least one atom");
    const auto d = atoms.front().value.size();
    if (d == 0) throw InvalidSpec("increment must have dimension >= 1");
    double total = 0.0;
    for (const auto& a : atoms) {
        if (a.value.size() != d) throw InvalidSpec("mixture atoms have differing dimensions");
        require_finite(a.value, "mixture atom");
        if (!std::isfinite(a.prob) || a.prob < 0.0) throw InvalidSpec("mixture probability invalid");
        total += a.prob;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "mixture probabilities sum to " << total;
        throw InvalidSpec(msg.str());
    }
    IncrementLaw law;
    law.kind_ = Kind::Mixture;
    law.dim_ = static_cast<int>(d);
    law.atoms_ = std::move(atoms);
    return law;
}

IncrementLaw IncrementLaw::callable(CharFn phi, std::array<double, 5> raw_moments) {
    if (!phi) throw InvalidSpec("callable increment needs a characteristic function");
    IncrementLaw law;
    law.kind_ = Kind::Callable;
    law.dim_ = 1;
    law.phi_ = std::move(phi);
    law.moments_ = raw_moments;
    return law;
}

Complex IncrementLaw::cf(const Vector& zeta) const {
    if (zeta.size() != dim_) throw InvalidSpec("frequency dimension mismatch");
    const Complex I(0.0, 1.0);
    switch (kind_) {
        case Kind::Deterministic:
            return std::exp(I * zeta.dot(value_));
        case Kind::Gaussian:
            return std::exp(I * zeta.dot(value_) - 0.5 * zeta.dot(cov_ * zeta));
        case Kind::Mixture: {
            Complex s = 0.0;
            for (const auto& a : atoms_) s += a.prob * std::exp(I * zeta.dot(a.value));
            return s;
        }
        case Kind::Callable:
            return phi_(zeta(0));
    }
    return 0.0;
}

Complex IncrementLaw::cf(double zeta) const {
    return cf(Vector::Constant(1, zeta));
}

Vector IncrementLaw::mean() const {
    switch (kind_) {
        case Kind::Deterministic:
        case Kind::Gaussian:
            return value_;
        case Kind::Mixture: {
            Vector m = Vector::Zero(dim_);
            for (const auto& a : atoms_) m += a.prob * a.value;
            return m;
        }
        case Kind::Callable:
            return Vector::Constant(1, moments_[1]);
    }
    return {};
}

Matrix IncrementLaw::second_moment() const {
    switch (kind_) {
        case Kind::Deterministic:
            return value_ * value_.transpose();
        case Kind::Gaussian:
            return cov_ + value_ * value_.transpose();
        case Kind::Mixture: {
            Matrix m = Matrix::Zero(dim_, dim_);
            for (const auto& a : atoms_) m += a.prob * a.value * a.value.transpose();
            return m;
        }
        case Kind::Callable:
            return Matrix::Constant(1, 1, moments_[2]);
    }
    return {};
}

double IncrementLaw::raw_moment(int k) const {
    if (dim_ != 1) throw InvalidSpec("raw moments are defined for d = 1 only");
    if (k < 0) throw InvalidSpec("moment order must be non-negative");
    if (k > 4) throw MomentUndefined("increment moments are available up to order 4");
    switch (kind_) {
        case Kind::Deterministic:
            return std::pow(value_(0), k);
        case Kind::Gaussian: {
            const double m = value_(0), s2 = cov_(0, 0);
            const double table[5] = {1.0, m, m * m + s2, m * m * m + 3 * m * s2,
                                     m * m * m * m + 6 * m * m * s2 + 3 * s2 * s2};
            return table[k];
        }
        case Kind::Mixture: {
            double s = 0.0;
            for (const auto& a : atoms_) s += a.prob * std::pow(a.value(0), k);
            return s;
        }
        case Kind::Callable:
            return moments_[static_cast<std::size_t>(k)];
    }
    return 0.0;
}

IncrementLaw IncrementLaw::shifted(const Vector& delta) const {
    if (delta.size() != dim_) throw InvalidSpec("shift dimension mismatch");
    IncrementLaw out = *this;
    switch (kind_) {
        case Kind::Deterministic:
        case Kind::Gaussian:
            out.value_ += delta;
            break;
        case Kind::Mixture:
            for (auto& a : out.atoms_) a.value += delta;
            break;
        case Kind::Callable: {
            const double c = delta(0);
            auto inner = phi_;
            out.phi_ = [inner, c](double z) { return std::exp(Complex(0.0, z * c)) * inner(z); };
            for (int k = 0; k <= 4; ++k) {
                double s = 0.0;
                for (int j = 0; j <= k; ++j) s += kBinom[k][j] * moments_[j] * std::pow(c, k - j);
                out.moments_[k] = s;
            }
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------- MapSpec

MapSpec::MapSpec(StochasticKernel kernel, int d, std::vector<EdgeLaw> increments, bool centered)
    : kernel_(std::move(kernel)), d_(d) {
    if (d < 1) throw InvalidSpec("dimension d must be >= 1");
    index_laws(std::move(increments));
    shift_ = Vector::Zero(d_);
    if (centered) {
        shift_ = exact_mean(*this);
        for (auto& slot : laws_) {
            if (slot) slot = slot->shifted(-shift_);
        }
        centered_ = true;
    }
}

void MapSpec::index_laws(std::vector<EdgeLaw> increments) {
    const auto S = kernel_.size();
    laws_.assign(static_cast<std::size_t>(S * S), std::nullopt);
    for (auto& e : increments) {
        if (e.from < 0 || e.from >= S || e.to < 0 || e.to >= S) {
            throw InvalidSpec("increment edge refers to an unknown state");
        }
        if (e.law.dim() != d_) throw InvalidSpec("increment dimension differs from d");
        auto& slot = laws_[static_cast<std::size_t>(e.from * S + e.to)];
        if (slot) {
            std::ostringstream msg;
            msg << "duplicate increment for edge (" << e.from << "," << e.to << ")";
            throw InvalidSpec(msg.str());
        }
        slot = std::move(e.law);
    }
    for (Eigen::Index x = 0; x < S; ++x) {
        for (Eigen::Index y = 0; y < S; ++y) {
            if (kernel_.P()(x, y) > 0.0 && !has_law(x, y)) {
                std::ostringstream msg;
                msg << "edge (" << x << "," << y << ") has positive probability but no increment law";
                throw InvalidSpec(msg.str());
            }
        }
    }
}

bool MapSpec::has_law(Eigen::Index x, Eigen::Index y) const {
    return laws_.at(static_cast<std::size_t>(x * states() + y)).has_value();
}

const IncrementLaw& MapSpec::law(Eigen::Index x, Eigen::Index y) const {
    const auto& slot = laws_.at(static_cast<std::size_t>(x * states() + y));
    if (!slot) throw InvalidSpec("no increment law on requested edge");
    return *slot;
}

std::optional<Matrix> MapSpec::deterministic_table() const {
    if (d_ != 1) return std::nullopt;
    const auto S = states();
    Matrix table = Matrix::Zero(S, S);
    for (Eigen::Index x = 0; x < S; ++x) {
        for (Eigen::Index y = 0; y < S; ++y) {
            if (kernel_.P()(x, y) <= 0.0) continue;
            const auto& l = law(x, y);
            if (l.kind() != IncrementLaw::Kind::Deterministic) return std::nullopt;
            table(x, y) = l.value()(0);
        }
    }
    return table;
}

bool MapSpec::has_kind(IncrementLaw::Kind kind) const {
    const auto S = states();
    for (Eigen::Index x = 0; x < S; ++x) {
        for (Eigen::Index y = 0; y < S; ++y) {
            if (kernel_.P()(x, y) > 0.0 && law(x, y).kind() == kind) return true;
        }
    }
    return false;
}

MapSpec MapSpec::centered_copy() const {
    if (centered_) return *this;
    MapSpec out = *this;
    out.shift_ = exact_mean(*this);
    for (auto& slot : out.laws_) {
        if (slot) slot = slot->shifted(-out.shift_);
    }
    out.centered_ = true;
    return out;
}

MapSpec MapSpec::skeleton(std::shared_ptr<const CtMapSpec> ct, StochasticKernel kernel,
                          std::vector<EdgeLaw> increments) {
    MapSpec out;
    out.kernel_ = std::move(kernel);
    out.d_ = 1;
    out.index_laws(std::move(increments));
    out.shift_ = Vector::Zero(1);
    out.centered_ = ct->centered();
    out.ct_ = std::move(ct);
    return out;
}

// ---------------------------------------------------------------- CtMapSpec

CtMapSpec::CtMapSpec(Matrix generator, Vector reward, std::optional<Matrix> jump_increments,
                     bool centered)
    : G_(std::move(generator)), reward_(std::move(reward)) {
    const auto S = G_.rows();
    if (S == 0 || G_.cols() != S) throw NotStochastic("generator must be square and non-empty");
    if (!G_.allFinite()) throw NotStochastic("generator has non-finite entries");
    if (reward_.size() != S) throw InvalidSpec("reward length differs from number of states");
    require_finite(reward_, "reward");
    rate_ = 0.0;
    for (Eigen::Index x = 0; x < S; ++x) rate_ = std::max(rate_, std::abs(G_(x, x)));
    const double tol = kRowSumTol * std::max(1.0, rate_);
    for (Eigen::Index x = 0; x < S; ++x) {
        for (Eigen::Index y = 0; y < S; ++y) {
            if (x != y && G_(x, y) < 0.0) throw NotStochastic("generator has a negative off-diagonal rate");
        }
        if (std::abs(G_.row(x).sum()) > tol) {
            std::ostringstream msg;
            msg << "generator row " << x << " does not sum to zero";
            throw NotStochastic(msg.str());
        }
    }
    if (jump_increments) {
        if (jump_increments->rows() != S || jump_increments->cols() != S) {
            throw InvalidSpec("jump increment matrix shape mismatch");
        }
        if (!jump_increments->allFinite()) throw InvalidSpec("jump increments not finite");
        jumps_ = *jump_increments;
        jumps_.diagonal().setZero();
        has_jumps_ = true;
    } else {
        jumps_ = Matrix::Zero(S, S);
    }
    if (rate_ == 0.0) rate_ = 1.0;

    // Uniformized kernel shares the stationary law of G.
    Matrix Pu = G_ / rate_;
    for (Eigen::Index x = 0; x < S; ++x) {
        Pu(x, x) = 0.0;
        Pu(x, x) = std::max(0.0, 1.0 - Pu.row(x).sum());
    }
    pi_ = StochasticKernel(Pu).pi();

    drift_ = pi_.dot(reward_);
    for (Eigen::Index x = 0; x < S; ++x) {
        for (Eigen::Index y = 0; y < S; ++y) {
            if (x != y) drift_ += pi_(x) * G_(x, y) * jumps_(x, y);
        }
    }
    if (centered) {
        reward_.array() -= drift_;
        centered_ = true;
    }
}

CMatrix CtMapSpec::fourier_generator(double zeta) const {
    const auto S = states();
    CMatrix A = G_.cast<Complex>();
    for (Eigen::Index x = 0; x < S; ++x) {
        for (Eigen::Index y = 0; y < S; ++y) {
            if (x == y) {
                A(x, x) += Complex(0.0, zeta * reward_(x));
            } else if (has_jumps_ && jumps_(x, y) != 0.0) {
                A(x, y) *= std::exp(Complex(0.0, zeta * jumps_(x, y)));
            }
        }
    }
    return A;
}

CMatrix matrix_exp(const CMatrix& M) {
    return M.exp();
}

Matrix matrix_exp(const Matrix& M) {
    return M.exp();
}

// ---------------------------------------------------------------- moments

Vector exact_mean(const MapSpec& spec) {
    const auto& K = spec.kernel();
    Vector m = Vector::Zero(spec.dim());
    for (Eigen::Index x = 0; x < K.size(); ++x) {
        if (K.pi()(x) <= 0.0) continue;
        for (Eigen::Index y = 0; y < K.size(); ++y) {
            if (K.P()(x, y) > 0.0) m += K.pi()(x) * K.P()(x, y) * spec.law(x, y).mean();
        }
    }
    return m;
}

MomentRecursion::MomentRecursion(const MapSpec& spec, int order, std::optional<Vector> initial)
    : spec_(spec), order_(order) {
    if (spec.dim() != 1) throw InvalidSpec("moment recursion requires d = 1");
    if (order < 0) throw InvalidSpec("moment order must be non-negative");
    if (order > 4) throw MomentUndefined("moment recursion supports orders up to 4");
    const auto S = spec.states();
    const Matrix& P = spec.kernel().P();
    edge_moments_.assign(static_cast<std::size_t>(order + 1), Matrix::Zero(S, S));
    for (Eigen::Index x = 0; x < S; ++x) {
        for (Eigen::Index y = 0; y < S; ++y) {
            if (P(x, y) <= 0.0) continue;
            const auto& law = spec.law(x, y);
            for (int j = 0; j <= order; ++j) edge_moments_[j](x, y) = P(x, y) * law.raw_moment(j);
        }
    }
    const Vector mu = initial ? validated_initial(*initial, spec.kernel().pi()) : spec.kernel().pi();
    m_.assign(static_cast<std::size_t>(order + 1), Vector::Zero(S));
    m_[0] = mu;
}

void MomentRecursion::step() {
    std::vector<Vector> next(m_.size(), Vector::Zero(spec_.states()));
    for (int j = 0; j <= order_; ++j) {
        for (int i = 0; i <= j; ++i) {
            next[j].noalias() += kBinom[j][i] * (edge_moments_[j - i].transpose() * m_[i]);
        }
    }
    m_ = std::move(next);
    ++n_;
}

void MomentRecursion::advance(int steps) {
    for (int s = 0; s < steps; ++s) step();
}

double MomentRecursion::moment(int j) const {
    if (j < 0 || j > order_) throw InvalidSpec("moment order outside recursion range");
    return m_[static_cast<std::size_t>(j)].sum();
}

double exact_moments(const MapSpec& spec, int n, int order) {
    if (n < 0) throw InvalidSpec("n must be non-negative");
    MomentRecursion rec(spec, order);
    rec.advance(n);
    return rec.moment(order);
}

Matrix variance_series(const MapSpec& spec_in, double tol) {
    const MapSpec spec = spec_in.centered_copy();
    const auto& K = spec.kernel();
    const auto S = K.size();
    const int d = spec.dim();
    const Vector& pi = K.pi();
    const Matrix& P = K.P();

    // r(x') = sum_x pi(x) P(x,x') mean(x,x'), g(x) = sum_x' P(x,x') mean(x,x').
    Matrix r = Matrix::Zero(S, d), g = Matrix::Zero(S, d);
    Matrix sigma = Matrix::Zero(d, d);
    for (Eigen::Index x = 0; x < S; ++x) {
        for (Eigen::Index y = 0; y < S; ++y) {
            if (P(x, y) <= 0.0) continue;
            const auto& law = spec.law(x, y);
            const Vector m = law.mean();
            g.row(x) += P(x, y) * m.transpose();
            if (pi(x) > 0.0) {
                r.row(y) += pi(x) * P(x, y) * m.transpose();
                sigma += pi(x) * P(x, y) * law.second_moment();
            }
        }
    }
    double amp = 0.0;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            amp = std::max(amp, weighted_ratio_norm(r.col(i), pi) * weighted_norm(g.col(j), pi));
        }
    }
    if (amp == 0.0) return sigma;

    const auto env = gap_envelope(K);
    Matrix v = g;
    constexpr long kMaxTerms = 20'000'000;
    for (long l = 1;; ++l) {
        const Matrix C = r.transpose() * v;
        sigma += C + C.transpose();
        if (2.0 * amp * env.tail_from(l) <= tol) break;
        if (l >= kMaxTerms) throw GapAbsent("variance series did not reach tolerance");
        v = P * v;
    }
    return sigma;
}

double variance_series_scalar(const MapSpec& spec, double tol) {
    if (spec.dim() != 1) throw InvalidSpec("scalar variance requires d = 1");
    return variance_series(spec, tol)(0, 0);
}

double third_cumulant_rate(const MapSpec& spec_in, int n1, int n2) {
    if (n1 < 1 || n2 <= n1) throw InvalidSpec("third_cumulant_rate needs 1 <= n1 < n2");
    const MapSpec spec = spec_in.centered_copy();
    MomentRecursion rec(spec, 3);
    rec.advance(n1);
    const double m1 = rec.moment(3);
    rec.advance(n2 - n1);
    return (rec.moment(3) - m1) / static_cast<double>(n2 - n1);
}

Vector asymptotic_bias(const MapSpec& spec_in, const Vector& mu_in, double tol) {
    const MapSpec spec = spec_in.centered_copy();
    const auto& K = spec.kernel();
    const Vector& pi = K.pi();
    const Vector mu = validated_initial(mu_in, pi);
    for (Eigen::Index x = 0; x < mu.size(); ++x) {
        if (mu(x) > 0.0 && pi(x) <= 0.0) {
            throw UnsupportedInitial("initial law charges a state with zero stationary mass");
        }
    }
    const auto S = K.size();
    const int d = spec.dim();
    Matrix g = Matrix::Zero(S, d);
    for (Eigen::Index x = 0; x < S; ++x) {
        for (Eigen::Index y = 0; y < S; ++y) {
            if (K.P()(x, y) > 0.0) g.row(x) += K.P()(x, y) * spec.law(x, y).mean().transpose();
        }
    }
    double amp = 0.0;
    const double mu_norm = weighted_ratio_norm(mu, pi);
    for (int j = 0; j < d; ++j) amp = std::max(amp, mu_norm * weighted_norm(g.col(j), pi));
    Vector b = Vector::Zero(d);
    if (amp == 0.0) return b;

    const auto env = gap_envelope(K);
    Eigen::RowVectorXd w = mu.transpose();
    for (long k = 0;; ++k) {
        b += (w * g).transpose();
        if (amp * env.tail_from(k + 1) <= tol) break;
        if (k > 20'000'000) throw GapAbsent("bias series did not reach tolerance");
        w = w * K.P();
    }
    return b;
}

// ---------------------------------------------------------------- lattice

LatticeReport detect_lattice(const MapSpec& spec, double tol) {
    LatticeReport report;
    const auto& K = spec.kernel();
    const auto S = K.size();
    report.beta = Vector::Zero(S);
    if (spec.dim() != 1) return report;

    struct Edge {
        Eigen::Index from, to;
        double v;
    };
    std::vector<Edge> edges;
    bool undetermined = false;
    for (Eigen::Index x = 0; x < S; ++x) {
        if (K.pi()(x) <= 0.0) continue;
        for (Eigen::Index y = 0; y < S; ++y) {
            if (K.P()(x, y) <= 0.0) continue;
            const auto& law = spec.law(x, y);
            switch (law.kind()) {
                case IncrementLaw::Kind::Gaussian:
                    report.verdict = LatticeReport::Verdict::Nonlattice;
                    return report;
                case IncrementLaw::Kind::Deterministic:
                    edges.push_back({x, y, law.value()(0)});
                    break;
                case IncrementLaw::Kind::Mixture:
                    if (law.atoms().size() == 1) {
                        edges.push_back({x, y, law.atoms().front().value(0)});
                    } else {
                        undetermined = true;
                    }
                    break;
                case IncrementLaw::Kind::Callable:
                    undetermined = true;
                    break;
            }
        }
    }
    if (undetermined || edges.empty()) return report;

    double scale = 1.0;
    for (const auto& e : edges) scale = std::max(scale, std::abs(e.v));
    const double atol = tol * scale;

    // Spanning tree with every tree edge set to the unknown shift a:
    // beta(x) = c(x) + k(x) a.
    std::vector<std::vector<std::size_t>> adj(static_cast<std::size_t>(S));
    for (std::size_t i = 0; i < edges.size(); ++i) {
        adj[edges[i].from].push_back(i);
        adj[edges[i].to].push_back(i);
    }
    std::vector<double> c(static_cast<std::size_t>(S), 0.0);
    std::vector<long> k(static_cast<std::size_t>(S), 0);
    std::vector<bool> seen(static_cast<std::size_t>(S), false);
    std::vector<bool> tree(edges.size(), false);
    const auto root = edges.front().from;
    seen[root] = true;
    std::queue<Eigen::Index> frontier;
    frontier.push(root);
    while (!frontier.empty()) {
        const auto u = frontier.front();
        frontier.pop();
        for (auto i : adj[u]) {
            const auto& e = edges[i];
            if (e.from == u && !seen[e.to]) {
                c[e.to] = c[u] - e.v;
                k[e.to] = k[u] + 1;
            } else if (e.to == u && !seen[e.from]) {
                c[e.from] = c[u] + e.v;
                k[e.from] = k[u] - 1;
            } else {
                continue;
            }
            const auto w = (e.from == u) ? e.to : e.from;
            seen[w] = true;
            tree[i] = true;
            frontier.push(w);
        }
    }

    // Non-tree edges: delta_e + n_e a must lie in hZ.
    std::vector<double> free_terms;
    std::vector<std::pair<double, long>> coupled;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (tree[i]) continue;
        const auto& e = edges[i];
        const double delta = e.v + c[e.to] - c[e.from];
        const long n = k[e.to] - k[e.from] - 1;
        if (n == 0) {
            free_terms.push_back(delta);
        } else {
            coupled.emplace_back(delta, n);
        }
    }

    double a = 0.0, h = 0.0;
    long n_pivot = 1;
    double delta_pivot = 0.0;
    std::vector<double> h_terms = free_terms;
    if (!coupled.empty()) {
        const auto pivot = std::min_element(coupled.begin(), coupled.end(), [](auto& l, auto& r) {
            return std::labs(l.second) < std::labs(r.second);
        });
        delta_pivot = pivot->first;
        n_pivot = pivot->second;
        for (const auto& [delta, n] : coupled) {
            h_terms.push_back(static_cast<double>(n_pivot) * delta - static_cast<double>(n) * delta_pivot);
        }
    }
    h = real_gcd(h_terms, atol);

    auto beta_for = [&](double shift) {
        Vector beta(S);
        for (Eigen::Index x = 0; x < S; ++x) beta(x) = c[x] + static_cast<double>(k[x]) * shift;
        return beta;
    };
    auto verify = [&](double shift, double span) {
        const Vector beta = beta_for(shift);
        for (const auto& e : edges) {
            if (!on_lattice(e.v + beta(e.to) - beta(e.from) - shift, span, atol)) return false;
        }
        return true;
    };

    if (h == 0.0) {
        // Every constraint is met exactly by one shift; any span works.
        a = coupled.empty() ? 0.0 : -delta_pivot / static_cast<double>(n_pivot);
        h = std::abs(a) > atol ? std::abs(a) : 1.0;
        if (!verify(a, h)) return report;
    } else {
        if (h < 1e-6 * scale) {
            report.verdict = LatticeReport::Verdict::Nonlattice;
            return report;
        }
        bool found = false;
        const long np = std::labs(n_pivot);
        for (long m = 1; m <= np && !found; ++m) {
            const double span = h / static_cast<double>(m);
            for (long j = 0; j < np * m && !found; ++j) {
                const double cand = coupled.empty()
                                        ? 0.0
                                        : (-delta_pivot + static_cast<double>(j) * span) /
                                              static_cast<double>(n_pivot);
                if (verify(cand, span)) {
                    a = cand;
                    h = span;
                    found = true;
                }
            }
        }
        if (!found) {
            report.verdict = LatticeReport::Verdict::Nonlattice;
            return report;
        }
    }

    Vector beta = beta_for(a);
    double shift = std::fmod(a, h);
    if (shift < 0.0) shift += h;
    if (h - shift <= atol) shift = 0.0;
    for (Eigen::Index x = 0; x < S; ++x) {
        if (K.pi()(x) <= 0.0) beta(x) = 0.0;
    }
    report.verdict = LatticeReport::Verdict::Lattice;
    report.is_lattice = true;
    report.shift = shift;
    report.span = h;
    report.beta = beta;
    return report;
}

// ---------------------------------------------------------------- skeleton

MapSpec ct_sample_skeleton(std::shared_ptr<const CtMapSpec> ct) {
    if (!ct) throw InvalidSpec("null continuous-time spec");
    const auto S = ct->states();
    Matrix P = matrix_exp(ct->generator());
    for (Eigen::Index x = 0; x < S; ++x) {
        for (Eigen::Index y = 0; y < S; ++y) P(x, y) = std::max(0.0, P(x, y));
        P.row(x) /= P.row(x).sum();
    }
    StochasticKernel kernel(P);

    // Central differences at steps h and h/2, combined by Richardson.
    constexpr double h = 1e-3;
    auto fk = [&](double z) { return matrix_exp(ct->fourier_generator(z)); };
    const CMatrix f0 = fk(0.0);
    auto derivs = [&](double s, const CMatrix& p1, const CMatrix& m1, const CMatrix& p2,
                      const CMatrix& m2) {
        std::array<CMatrix, 5> D;
        D[0] = f0;
        D[1] = (p1 - m1) / (2.0 * s);
        D[2] = (p1 - 2.0 * f0 + m1) / (s * s);
        D[3] = (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * s * s * s);
        D[4] = (p2 - 4.0 * p1 + 6.0 * f0 - 4.0 * m1 + m2) / (s * s * s * s);
        return D;
    };
    const CMatrix fp_half = fk(h / 2), fm_half = fk(-h / 2);
    const CMatrix fp1 = fk(h), fm1 = fk(-h), fp2 = fk(2 * h), fm2 = fk(-2 * h);
    const auto coarse = derivs(h, fp1, fm1, fp2, fm2);
    const auto fine = derivs(h / 2, fp_half, fm_half, fp1, fm1);

    const Complex ipow[5] = {1.0, Complex(0, 1), -1.0, Complex(0, -1), 1.0};
    std::vector<EdgeLaw> laws;
    for (Eigen::Index x = 0; x < S; ++x) {
        for (Eigen::Index y = 0; y < S; ++y) {
            const double pxy = P(x, y);
            if (pxy <= 0.0) continue;
            std::array<double, 5> mom{};
            mom[0] = 1.0;
            for (int j = 1; j <= 4; ++j) {
                const Complex dj = (4.0 * fine[j](x, y) - coarse[j](x, y)) / 3.0;
                mom[j] = (dj / ipow[j]).real() / pxy;
            }
            auto fn = [ct, x, y, pxy](double z) {
                return matrix_exp(ct->fourier_generator(z))(x, y) / pxy;
            };
            laws.push_back({x, y, IncrementLaw::callable(fn, mom)});
        }
    }
    return MapSpec::skeleton(std::move(ct), std::move(kernel), std::move(laws));
}

}  // namespace maplab
