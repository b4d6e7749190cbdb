#include "maplab/chain_core.hpp"

#include "maplab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace maplab {

namespace {

void validate_stochastic(const Matrix& P) {
    if (P.rows() == 0 || P.rows() != P.cols()) {
        throw NotStochastic("transition matrix must be square and non-empty");
    }
    for (Eigen::Index x = 0; x < P.rows(); ++x) {
        for (Eigen::Index y = 0; y < P.cols(); ++y) {
            if (!std::isfinite(P(x, y)) || P(x, y) < 0.0) {
                std::ostringstream msg;
                msg << "entry P(" << x << "," << y << ") is negative or not finite";
                throw NotStochastic(msg.str());
            }
        }
        const double s = P.row(x).sum();
        if (std::abs(s - 1.0) > kRowSumTol) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "row " << x << " sums to " << s;
            throw NotStochastic(msg.str());
        }
    }
}

// Tarjan's algorithm, iterative so deep chains do not exhaust the stack.
std::vector<int> strongly_connected_components(const Matrix& P, int& n_components) {
    const int n = static_cast<int>(P.rows());
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
    std::vector<bool> on_stack(n, false);
    std::vector<int> stack;
    int counter = 0;
    n_components = 0;

    struct Frame {
        int v;
        int next;
    };
    for (int root = 0; root < n; ++root) {
        if (index[root] >= 0) continue;
        std::vector<Frame> frames{{root, 0}};
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!frames.empty()) {
            Frame& f = frames.back();
            const int v = f.v;
            bool descended = false;
            while (f.next < n) {
                const int w = f.next++;
                if (P(v, w) <= 0.0) continue;
                if (index[w] < 0) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    frames.push_back({w, 0});
                    descended = true;
                    break;
                }
                if (on_stack[w]) low[v] = std::min(low[v], index[w]);
            }
            if (descended) continue;
            if (low[v] == index[v]) {
                int w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp[w] = n_components;
                } while (w != v);
                ++n_components;
            }
            frames.pop_back();
            if (!frames.empty()) {
                const int parent = frames.back().v;
                low[parent] = std::min(low[parent], low[v]);
            }
        }
    }
    return comp;
}

std::vector<Eigen::Index> closed_class(const Matrix& P) {
    int n_comp = 0;
    const auto comp = strongly_connected_components(P, n_comp);
    std::vector<bool> closed(static_cast<std::size_t>(n_comp), true);
    const auto n = P.rows();
    for (Eigen::Index x = 0; x < n; ++x) {
        for (Eigen::Index y = 0; y < n; ++y) {
            if (P(x, y) > 0.0 && comp[x] != comp[y]) closed[comp[x]] = false;
        }
    }
    const auto n_closed = std::count(closed.begin(), closed.end(), true);
    if (n_closed != 1) {
        std::ostringstream msg;
        msg << "kernel has " << n_closed << " closed communicating classes; stationary law not unique";
        throw NonIrreducible(msg.str());
    }
    const int c = static_cast<int>(std::find(closed.begin(), closed.end(), true) - closed.begin());
    std::vector<Eigen::Index> members;
    for (Eigen::Index x = 0; x < n; ++x) {
        if (comp[x] == c) members.push_back(x);
    }
    return members;
}

template <typename MatrixType>
double weighted_top_singular_value(const MatrixType& A, const Vector& pi) {
    if (A.rows() != pi.size() || A.cols() != pi.size()) {
        throw InvalidSpec("operator and stationary vector dimensions disagree");
    }
    std::vector<Eigen::Index> supp;
    for (Eigen::Index x = 0; x < pi.size(); ++x) {
        if (pi(x) > 0.0) supp.push_back(x);
    }
    for (Eigen::Index x = 0; x < pi.size(); ++x) {
        if (pi(x) > 0.0) continue;
        for (auto y : supp) {
            if (std::abs(A(y, x)) != 0.0) {
                std::ostringstream msg;
                msg << "state " << x << " has zero stationary mass but feeds state " << y;
                throw ZeroMassState(msg.str());
            }
        }
    }
    const auto m = static_cast<Eigen::Index>(supp.size());
    MatrixType B(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            B(i, j) = A(supp[i], supp[j]) * std::sqrt(pi(supp[i]) / pi(supp[j]));
        }
    }
    if (m == 0) return 0.0;
    Eigen::JacobiSVD<MatrixType> svd(B);
    return svd.singularValues()(0);
}

}  // namespace

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NotStochastic: return "NotStochastic";
        case ErrorKind::NonIrreducible: return "NonIrreducible";
        case ErrorKind::ZeroMassState: return "ZeroMassState";
        case ErrorKind::InvalidSpec: return "InvalidSpec";
        case ErrorKind::MomentUndefined: return "MomentUndefined";
        case ErrorKind::GapAbsent: return "GapAbsent";
        case ErrorKind::BranchCollision: return "BranchCollision";
        case ErrorKind::SingularResolvent: return "SingularResolvent";
        case ErrorKind::UnsupportedInitial: return "UnsupportedInitial";
        case ErrorKind::DegenerateVariance: return "DegenerateVariance";
        case ErrorKind::LatticeSpec: return "LatticeSpec";
        case ErrorKind::ZeroVariance: return "ZeroVariance";
        case ErrorKind::ConditionViolated: return "ConditionViolated";
        case ErrorKind::NoInteriorRoot: return "NoInteriorRoot";
        case ErrorKind::Config: return "ConfigError";
    }
    return "Unknown";
}

Vector solve_stationary(const Matrix& P) {
    validate_stochastic(P);
    const auto members = closed_class(P);
    const auto m = static_cast<Eigen::Index>(members.size());

    // (P_C^T - I) pi_C = 0 with the last equation replaced by sum(pi_C) = 1.
    Matrix A(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            A(i, j) = P(members[j], members[i]) - (i == j ? 1.0 : 0.0);
        }
    }
    A.row(m - 1).setOnes();
    Vector b = Vector::Zero(m);
    b(m - 1) = 1.0;
    Vector piC = A.fullPivLu().solve(b);
    for (Eigen::Index i = 0; i < m; ++i) piC(i) = std::max(piC(i), 0.0);
    piC /= piC.sum();

    Vector pi = Vector::Zero(P.rows());
    for (Eigen::Index i = 0; i < m; ++i) pi(members[i]) = piC(i);

    const double residual = (pi.transpose() * P - pi.transpose()).cwiseAbs().maxCoeff();
    if (residual > kStationaryTol) {
        std::ostringstream msg;
        msg << "stationary solve residual " << residual << " exceeds tolerance";
        throw NonIrreducible(msg.str());
    }
    return pi;
}

StochasticKernel::StochasticKernel(std::vector<std::string> states, Matrix P)
    : states_(std::move(states)), P_(std::move(P)) {
    if (static_cast<Eigen::Index>(states_.size()) != P_.rows()) {
        throw InvalidSpec("number of state labels does not match the transition matrix");
    }
    pi_ = solve_stationary(P_);
}

StochasticKernel::StochasticKernel(Matrix P)
    : StochasticKernel(
          [&] {
              std::vector<std::string> labels;
              for (Eigen::Index x = 0; x < P.rows(); ++x) labels.push_back(std::to_string(x));
              return labels;
          }(),
          P) {}

StochasticKernel::StochasticKernel(std::vector<std::string> states, Matrix P,
                                   const Vector& claimed_pi, double tol)
    : StochasticKernel(std::move(states), std::move(P)) {
    if (claimed_pi.size() != pi_.size() ||
        (claimed_pi - pi_).cwiseAbs().maxCoeff() > tol) {
        throw InvalidSpec("supplied stationary distribution disagrees with the solved one");
    }
}

Matrix StochasticKernel::projection() const {
    return Vector::Ones(size()) * pi_.transpose();
}

std::vector<Eigen::Index> StochasticKernel::support() const {
    std::vector<Eigen::Index> s;
    for (Eigen::Index x = 0; x < size(); ++x) {
        if (pi_(x) > 0.0) s.push_back(x);
    }
    return s;
}

Matrix StochasticKernel::power(int n) const {
    if (n < 0) throw InvalidSpec("negative matrix power");
    Matrix result = Matrix::Identity(size(), size());
    Matrix base = P_;
    while (n > 0) {
        if (n & 1) result = result * base;
        base = base * base;
        n >>= 1;
    }
    return result;
}

double l2_operator_norm(const Matrix& A, const Vector& pi) {
    return weighted_top_singular_value(A, pi);
}

double l2_operator_norm(const CMatrix& A, const Vector& pi) {
    return weighted_top_singular_value(A, pi);
}

Complex l2_inner(const CVector& f, const CVector& g, const Vector& pi) {
    Complex s = 0.0;
    for (Eigen::Index x = 0; x < pi.size(); ++x) s += pi(x) * f(x) * std::conj(g(x));
    return s;
}

double l2_norm(const CVector& f, const Vector& pi) {
    return std::sqrt(std::max(0.0, l2_inner(f, f, pi).real()));
}

MixingBoundTable spectral_gap_report(const StochasticKernel& kernel, int t_max) {
    if (t_max < 2) throw InvalidSpec("spectral_gap_report needs t_max >= 2");
    MixingBoundTable table;
    const Matrix Pi = kernel.projection();
    Matrix Pk = Matrix::Identity(kernel.size(), kernel.size());
    for (int t = 1; t <= t_max; ++t) {
        table.bound.push_back(l2_operator_norm(Matrix(Pk - Pi), kernel.pi()));
        Pk = Pk * kernel.P();
    }
    table.gap_present = std::any_of(table.bound.begin(), table.bound.end(),
                                    [](double b) { return b < 1.0 - 1e-12; });

    // Least squares of log bound against t on t >= 2, skipping numerically
    // vanished bounds.
    std::vector<double> ts, logs;
    for (int t = 2; t <= t_max; ++t) {
        const double b = table.at(t);
        if (b > 1e-300 && b > 1e-14 * table.at(1)) {
            ts.push_back(t);
            logs.push_back(std::log(b));
        }
    }
    if (ts.size() >= 2) {
        const double n = static_cast<double>(ts.size());
        const double mt = std::accumulate(ts.begin(), ts.end(), 0.0) / n;
        const double ml = std::accumulate(logs.begin(), logs.end(), 0.0) / n;
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            sxy += (ts[i] - mt) * (logs[i] - ml);
            sxx += (ts[i] - mt) * (ts[i] - mt);
        }
        const double slope = sxy / sxx;
        RateFit fit;
        fit.epsilon = -slope;
        // Intercept raised to the smallest value that envelopes every computed bound.
        double log_c = ml - slope * mt;
        for (int t = 1; t <= t_max; ++t) {
            const double b = table.at(t);
            if (b > 1e-300 && (t == 1 || b > 1e-14 * table.at(1))) {
                log_c = std::max(log_c, std::log(b) + fit.epsilon * t);
            }
        }
        fit.C = std::exp(log_c);
        table.fit = fit;
    }
    return table;
}

double interpolation_bound(double norm_p1, double norm_p2, double alpha) {
    if (norm_p1 < 0.0 || norm_p2 < 0.0) throw InvalidSpec("norms must be non-negative");
    if (alpha < 0.0 || alpha > 1.0) throw InvalidSpec("alpha must lie in [0, 1]");
    const double a = std::pow(norm_p1, alpha);
    const double b = std::pow(norm_p2, 1.0 - alpha);
    return std::min(a * b, 2.0 * std::min(a, b));
}

bool check_reversible(const StochasticKernel& kernel, double tol) {
    const Matrix flow = kernel.pi().asDiagonal() * kernel.P();
    return (flow - flow.transpose()).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace maplab
