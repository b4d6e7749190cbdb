#include "maplab/montecarlo.hpp"

#include "maplab/errors.hpp"
#include "maplab/io.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace maplab {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Inverse-CDF selection against 53-bit integer thresholds; rows are stored flat.
struct Sampler {
    Eigen::Index S = 0;
    std::vector<std::uint64_t> thr;

    Sampler() = default;
    explicit Sampler(const Matrix& P) : S(P.cols()), thr(static_cast<std::size_t>(P.rows() * P.cols())) {
        for (Eigen::Index x = 0; x < P.rows(); ++x) fill_row(P.row(x).transpose(), x);
    }
    static Sampler of_vector(const Vector& p) {
        Sampler s;
        s.S = p.size();
        s.thr.resize(static_cast<std::size_t>(p.size()));
        s.fill_row(p, 0);
        return s;
    }

    void fill_row(const Vector& p, Eigen::Index x) {
        const double total = p.sum();
        double c = 0.0;
        for (Eigen::Index y = 0; y < S; ++y) {
            c += p(y);
            const double frac = y + 1 == S ? 1.0 : std::min(1.0, c / total);
            thr[static_cast<std::size_t>(x * S + y)] = static_cast<std::uint64_t>(std::ldexp(frac, 53));
        }
    }

    int draw(Eigen::Index x, std::uint64_t bits) const {
        const std::uint64_t u = bits >> 11;
        const std::uint64_t* row = thr.data() + x * S;
        // Thresholds are nondecreasing, so counting the ones passed is branch-free.
        int y = 0;
        for (Eigen::Index j = 0; j + 1 < S; ++j) y += static_cast<int>(u >= row[j]);
        return y;
    }
};

Vector checked_initial(const std::optional<Vector>& mu, const Vector& pi) {
    if (!mu) return pi;
    if (mu->size() != pi.size()) throw InvalidSpec("initial distribution has wrong length");
    if (!mu->allFinite() || mu->minCoeff() < 0.0 || std::abs(mu->sum() - 1.0) > 1e-9) {
        throw InvalidSpec("initial distribution must be non-negative and sum to 1");
    }
    for (Eigen::Index x = 0; x < pi.size(); ++x) {
        if ((*mu)(x) > 0.0 && pi(x) <= 0.0) {
            throw UnsupportedInitial("initial law charges a state with zero stationary mass");
        }
    }
    return *mu;
}

template <typename Fn>
void parallel_paths(long n_paths, int threads, Fn&& fn) {
    const int workers = static_cast<int>(std::min<long>(std::max(1, threads), std::max(1L, n_paths)));
    if (workers <= 1) {
        fn(0L, n_paths);
        return;
    }
    std::vector<std::thread> pool;
    const long chunk = (n_paths + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const long lo = w * chunk, hi = std::min(n_paths, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

std::vector<long> checkpoint_steps(const std::vector<double>& cps, long n) {
    std::vector<long> steps;
    for (double c : cps) {
        const long s = std::lround(c);
        if (std::abs(c - static_cast<double>(s)) > 1e-9 || s < 1 || s > n) {
            throw InvalidSpec("discrete checkpoints must be integers in [1, n]");
        }
        if (!steps.empty() && s <= steps.back()) throw InvalidSpec("checkpoints must be increasing");
        steps.push_back(s);
    }
    return steps;
}

// Unit-interval CT path piece: advances state x over time `span`, returns the increment.
struct CtStepper {
    const CtMapSpec& ct;
    Sampler jumps;
    std::vector<double> rate;

    explicit CtStepper(const CtMapSpec& c) : ct(c) {
        const auto S = ct.states();
        Matrix J = ct.generator();
        for (Eigen::Index x = 0; x < S; ++x) {
            rate.push_back(-J(x, x));
            J(x, x) = 0.0;
            if (rate.back() <= 0.0) J(x, x) = 1.0;
        }
        jumps = Sampler(J);
    }

    // Remaining holding time carried across calls keeps the path exact.
    double advance(int& x, double& hold, double span, PathRng& rng) const {
        double y = 0.0;
        double left = span;
        while (true) {
            if (hold >= left) {
                y += ct.reward()(x) * left;
                hold -= left;
                return y;
            }
            y += ct.reward()(x) * hold;
            left -= hold;
            const int nx = jumps.draw(x, rng.next());
            y += ct.jump_increments()(x, nx);
            x = nx;
            const double r = rate[static_cast<std::size_t>(x)];
            hold = r > 0.0 ? rng.exponential() / r : INFINITY;
        }
    }

    double initial_hold(int x, PathRng& rng) const {
        const double r = rate[static_cast<std::size_t>(x)];
        return r > 0.0 ? rng.exponential() / r : INFINITY;
    }
};

}  // namespace

PathRng::PathRng(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed ^ (0xD1B54A32D192ED03ULL * (stream + 1));
    std::uint64_t mix = splitmix64(x);
    x ^= mix;
    for (auto& s : s_) s = splitmix64(x);
}

double PathRng::uniform() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
}

double PathRng::normal() {
    return normal_quantile(uniform());
}

double PathRng::exponential() {
    return -std::log(uniform());
}

double normal_quantile(double u) {
    using Policy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u, Policy());
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("MAPLAB_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

std::vector<double> TrajectoryBatch::column(std::optional<std::size_t> checkpoint) const {
    std::vector<double> out(static_cast<std::size_t>(n_paths));
    for (long p = 0; p < n_paths; ++p) {
        out[static_cast<std::size_t>(p)] = checkpoint ? at(p, *checkpoint) : y(p);
    }
    return out;
}

TrajectoryBatch simulate_discrete(const MapSpec& spec, long n, long n_paths, std::uint64_t seed,
                                  const std::optional<Vector>& mu, const SimulationOptions& options) {
    if (n < 1) throw InvalidSpec("simulation needs n >= 1");
    if (n_paths < 1) throw InvalidSpec("simulation needs at least one path");
    const Vector init = checked_initial(mu, spec.kernel().pi());
    const int d = spec.dim();
    const auto steps = checkpoint_steps(options.checkpoints, n);
    if (!steps.empty() && d != 1) throw InvalidSpec("checkpoints require d = 1");

    TrajectoryBatch batch;
    batch.spec_id = io::spec_hash(spec);
    batch.n_steps = n;
    batch.t_horizon = static_cast<double>(n);
    batch.n_paths = n_paths;
    batch.seed = seed;
    batch.d = d;
    batch.terminal_y.assign(static_cast<std::size_t>(n_paths * d), 0.0);
    if (options.keep_terminal_x) batch.terminal_x.assign(static_cast<std::size_t>(n_paths), 0);
    batch.checkpoints.assign(options.checkpoints.begin(), options.checkpoints.end());
    batch.checkpoint_y.assign(static_cast<std::size_t>(n_paths) * steps.size(), 0.0);

    const Sampler sampler(spec.kernel().P());
    const Sampler start = Sampler::of_vector(init);
    const auto S = spec.states();
    const auto& ct = spec.ct_source();
    std::optional<CtStepper> stepper;
    if (ct) stepper.emplace(*ct);
    const double skeleton_shift = spec.centering_shift()(0);

    // Flat per-edge data: kind, location, scale and (mixtures) an atom sampler row.
    const auto E = static_cast<std::size_t>(S * S);
    std::vector<const IncrementLaw*> laws(E, nullptr);
    std::vector<IncrementLaw::Kind> kinds(E, IncrementLaw::Kind::Deterministic);
    std::vector<double> loc(E, 0.0), scale(E, 0.0);
    std::vector<Sampler> atom_sampler(E);
    for (Eigen::Index x = 0; x < S; ++x) {
        for (Eigen::Index y = 0; y < S; ++y) {
            if (!spec.has_law(x, y)) continue;
            const auto idx = static_cast<std::size_t>(x * S + y);
            const IncrementLaw& law = spec.law(x, y);
            laws[idx] = &law;
            kinds[idx] = law.kind();
            if (law.kind() == IncrementLaw::Kind::Callable && !stepper) {
                throw InvalidSpec("callable increments can only be simulated through their source model");
            }
            if (law.kind() == IncrementLaw::Kind::Mixture) {
                Vector w(static_cast<Eigen::Index>(law.atoms().size()));
                for (std::size_t i = 0; i < law.atoms().size(); ++i) w(static_cast<Eigen::Index>(i)) = law.atoms()[i].prob;
                atom_sampler[idx] = Sampler::of_vector(w);
            }
            if (d == 1) {
                if (law.kind() == IncrementLaw::Kind::Deterministic) loc[idx] = law.value()(0);
                if (law.kind() == IncrementLaw::Kind::Gaussian) {
                    loc[idx] = law.gaussian_mean()(0);
                    scale[idx] = law.cov_factor()(0, 0);
                }
            }
        }
    }

    const bool all_deterministic =
        !stepper && std::all_of(kinds.begin(), kinds.end(),
                                [](IncrementLaw::Kind k) { return k == IncrementLaw::Kind::Deterministic; });

    auto scalar_step = [&](int& x, PathRng& rng) {
        const int nx = sampler.draw(x, rng.next());
        const auto idx = static_cast<std::size_t>(x * S + nx);
        x = nx;
        switch (kinds[idx]) {
            case IncrementLaw::Kind::Deterministic:
                return loc[idx];
            case IncrementLaw::Kind::Gaussian:
                return loc[idx] + scale[idx] * rng.normal();
            case IncrementLaw::Kind::Mixture:
                return laws[idx]->atoms()[static_cast<std::size_t>(atom_sampler[idx].draw(0, rng.next()))].value(0);
            case IncrementLaw::Kind::Callable:
                break;
        }
        return 0.0;
    };

    auto vector_step = [&](int& x, PathRng& rng, Vector& y, Vector& z) {
        const int nx = sampler.draw(x, rng.next());
        const auto idx = static_cast<std::size_t>(x * S + nx);
        const IncrementLaw& law = *laws[idx];
        x = nx;
        switch (law.kind()) {
            case IncrementLaw::Kind::Deterministic:
                y += law.value();
                break;
            case IncrementLaw::Kind::Gaussian:
                for (int i = 0; i < d; ++i) z(i) = rng.normal();
                y += law.gaussian_mean() + law.cov_factor() * z;
                break;
            case IncrementLaw::Kind::Mixture:
                y += law.atoms()[static_cast<std::size_t>(atom_sampler[idx].draw(0, rng.next()))].value;
                break;
            case IncrementLaw::Kind::Callable:
                break;
        }
    };

    auto run = [&](long lo, long hi) {
        Vector y(d), z(d);
        for (long p = lo; p < hi; ++p) {
            PathRng rng(seed, static_cast<std::uint64_t>(p));
            int x = start.draw(0, rng.next());
            std::size_t next_cp = 0;
            double* cp_row = batch.checkpoint_y.data() + static_cast<std::size_t>(p) * steps.size();
            if (d == 1) {
                double acc = 0.0;
                double hold = stepper ? stepper->initial_hold(x, rng) : 0.0;
                long k = 0;
                // Runs between checkpoints, with the loop body chosen per spec.
                for (std::size_t seg = 0; seg <= steps.size(); ++seg) {
                    const long stop = seg < steps.size() ? steps[seg] : n;
                    if (all_deterministic) {
                        for (; k < stop; ++k) {
                            const int nx = sampler.draw(x, rng.next());
                            acc += loc[static_cast<std::size_t>(x * S + nx)];
                            x = nx;
                        }
                    } else if (stepper) {
                        for (; k < stop; ++k) acc += stepper->advance(x, hold, 1.0, rng) - skeleton_shift;
                    } else {
                        for (; k < stop; ++k) acc += scalar_step(x, rng);
                    }
                    if (seg < steps.size()) cp_row[next_cp++] = acc;
                }
                batch.terminal_y[static_cast<std::size_t>(p)] = acc;
            } else {
                y.setZero();
                for (long k = 1; k <= n; ++k) vector_step(x, rng, y, z);
                for (int i = 0; i < d; ++i) batch.terminal_y[static_cast<std::size_t>(p * d + i)] = y(i);
            }
            if (options.keep_terminal_x) batch.terminal_x[static_cast<std::size_t>(p)] = x;
        }
    };
    parallel_paths(n_paths, resolve_threads(options.threads), run);
    return batch;
}

TrajectoryBatch simulate_ct(const CtMapSpec& spec, double t, long n_paths, std::uint64_t seed,
                            const std::optional<Vector>& mu, const SimulationOptions& options) {
    if (!(t > 0.0)) throw InvalidSpec("simulation needs t > 0");
    if (n_paths < 1) throw InvalidSpec("simulation needs at least one path");
    const Vector init = checked_initial(mu, spec.pi());
    std::vector<double> cps = options.checkpoints;
    for (std::size_t i = 0; i < cps.size(); ++i) {
        if (!(cps[i] > 0.0) || cps[i] > t || (i > 0 && cps[i] <= cps[i - 1])) {
            throw InvalidSpec("checkpoints must be increasing within (0, t]");
        }
    }

    TrajectoryBatch batch;
    batch.spec_id = io::spec_hash(spec);
    batch.n_steps = 0;
    batch.t_horizon = t;
    batch.n_paths = n_paths;
    batch.seed = seed;
    batch.d = 1;
    batch.terminal_y.assign(static_cast<std::size_t>(n_paths), 0.0);
    if (options.keep_terminal_x) batch.terminal_x.assign(static_cast<std::size_t>(n_paths), 0);
    batch.checkpoints = cps;
    batch.checkpoint_y.assign(static_cast<std::size_t>(n_paths) * cps.size(), 0.0);

    const CtStepper stepper(spec);
    const Sampler start = Sampler::of_vector(init);
    auto run = [&](long lo, long hi) {
        for (long p = lo; p < hi; ++p) {
            PathRng rng(seed, static_cast<std::uint64_t>(p));
            int x = start.draw(0, rng.next());
            double hold = stepper.initial_hold(x, rng);
            double y = 0.0, now = 0.0;
            for (std::size_t c = 0; c < cps.size(); ++c) {
                y += stepper.advance(x, hold, cps[c] - now, rng);
                now = cps[c];
                batch.checkpoint_y[static_cast<std::size_t>(p) * cps.size() + c] = y;
            }
            y += stepper.advance(x, hold, t - now, rng);
            batch.terminal_y[static_cast<std::size_t>(p)] = y;
            if (options.keep_terminal_x) batch.terminal_x[static_cast<std::size_t>(p)] = x;
        }
    };
    parallel_paths(n_paths, resolve_threads(options.threads), run);
    return batch;
}

IncrementPanel increment_panel(const MapSpec& spec, int n, long n_paths, std::uint64_t seed, int threads) {
    if (n < 1 || n_paths < 1) throw InvalidSpec("increment panel needs n >= 1 and paths >= 1");
    if (spec.dim() != 1) throw InvalidSpec("increment panel requires d = 1");
    SimulationOptions opt;
    opt.threads = threads;
    for (int k = 1; k < n; ++k) opt.checkpoints.push_back(k);
    const auto batch = simulate_discrete(spec, n, n_paths, seed, std::nullopt, opt);
    IncrementPanel panel;
    panel.n_paths = n_paths;
    panel.n = n;
    panel.values.resize(static_cast<std::size_t>(n_paths) * static_cast<std::size_t>(n));
    for (long p = 0; p < n_paths; ++p) {
        double prev = 0.0;
        for (int k = 0; k < n; ++k) {
            const double cur = k + 1 < n ? batch.at(p, static_cast<std::size_t>(k)) : batch.y(p);
            panel.values[static_cast<std::size_t>(p * n + k)] = cur - prev;
            prev = cur;
        }
    }
    return panel;
}

EdgeCountBatch simulate_edge_counts(const StochasticKernel& kernel, std::vector<long> n_list, long n_paths,
                                    std::uint64_t seed, const std::optional<Vector>& mu, int threads) {
    if (n_list.empty() || n_paths < 1) throw InvalidSpec("edge counts need n values and paths");
    std::sort(n_list.begin(), n_list.end());
    n_list.erase(std::unique(n_list.begin(), n_list.end()), n_list.end());
    if (n_list.front() < 1) throw InvalidSpec("n values must be >= 1");
    const Vector init = checked_initial(mu, kernel.pi());
    const Sampler sampler(kernel.P());
    const Sampler start = Sampler::of_vector(init);
    const auto S = kernel.size();
    const auto block = static_cast<std::size_t>(S * S);

    EdgeCountBatch batch;
    batch.n_paths = n_paths;
    batch.states = S;
    batch.n_list = n_list;
    batch.counts.assign(static_cast<std::size_t>(n_paths) * n_list.size() * block, 0);
    auto run = [&](long lo, long hi) {
        std::vector<std::uint32_t> c(block);
        for (long p = lo; p < hi; ++p) {
            PathRng rng(seed, static_cast<std::uint64_t>(p));
            std::fill(c.begin(), c.end(), 0);
            int x = start.draw(0, rng.next());
            long k = 0;
            for (std::size_t cp = 0; cp < n_list.size(); ++cp) {
                for (; k < n_list[cp]; ++k) {
                    const int nx = sampler.draw(x, rng.next());
                    ++c[static_cast<std::size_t>(x * S + nx)];
                    x = nx;
                }
                std::copy(c.begin(), c.end(), batch.counts.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(p) * n_list.size() + cp) * block));
            }
        }
    };
    parallel_paths(n_paths, resolve_threads(threads), run);
    return batch;
}

}  // namespace maplab
