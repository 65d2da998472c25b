// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance        run every criterion
//   acceptance k      run criterion k only

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "gpcheck/gpcheck.hpp"
#include "oracles.hpp"

using namespace gpcheck;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

PotentialSpec canonical() { return PotentialSpec::square(1.0, 1.0, 1.25, 100.0, 0.005, 0.5); }

// ---------------------------------------------------------------------------

Outcome scattering_accuracy() {
    const auto t0 = std::chrono::steady_clock::now();
    const double r2 = 1.0, lambda = 100.0;
    const auto V = RadialPotential::step(0.0, r2, lambda);
    const auto sc = solve_zero_energy(V);
    const double kappa = std::sqrt(lambda / 2.0);
    const double exact = r2 - std::tanh(kappa * r2) / kappa;
    const double rel = std::abs(sc.a - exact) / exact;
    const double agree = std::abs(sc.a - sc.a_integral) / exact;
    const double dt = seconds_since(t0);
    return {rel <= 1e-6 && agree <= 1e-6 && dt < 1.0,
            fmt("a = %.12f, closed form %.12f, rel %.2e, tail vs integral %.2e, %.3f s", sc.a, exact, rel, agree, dt)};
}

Outcome bound_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto spec = canonical();
    const double beta = 0.5, a = scattering_length(spec.potential());
    const double eight_pi_a = 8.0 * std::numbers::pi * a;
    const std::vector<double> Ns{1e2, 1e3, 1e4, 1e5};
    std::vector<double> gWf, gW, L1, L32, L2;
    bool k_ok = true;
    for (double N : Ns) {
        const auto ms = find_minimal_R(spec, N, beta);
        k_ok = k_ok && ms.K_beta >= 1.0 - a / std::pow(N, 1.0 - beta) && ms.K_beta <= 1.0;
        const auto w = w_integrals(ms);
        const auto g = g_norms(ms);
        gWf.push_back(std::abs(w.NWf - eight_pi_a));
        gW.push_back(std::abs(w.NW - eight_pi_a));
        L1.push_back(g.L1);
        L32.push_back(g.L3half);
        L2.push_back(g.L2);
    }
    const double s[5] = {fit_slope(Ns, gWf), fit_slope(Ns, gW), fit_slope(Ns, L1), fit_slope(Ns, L32), fit_slope(Ns, L2)};
    const double ref[5] = {-(1 + beta), -(1 - beta), -(1 + 2 * beta), -(1 + beta), -(1 + beta / 2)};
    bool slopes_ok = true;
    std::string miss;
    const char* names[5] = {"NWf", "NW", "gL1", "gL3/2", "gL2"};
    for (int i = 0; i < 5; ++i)
        if (std::abs(s[i] - ref[i]) > 0.1) {
            slopes_ok = false;
            miss += fmt(" %s", names[i]);
        }
    const double dt = seconds_since(t0);
    return {k_ok && slopes_ok && dt < 60.0,
            fmt("K in range: %s; slopes %.3f %.3f %.3f %.3f %.3f vs %.2f %.2f %.2f %.2f %.2f; off:%s; %.2f s",
                k_ok ? "yes" : "no", s[0], s[1], s[2], s[3], s[4], ref[0], ref[1], ref[2], ref[3], ref[4],
                miss.empty() ? " none" : miss.c_str(), dt)};
}

Outcome root_construction() {
    const auto spec = canonical();
    double worst_s = 0.0, worst_f = 0.0;
    bool clean = true;
    for (double N : {1e2, 1e3, 1e4, 1e5}) {
        const auto ms = find_minimal_R(spec, N, 0.5);
        worst_s = std::max(worst_s, std::abs(ms.s_at_root) / ms.s_scale);
        worst_f = std::max(worst_f, std::abs(gauss_derivative(ms, ms.R_beta)) * ms.R_beta);
        clean = clean && ms.refinement_clean;
    }
    return {worst_s <= 1e-10 && worst_f <= 1e-8 && clean,
            fmt("max |s|/scale %.2e, max R f'(R) %.2e, refinement scan clean: %s", worst_s, worst_f, clean ? "yes" : "no")};
}

Outcome gp_solver() {
    const PeriodicGrid g(3, 16, 10.0);
    const auto A = ExternalPotential::capped_harmonic(0.5, 4.0);
    const double a = 0.5;
    const double c0[] = {0.3, -0.2, 0.1}, k0[] = {0.5, 0.0, -0.3};
    const auto phi0 = GPField::gaussian(g, 1.0, c0, k0);

    const auto tr = gp_evolve(phi0, a, A, 0.1, 1e-4);

    auto run = [&](double dt, int steps) {
        GPSolver s(g);
        GPField f = phi0;
        for (int i = 0; i < steps; ++i) s.step(f, a, A, dt);
        return f;
    };
    auto dist = [&](const GPField& x, const GPField& y) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.values.size(); ++i) s += std::norm(x.values[i] - y.values[i]);
        return std::sqrt(s * g.cell_volume());
    };
    const auto f1 = run(0.02, 10), f2 = run(0.01, 20), f3 = run(0.005, 40);
    const double order = std::log2(dist(f1, f2) / dist(f2, f3));

    GPSolver s(g);
    GPField f = phi0;
    for (int i = 0; i < 200; ++i) s.step(f, a, A, 5e-4);
    for (int i = 0; i < 200; ++i) s.step(f, a, A, -5e-4);
    const double back = dist(f, phi0);

    return {tr.max_norm_drift < 1e-10 && tr.max_energy_drift < 1e-8 && std::abs(order - 2.0) <= 0.2 && back < 1e-12,
            fmt("norm drift %.2e, energy drift %.2e over %zu steps, order %.3f, reversal %.2e", tr.max_norm_drift,
                tr.max_energy_drift, tr.steps, order, back)};
}

Outcome counting() {
    std::mt19937_64 rng(7);
    double sum_err = 0.0, q_err = 0.0, brute = 0.0;
    for (int N : {2, 3}) {
        const PeriodicGrid g = N == 2 ? PeriodicGrid(3, 4, 6.0) : PeriodicGrid(1, 12, 8.0);
        const auto phi = GPField::gaussian(g, 1.0);
        for (int k = 0; k < 100; ++k) {
            const auto s = ManyBodyState::random_symmetric(g, N, rng);
            const auto pk = pk_spectrum(s, phi);
            double tot = 0.0;
            for (double p : pk) tot += p;
            sum_err = std::max(sum_err, std::abs(tot - 1.0));
            q_err = std::max(q_err, std::abs(q1_expectation(s, phi) - weighted_expectation(s, phi, CountingWeight::fraction(N))));
            if (N == 2) {
                auto sq = [](const ManyBodyState& x) { return x.norm() * x.norm(); };
                const auto p1 = pq_project(s, phi, 0, Projector::p), q1 = pq_project(s, phi, 0, Projector::q);
                const double P0 = sq(pq_project(p1, phi, 1, Projector::p));
                const double P1 = sq(pq_project(p1, phi, 1, Projector::q)) + sq(pq_project(q1, phi, 1, Projector::p));
                const double P2 = sq(pq_project(q1, phi, 1, Projector::q));
                brute = std::max({brute, std::abs(P0 - pk[0]), std::abs(P1 - pk[1]), std::abs(P2 - pk[2])});
            }
        }
    }
    return {sum_err <= 1e-10 && q_err <= 1e-10 && brute <= 1e-12,
            fmt("|sum P_k - 1| %.2e, |<n^2> - <q1>| %.2e, brute-force N=2 %.2e over 200 states", sum_err, q_err, brute)};
}

Outcome partitions() {
    bool odd = true, even = true;
    std::string even_miss;
    for (int N = 4; N <= 11; ++N) {
        if (N == 10) continue;
        const auto s = partition_identities(N);
        const auto ref = partition_reference_ratios(N);
        for (const auto& name : partition_ratio_names()) {
            if (s.ratios.at(name) == ref.at(name)) continue;
            if (N % 2) {
                odd = false;
            } else {
                even = false;
                even_miss += fmt(" N=%d %s=%s", N, name.c_str(), s.ratios.at(name).str().c_str());
            }
        }
    }
    PartitionOperatorOptions o1, o2;
    o2.pi1 = {0, 1};
    o2.n1 = 1;
    const auto spec = canonical();
    const auto a = partition_operator_identity(spec, o1), b = partition_operator_identity(spec, o2);
    const bool op = a.pass && b.pass;
    return {odd && even && op,
            fmt("odd N closed forms: %s; even N 1/2,1/4: %s%s; operator identity %.1e / %.1e: %s", odd ? "exact" : "MISMATCH",
                even ? "exact" : "mismatch", even_miss.substr(0, 120).c_str(), a.max_abs_difference, b.max_abs_difference,
                op ? "pass" : "fail")};
}

Outcome positivity() {
    std::string detail;
    bool ok = true;
    int validated = 0;
    for (const auto& entry : fs::directory_iterator(GPCHECK_SAMPLES_DIR)) {
        if (entry.path().extension() != ".json") continue;
        const auto spec = load_spec(entry.path());
        const auto rep = validate_assumption(spec);
        if (!rep.overall) continue;
        ++validated;
        for (double e : {spec.epsilon(), rep.largest_passing_epsilon}) {
            const auto r = two_body_ground_energy(spec.vplus() - (1.0 + e) * spec.vminus());
            ok = ok && !r.violated;
        }
    }
    detail += fmt("%d validated specs nonnegative: %s", validated, ok ? "yes" : "no");

    const double w = 100.0 * 1.5;
    const auto deep = two_body_ground_energy(RadialPotential::step(0.0, 1.0, 100.0) - RadialPotential::step(1.0, 1.25, w));
    const double oracle = oracles::shooting_bound_state(100.0, w, 1.0, 1.25);
    const double rel = std::abs(deep.min_eigenvalue - oracle) / std::abs(oracle);
    detail += fmt("; deep well %.8f vs shooting %.8f (rel %.1e)", deep.min_eigenvalue, oracle, rel);

    const auto ms = find_minimal_R(canonical(), 1e3, 0.5);
    const auto shell = shell_form_check(ms, 1.0), doubled = shell_form_check(ms, 2.0);
    detail += fmt("; localized form %.2e (tol %.1e), with 2W %.3f", shell.min_eigenvalue, shell.tolerance + shell.discretization_estimate,
                  doubled.min_eigenvalue);
    return {ok && validated > 0 && deep.violated && rel <= 1e-4 && !shell.violated && doubled.violated, detail};
}

Outcome localized_scaling() {
    const std::vector<double> Ns{1e2, 1e3, 1e4, 1e5, 1e6};
    const auto r = localized_norm_scaling(Ns);
    return {r.pass(), fmt("fitted slope %.4f vs bound %.4f, C = %.3e, bounded at every N: %s", r.slope, r.target_slope,
                          r.constant, r.bounded ? "yes" : "no")};
}

Outcome energy_identity() {
    const auto spec = canonical();
    const PeriodicGrid g(3, 8, 8.0);
    const int N = 2;
    const auto H = ManyBodyHamiltonian::from_spec(g, N, spec, ExternalPotential::capped_harmonic(0.3, 3.0));
    const auto ms = find_minimal_R(spec, N, 0.5);
    const auto phi = GPField::gaussian(g, 1.0);
    std::vector<ManyBodyState> states{ManyBodyState::product(phi, N)};
    std::mt19937_64 rng(11);
    for (int k = 0; k < 20; ++k) states.push_back(ManyBodyState::random_symmetric(g, N, rng));
    double worst = 0.0, min_b = 1e300, min_qq = 1e300;
    for (const auto& s : states) {
        const auto d = energy_decomposition(s, phi, H, ms, spec.epsilon(), indicator_radius(N));
        worst = std::max(worst, std::abs(d.residual) / d.scale);
        min_b = std::min(min_b, d.term("b_localized_v_minus_w"));
        min_qq = std::min(min_qq, d.term("w_qq"));
    }
    return {worst < 1e-8 && min_b >= 0.0 && min_qq >= 0.0,
            fmt("max residual/scale %.2e over %zu states; min localized V-W term %.3e, min qq term %.3e", worst, states.size(),
                min_b, min_qq)};
}

Outcome coevolution() {
    const auto t0 = std::chrono::steady_clock::now();
    const PeriodicGrid g(3, 16, 10.0);
    const int N = 2;
    const auto A = ExternalPotential::zero();
    const auto spec = canonical();
    const double radius = indicator_radius(N);
    const ManyBodyOps ops(g, N);
    const auto masks = indicator_masks(g, N, 0, radius);

    auto run = [&](bool interacting, int steps, double& max_td, bool& sane) {
        const double a = interacting ? scattering_length(spec.potential()) : 0.0;
        auto H = interacting ? ManyBodyHamiltonian::from_spec(g, N, spec, A) : ManyBodyHamiltonian(g, N, RadialPotential{}, A);
        GPField phi = GPField::gaussian(g, 1.0);
        ManyBodyState s = ManyBodyState::product(phi, N);
        GPSolver gp(g);
        max_td = 0.0;
        sane = true;
        for (int k = 0; k <= steps; ++k) {
            if (k > 0) {
                evolve(s, H, 1e-3, 1);
                gp.step(phi, a, A, 1e-3);
            }
            const double td = trace_distance(s, phi);
            const double nh = weighted_expectation(s, phi, CountingWeight::n_hat(N));
            const double c4 = gradient_condition_lhs(s, phi, ops, masks);
            sane = sane && std::isfinite(td) && std::isfinite(nh) && std::isfinite(c4) && td >= -1e-9 && td <= 2.0 &&
                   nh >= -1e-9 && nh <= 1.0 + 1e-9 && c4 >= 0.0;
            max_td = std::max(max_td, std::abs(td));
        }
    };
    double td_int, td_free;
    bool sane_int, sane_free;
    run(true, 3, td_int, sane_int);
    run(false, 2, td_free, sane_free);
    const double dt = seconds_since(t0);
    return {sane_int && sane_free && td_free < 1e-8 && dt < 600.0,
            fmt("interacting: finite and bounded %s, max trace distance %.3e; V=0: max trace distance %.2e; %.0f s",
                sane_int ? "yes" : "no", td_int, td_free, dt)};
}

struct Criterion {
    const char* name;
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {"scattering length accuracy", scattering_accuracy},
        {"modified scattering bound suite", bound_suite},
        {"root construction", root_construction},
        {"GP solver conservation and order", gp_solver},
        {"counting machinery", counting},
        {"partition identities", partitions},
        {"positivity checks", positivity},
        {"localized norm scaling", localized_scaling},
        {"energy decomposition identity", energy_identity},
        {"co-evolution sanity", coevolution},
    };
    std::vector<int> pick;
    if (argc > 1)
        pick.push_back(std::atoi(argv[1]));
    else
        for (int i = 1; i <= int(all.size()); ++i) pick.push_back(i);

    int failed = 0;
    for (int k : pick) {
        if (k < 1 || k > int(all.size())) {
            std::fprintf(stderr, "no criterion %d\n", k);
            return 2;
        }
        const auto& c = all[std::size_t(k - 1)];
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", k, c.name, o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    return failed ? 1 : 0;
}
