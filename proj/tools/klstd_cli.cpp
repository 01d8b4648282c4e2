// Command-line front end: Monte Carlo sweeps over sample size or horizon,
// single fits, and lower-bound family certification.
//
//   klstd sweep-n    --kernel poly:1 --ensemble easy --gamma 0.9 \
//                    --n-grid 128,256,512 --trials 200 --seed 1 --out run.csv --summary
//   klstd sweep-h    --kernel exp --ensemble hard --gamma-grid 0.6,0.7,0.8,0.9 --n 1024
//   klstd verify-lb  --regime A --kernel poly:1 --gamma 0.95 --n 100000 --seed 7
//   klstd fit-one    --kernel exp --ensemble easy --gamma 0.9 --n 512 --seed 3
//
// Options may also come from a flat key=value config file via --config;
// command-line flags override file values.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "klstd/klstd.hpp"

namespace {

using namespace klstd;

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
    std::vector<std::size_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
    return out;
}

void emit(const experiments::SweepResult& res, const std::string& out_path, bool summary) {
    if (out_path.empty()) {
        experiments::write_csv(std::cout, res, summary);
        return;
    }
    std::ofstream os(out_path);
    if (!os) throw std::runtime_error("cannot open output file: " + out_path);
    experiments::write_csv(os, res, summary);
}

struct CommonOpts {
    std::string kernel = "exp";
    std::string ensemble = "easy";
    std::string gamma = "0.9";
    std::string gamma_grid;
    std::string n = "1024";
    std::string n_grid;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    double c0 = 0.01;
    std::string zeta = "bR";
    std::size_t trunc = kernel::kDefaultTruncation;
    std::string out;
    bool summary = false;

    void attach(CLI::App* cmd, bool with_ensemble = true) {
        cmd->add_option("--kernel", kernel, "kernel spec: poly:<alpha>[:<c>] | exp | linear:<d>");
        if (with_ensemble) cmd->add_option("--ensemble", ensemble, "ensemble: easy | hard");
        cmd->add_option("--gamma", gamma, "discount factor");
        cmd->add_option("--gamma-grid", gamma_grid, "comma-separated gamma grid");
        cmd->add_option("--n", n, "sample size");
        cmd->add_option("--n-grid", n_grid, "comma-separated sample-size grid");
        cmd->add_option("--trials", trials, "Monte Carlo trials per grid point");
        cmd->add_option("--seed", seed, "master seed");
        cmd->add_option("--c0", c0, "regularization constant in lambda = c0 (1-gamma) delta_n^2");
        cmd->add_option("--zeta", zeta, "noise scale rule: bR | sigma")
            ->check(CLI::IsMember({"bR", "sigma"}));
        cmd->add_option("--trunc", trunc, "kernel truncation level J");
        cmd->add_option("--out", out, "output CSV path (stdout when omitted)");
        cmd->add_flag("--summary", summary, "append slope,stderr,predicted summary line");
        cmd->set_config("--config", "", "flat key=value config file; flags override");
    }

    experiments::SweepConfig to_sweep_config(std::size_t default_trials) const {
        experiments::SweepConfig cfg;
        cfg.kernel_spec = kernel;
        cfg.ensemble = ensemble;
        cfg.gamma_grid = gamma_grid.empty() ? parse_double_list(gamma) : parse_double_list(gamma_grid);
        cfg.n_grid = n_grid.empty() ? parse_size_list(n) : parse_size_list(n_grid);
        cfg.trials = trials == 0 ? default_trials : trials;
        cfg.seed = seed;
        cfg.c0 = c0;
        cfg.zeta = zeta == "sigma" ? experiments::ZetaRule::Sigma : experiments::ZetaRule::BR;
        cfg.truncation = trunc;
        cfg.out_path = out;
        cfg.summary = summary;
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernel LSTD policy evaluation: sweeps, fits, lower-bound certification"};
    app.require_subcommand(1);

    auto* sweep_n = app.add_subcommand("sweep-n", "MSE versus sample size at fixed gamma");
    CommonOpts on;
    on.n_grid = "128,256,512,1024,2048,4096,8192";
    on.attach(sweep_n);

    auto* sweep_h = app.add_subcommand("sweep-h", "MSE versus effective horizon at fixed n");
    CommonOpts oh;
    oh.gamma_grid = "0.6,0.7,0.8,0.9,0.95";
    oh.attach(sweep_h);

    auto* fit_one = app.add_subcommand("fit-one", "single fit at one (n, gamma)");
    CommonOpts of;
    of.attach(fit_one);

    auto* verify = app.add_subcommand("verify-lb", "build and certify a lower-bound family");
    CommonOpts ov;
    std::string regime = "A";
    verify->add_option("--regime", regime, "family regime: A | B")
        ->check(CLI::IsMember({"A", "B"}));
    ov.attach(verify, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sweep_n->parsed()) {
            emit(experiments::run_sweep_n(on.to_sweep_config(2000)), on.out, on.summary);
        } else if (sweep_h->parsed()) {
            emit(experiments::run_sweep_horizon(oh.to_sweep_config(1000)), oh.out, oh.summary);
        } else if (fit_one->parsed()) {
            experiments::SweepConfig cfg = of.to_sweep_config(1);
            cfg.trials = 1;
            if (cfg.n_grid.size() != 1 || cfg.gamma_grid.size() != 1)
                throw std::invalid_argument("fit-one: needs a single --n and --gamma");
            emit(experiments::run_sweep_n(cfg), of.out, false);
        } else if (verify->parsed()) {
            double gamma = parse_double_list(ov.gamma).at(0);
            std::size_t n = parse_size_list(ov.n).at(0);
            experiments::VerifyResult res = experiments::run_verify_lowerbound(
                regime == "A" ? lowerbound::Regime::A : lowerbound::Regime::B, ov.kernel, gamma,
                n, ov.seed, ov.trunc, ov.out);
            experiments::write_report(std::cout, res.report, res.family);
            return res.report.pass ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
