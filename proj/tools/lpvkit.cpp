#include <lpvcore/lpvcore.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace lpvcore;

std::string peek_model_kind(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    std::string tok;
    if (!(f >> tok)) throw std::runtime_error("empty model file '" + path + "'");
    return tok;
}

int cmd_simulate(const std::string& model_path, const std::string& data_path,
                 const std::string& out_path) {
    Dataset d = load_dataset_csv(data_path);
    const std::string kind = peek_model_kind(model_path);
    Matrix y;
    if (kind == "lpvio") {
        y = simulate_io(load_io_model(model_path), d.u, d.p);
    } else if (kind == "lpvss") {
        y = simulate_ss(load_ss_model(model_path), d.u, d.p).y;
    } else {
        throw std::runtime_error("unsupported model kind '" + kind + "' in '" + model_path + "'");
    }
    save_signal_csv(out_path, y, d.sample_time);
    std::cout << "simulated " << y.rows() << " samples -> " << out_path << "\n";
    return 0;
}

int cmd_identify(const std::string& structure, const std::string& template_path,
                 const std::string& data_path, const std::string& opts_path,
                 const std::string& out_dir) {
    Dataset d = load_dataset_csv(data_path);
    EstimOptions opts = opts_path.empty() ? EstimOptions{} : load_estim_options(opts_path);
    std::filesystem::create_directories(out_dir);

    if (structure == "ss") {
        LpvSsModel init = load_ss_model(template_path);
        SsFitReport fit = lpvssest(init, d, opts);
        save_ss_model(fit.model, out_dir + "/model.lpvss");
        write_loss_trace(out_dir + "/loss_trace.csv", fit.loss_trace);
        std::ofstream rf(out_dir + "/report.txt");
        rf << std::setprecision(10) << "structure: ss\nparameters: " << fit.theta.size()
           << "\nloss: " << fit.final_loss << "\nbfr_est_percent: " << fit.bfr_est
           << "\niterations: " << fit.iterations << "\n";
        std::cout << "ss fit: loss " << fit.final_loss << ", bfr " << fit.bfr_est << "% -> "
                  << out_dir << "\n";
        return 0;
    }

    LpvIdPoly tmpl = load_idpoly(template_path);
    const std::string actual = structure_name(tmpl.structure());
    if (structure != actual)
        throw std::runtime_error("template in '" + template_path + "' is " + actual +
                                 "-structured, not " + structure);
    FitReport fit = [&] {
        if (structure == "arx") return lpvarx(tmpl, d, opts);
        return lpvpolyest(plr_estimate(tmpl, d, opts).model, d, opts);
    }();
    save_idpoly(fit.model, out_dir + "/model.lpvidpoly");
    write_loss_trace(out_dir + "/loss_trace.csv", fit.loss_trace);
    std::ofstream rf(out_dir + "/report.txt");
    write_fit_report(rf, fit);
    std::cout << structure << " fit: loss " << fit.final_loss << ", bfr " << fit.bfr_est
              << "% -> " << out_dir << "\n";
    return 0;
}

int cmd_bench(const std::string& config_path, const std::string& out_dir, int seed) {
    ExperimentConfig cfg =
        config_path.empty() ? ExperimentConfig{} : load_experiment_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed >= 0) cfg.seed = static_cast<unsigned>(seed);
    ExperimentReport rep = run_experiment(cfg);
    std::cout << std::setprecision(6) << "embedding bfr: " << rep.embedding_bfr << "%\n";
    for (const auto& s : rep.structures) {
        std::cout << s << " bfr:";
        for (std::size_t si = 0; si < cfg.snr_list_db.size(); ++si) {
            if (rep.errors[s][si].empty())
                std::cout << " " << rep.validation_bfr[s][si];
            else
                std::cout << " failed(" << rep.errors[s][si] << ")";
        }
        std::cout << "\n";
    }
    std::cout << "outputs in " << cfg.out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"LPV modelling, identification and benchmark toolkit"};
    app.require_subcommand(1);

    std::string model_path, data_path, out_path;
    auto* sim = app.add_subcommand("simulate", "Simulate an LPV model along a dataset");
    sim->add_option("--model", model_path, "model file (lpvio or lpvss)")->required();
    sim->add_option("--data", data_path, "dataset CSV with t,u*,p* columns")->required();
    sim->add_option("--out", out_path, "output CSV path")->required();

    std::string structure, template_path, opts_path, out_dir;
    auto* ident = app.add_subcommand("identify", "Estimate a model from data");
    ident->add_option("--structure", structure, "arx | armax | oe | bj | ss")
        ->required()
        ->check(CLI::IsMember({"arx", "armax", "oe", "bj", "ss"}));
    ident->add_option("--template", template_path, "model-set template file")->required();
    ident->add_option("--data", data_path, "dataset CSV with t,u*,p*,y* columns")->required();
    ident->add_option("--opts", opts_path, "estimation options file (key = value)");
    ident->add_option("--out", out_dir, "output directory")->required();

    std::string bench_config, bench_out;
    int bench_seed = -1;
    auto* bench = app.add_subcommand("bench", "Run a benchmark study");
    std::string study;
    bench->add_option("study", study, "benchmark name")
        ->required()
        ->check(CLI::IsMember({"unbalanced-disc"}));
    bench->add_option("--config", bench_config, "experiment config file (key = value)");
    bench->add_option("--out", bench_out, "output directory (overrides config)");
    bench->add_option("--seed", bench_seed, "random seed (overrides config)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(model_path, data_path, out_path);
        if (ident->parsed())
            return cmd_identify(structure, template_path, data_path, opts_path, out_dir);
        if (bench->parsed()) return cmd_bench(bench_config, bench_out, bench_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
