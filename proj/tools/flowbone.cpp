// flowbone: signed backbones, embeddings and clusters for yearly flow networks.

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "flowbone/pipeline.hpp"

namespace {

using namespace flowbone;

enum Exit : int { kOk = 0, kValidation = 2, kComputation = 3, kIo = 4 };

struct Options {
    std::string config_file;
    std::map<std::string, std::string> flags;  // key -> value, applied over the config file
    std::vector<std::string> sets;             // raw key=value overrides
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("-c,--config", o.config_file, "key=value configuration file");
    auto flag = [&](const std::string& name, const std::string& key, const std::string& help) {
        cmd->add_option_function<std::string>(name, [&o, key](const std::string& v) { o.flags[key] = v; }, help);
    };
    flag("--flows", "flows", "flow CSV (year,origin,destination,count)");
    flag("--meta", "meta", "node metadata CSV (id,label,lat,lon,region)");
    flag("--population", "population", "population CSV (id,year,population)");
    flag("-o,--out", "out", std::string("output directory (default: $") + kOutputEnv + ")");
    flag("--keep-fraction", "keep_fraction", "share of ordered pairs kept by the significance filter");
    flag("--vigor-threshold", "vigor_threshold", "minimum |vigor| of a backbone link");
    flag("--dim", "dim", "embedding dimension");
    flag("--learning-rate", "learning_rate", "SGD learning rate");
    flag("--epochs", "epochs", "SGD epochs");
    flag("--seed", "seed", "base random seed");
    flag("--eps", "eps", "DBSCAN eps");
    flag("--min-samples", "min_samples", "DBSCAN min_samples");
    flag("--clusters-k", "clusters_k", "clusters cut from the hierarchy");
    flag("--max-lag", "max_lag", "largest lag for stability errors");
    flag("--period-a", "period_a", "first comparison period, e.g. 2008-2013");
    flag("--period-b", "period_b", "second comparison period, e.g. 2014-2019");
    flag("--dendrogram-cutoff", "dendrogram_cutoff", "omit dendrogram merges above this height");
    flag("--ego", "ego", "comma-separated node ids to render ego networks for");
    flag("--loss-curve-dims", "loss_curve_dims", "comma-separated dimensions for the loss curve");
    flag("--threads", "threads", "worker threads (0 = all cores)");
    cmd->add_option("--set", o.sets, "extra key=value override (repeatable)");
}

PipelineConfig resolve(const Options& o) {
    PipelineConfig c;
    if (const char* env = std::getenv(kOutputEnv)) c.out = env;
    if (!o.config_file.empty()) load_config_file(o.config_file, c);
    for (const auto& [k, v] : o.flags) set_config_value(c, k, v);
    for (const auto& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + kv + "'");
        set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return c;
}

int run_guarded(const std::function<void()>& fn) {
    try {
        fn();
        return kOk;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kValidation;
    } catch (const LookupError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kValidation;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "computation error: " << e.what() << '\n';
        return kComputation;
    }
}

/// Runs a single stage against an existing output directory and refreshes the manifest.
void run_single(const Options& o, const std::string& name,
                const std::function<void(const PipelineConfig&, const TemporalFlowSet&)>& stage) {
    auto c = resolve(o);
    validate_config(c);
    require_writable(c.out);
    const auto set = run_stage("load", [&] { return load_inputs(c); });
    run_stage(name, [&] { stage(c, set); });
    write_manifest(c);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flowbone: signed backbone and latent-space analysis of yearly flow networks"};
    app.require_subcommand(1);

    Options opts;
    std::map<std::string, CLI::App*> stages;
    auto* validate = app.add_subcommand("validate", "load and validate the input files");
    add_common(validate, opts);
    for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
             {"stats", "densities, strengths, CCDFs and migration rates"},
             {"backbone", "signed backbone per year"},
             {"metrics", "reciprocity and structural balance of each backbone"},
             {"embed", "latent embeddings per year"},
             {"align", "chained Procrustes alignment and lagged stability errors"},
             {"cluster", "DBSCAN and complete-linkage clustering of aligned embeddings"},
             {"persistence", "link persistence and period comparison"},
             {"render", "SVG charts, maps and dendrograms"},
             {"pipeline", "run every stage"}}) {
        stages[name] = app.add_subcommand(name, help);
        add_common(stages[name], opts);
    }

    SynthConfig synth;
    std::string synth_dir;
    auto* sy = app.add_subcommand("synth", "write a seeded synthetic data set");
    sy->add_option("-o,--out", synth_dir, "directory for flows.csv, meta.csv, population.csv, planted.csv")->required();
    sy->add_option("--nodes", synth.nodes, "number of nodes");
    sy->add_option("--years", synth.years, "number of years");
    sy->add_option("--first-year", synth.first_year, "first year");
    sy->add_option("--regions", synth.regions, "planted regions");
    sy->add_option("--hubs", synth.hubs, "hub cities with long-range links");
    sy->add_option("--seed", synth.seed, "random seed");
    sy->add_option("--between-affinity", synth.between_affinity, "flow affinity between planted regions (within is 1)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    if (validate->parsed())
        return run_guarded([&] {
            auto c = resolve(opts);
            if (c.flows.empty() || c.meta.empty()) throw ValidationError("--flows and --meta are required");
            const auto set = load_inputs(c);
            std::cout << "ok: " << set.nodes().size() << " nodes, " << set.networks.size() << " years ("
                      << set.networks.front().year << "-" << set.networks.back().year << ")\n";
        });
    if (sy->parsed())
        return run_guarded([&] {
            if (synth.nodes < 2 || synth.years < 1 || synth.regions < 1 || synth.hubs < 0 || synth.hubs > synth.nodes)
                throw ValidationError("synth: invalid size parameters");
            write_synthetic(synthesize(synth), synth_dir);
            std::cout << "wrote synthetic set to " << synth_dir << '\n';
        });
    if (stages["pipeline"]->parsed())
        return run_guarded([&] {
            const auto r = run_pipeline(resolve(opts));
            for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
            std::cout << "wrote " << r.manifest["artifacts"].size() << " artifacts, config "
                      << r.manifest["config_hash"].get<std::string>().substr(0, 12) << '\n';
        });
    if (stages["render"]->parsed())
        return run_guarded([&] {
            std::vector<std::string> warnings;
            run_single(opts, "render", [&](const PipelineConfig& c, const TemporalFlowSet& s) { stage_render(c, s, &warnings); });
            for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
        });

    const std::map<std::string, std::function<void(const PipelineConfig&, const TemporalFlowSet&)>> fns = {
        {"stats", stage_stats},       {"backbone", stage_backbone}, {"metrics", stage_metrics},
        {"embed", stage_embed},       {"align", stage_align},       {"cluster", stage_cluster},
        {"persistence", stage_persistence}};
    for (const auto& [name, fn] : fns)
        if (stages[name]->parsed()) return run_guarded([&] { run_single(opts, name, fn); });
    return kValidation;
}
