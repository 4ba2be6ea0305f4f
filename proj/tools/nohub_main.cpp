// Command-line front end for the noHub embedding library: synthetic pools,
// one-shot embedding runs, episode benchmarks, hubness reports, and
// hyperparameter sweeps. Every flag can be overridden through an environment
// variable named NOHUB_<FLAG>.

#include "nohub/nohub.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

using namespace nohub;

constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

std::string env_name(std::string flag) {
    for (char& c : flag) {
        if (c == '-') c = '_';
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return "NOHUB_" + flag;
}

CLI::Option* add_flag_env(CLI::App* app, const std::string& name, auto& target,
                          const std::string& help) {
    auto* opt = app->add_option(name, target, help);
    std::string longest = name;
    const auto comma = longest.rfind(',');
    if (comma != std::string::npos) longest = longest.substr(comma + 1);
    while (!longest.empty() && longest.front() == '-') longest.erase(longest.begin());
    opt->envname(env_name(longest));
    return opt;
}

struct SynthParams {
    int classes = 20;
    int per_class = 50;
    int dim = 512;
    double separation = 6.3;
    double within_spread = 1.0;
};

struct EpisodeParams {
    int way = 5;
    int queries = 15;
    std::vector<int> shots = {1, 5};
};

struct NoHubFlags {
    double alpha = 0.2;
    double kappa = 0.5;
    double perplexity = 45.0;
    int iterations = -1;  // -1: per-variant default (50 noHub / 150 noHub-S)
    double learning_rate = 0.1;
    int dim = 400;
    double epsilon = 8.0;
};

NoHubConfig make_config(const NoHubFlags& flags, Variant variant, std::uint64_t seed) {
    NoHubConfig cfg = default_config(variant);
    cfg.alpha = flags.alpha;
    cfg.kappa = flags.kappa;
    cfg.perplexity = flags.perplexity;
    if (flags.iterations > 0) cfg.iterations = flags.iterations;
    cfg.learning_rate = flags.learning_rate;
    cfg.dim = flags.dim;
    cfg.epsilon = flags.epsilon;
    cfg.seed = seed;
    validate_config(cfg);
    return cfg;
}

void add_nohub_flags(CLI::App* app, NoHubFlags& flags) {
    add_flag_env(app, "--alpha", flags.alpha, "LSP/uniformity tradeoff weight in [0,1]");
    add_flag_env(app, "--kappa", flags.kappa, "embedding concentration (> 0)");
    add_flag_env(app, "--perplexity", flags.perplexity, "target perplexity in [2, n-1]");
    add_flag_env(app, "--iterations", flags.iterations,
                 "optimization steps (default 50 for nohub, 150 for nohub-s)");
    add_flag_env(app, "--lr", flags.learning_rate, "Adam learning rate");
    add_flag_env(app, "--embed-dim", flags.dim, "embedding dimensionality d");
    add_flag_env(app, "--epsilon", flags.epsilon, "between-class exaggeration (nohub-s)");
}

std::string join_comments(const std::vector<std::pair<std::string, std::string>>& kv) {
    std::ostringstream os;
    bool first = true;
    for (const auto& [k, v] : kv) {
        if (!first) os << " ";
        os << k << "=" << v;
        first = false;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// synth

struct SynthCmd {
    SynthParams params;
    std::uint64_t seed = 1;
    std::string output;
};

int cmd_synth(const SynthCmd& cmd) {
    require(cmd.params.classes >= 2, "--classes must be >= 2");
    require(cmd.params.per_class >= 1, "--per-class must be >= 1");
    require(cmd.params.dim >= 2, "--dim must be >= 2");
    require(cmd.params.separation >= 0.0, "--separation must be >= 0");
    require(cmd.params.within_spread >= 0.0, "--within-spread must be >= 0");

    const FeaturePool pool =
        synth_pool(cmd.params.classes, cmd.params.per_class, cmd.params.dim,
                   cmd.params.separation, cmd.params.within_spread, cmd.seed);
    const std::vector<std::string> comments = {
        "nohub synth",
        join_comments({{"classes", std::to_string(cmd.params.classes)},
                       {"per_class", std::to_string(cmd.params.per_class)},
                       {"dim", std::to_string(cmd.params.dim)},
                       {"separation", format_double(cmd.params.separation)},
                       {"within_spread", format_double(cmd.params.within_spread)},
                       {"seed", std::to_string(cmd.seed)}})};
    write_features(cmd.output, pool.x, &pool.y, comments);
    std::cout << "wrote " << pool.x.rows() << " rows x " << pool.x.cols() << " features to "
              << cmd.output << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// embed

struct EmbedCmd {
    std::string input;
    std::string output;
    std::string trace;
    std::string variant = "nohub";
    NoHubFlags flags;
    std::uint64_t seed = 1;
    bool verify = false;
};

int cmd_embed(const EmbedCmd& cmd) {
    require(cmd.variant == "nohub" || cmd.variant == "nohub-s",
            "--variant must be nohub or nohub-s");
    const Variant variant = cmd.variant == "nohub-s" ? Variant::NoHubS : Variant::NoHub;
    const NoHubConfig cfg = make_config(cmd.flags, variant, cmd.seed);

    const FeatureFile file = read_features(cmd.input);
    require(cfg.perplexity <= static_cast<double>(file.x.rows() - 1),
            "--perplexity must be <= n-1 for this input (n = " +
                std::to_string(file.x.rows()) + ")");

    EmbeddingResult result;
    if (variant == Variant::NoHubS) {
        if (!file.has_labels)
            throw ValidationError("--variant nohub-s needs a labels column in the input");
        bool any_support = false;
        for (std::int64_t y : file.labels) any_support = any_support || y >= 0;
        if (!any_support)
            throw ValidationError("--variant nohub-s needs at least one labeled (support) row");
        const SupportLabelInfo info = SupportLabelInfo::from_labels(file.labels);
        result = embed(file.x, cfg, &info);
    } else {
        result = embed(file.x, cfg);
    }

    const std::vector<std::string> comments = {
        "nohub embed",
        join_comments({{"input", cmd.input},
                       {"variant", cmd.variant},
                       {"alpha", format_double(cfg.alpha)},
                       {"kappa", format_double(cfg.kappa)},
                       {"perplexity", format_double(cfg.perplexity)},
                       {"iterations", std::to_string(cfg.iterations)},
                       {"lr", format_double(cfg.learning_rate)},
                       {"embed_dim", std::to_string(cfg.dim)},
                       {"epsilon", format_double(cfg.epsilon)},
                       {"seed", std::to_string(cfg.seed)}})};
    write_features(cmd.output, result.embeddings,
                   file.has_labels ? &file.labels : nullptr, comments);

    if (!cmd.trace.empty()) {
        std::vector<TraceRow> rows;
        rows.reserve(result.loss_trace.size());
        for (std::size_t i = 0; i < result.loss_trace.size(); ++i) {
            rows.push_back(TraceRow{static_cast<int>(i) + 1, result.loss_trace[i].lsp,
                                    result.loss_trace[i].unif, result.loss_trace[i].total});
        }
        write_loss_trace(cmd.trace, rows, comments);
    }

    if (cmd.verify) {
        double worst = 0.0;
        for (Index i = 0; i < result.embeddings.rows(); ++i)
            worst = std::max(worst, std::abs(result.embeddings.row(i).norm() - 1.0));
        std::cout << "verify: max |row norm - 1| = " << format_double(worst) << "\n";
        if (worst > 1e-9) throw NumericError("embedding rows are not unit-norm");
    }
    if (result.pca_rank_deficient)
        std::cerr << "note: embedding dimension exceeds the data rank; trailing coordinates are zero\n";
    std::cout << "wrote " << result.embeddings.rows() << " embeddings (d=" << cfg.dim << ") to "
              << cmd.output << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval / sweep shared machinery

struct EvalCmd {
    std::string input;  // optional pool; when empty, episodes come from the generator
    SynthParams synth;
    EpisodeParams episode;
    std::vector<std::string> methods = {"none", "l2", "cl2", "zn", "nohub", "nohub-s"};
    NoHubFlags flags;
    std::string classifier = "euclidean";
    int episodes = 500;
    int k_hubness = 5;
    std::uint64_t seed = 1;
    int threads = 0;
    std::string output;
};

EpisodeSource make_source(const EvalCmd& cmd, int shots) {
    if (!cmd.input.empty()) {
        FeatureFile file = read_features(cmd.input);
        if (!file.has_labels) throw ValidationError("pool file has no labels");
        auto pool = std::make_shared<FeaturePool>();
        pool->x = std::move(file.x);
        pool->y = std::move(file.labels);
        const int way = cmd.episode.way;
        const int queries = cmd.episode.queries;
        return [pool, way, shots, queries](std::uint64_t seed) {
            return sample_episode(*pool, way, shots, queries, seed);
        };
    }
    const SynthParams s = cmd.synth;
    const int way = cmd.episode.way;
    const int queries = cmd.episode.queries;
    return [s, way, shots, queries](std::uint64_t seed) {
        return synth_episode(way, shots, queries, s.dim, s.separation, s.within_spread, seed);
    };
}

void validate_eval(const EvalCmd& cmd) {
    require(!cmd.methods.empty(), "--methods must not be empty");
    for (const auto& m : cmd.methods) parse_method(m);
    require(cmd.episodes >= 1, "--episodes must be >= 1");
    require(cmd.episode.way >= 2, "--ways must be >= 2");
    require(cmd.episode.queries >= 1, "--queries must be >= 1");
    require(!cmd.episode.shots.empty(), "--shots must not be empty");
    for (int s : cmd.episode.shots) require(s >= 1, "--shots entries must be >= 1");
    require(cmd.classifier == "euclidean" || cmd.classifier == "cosine",
            "--classifier must be euclidean or cosine");
    require(cmd.k_hubness >= 1, "--k-hubness must be >= 1");
    for (int s : cmd.episode.shots) {
        const int n = cmd.episode.way * (s + cmd.episode.queries);
        require(cmd.k_hubness <= n - 1, "--k-hubness must be <= n-1 per episode");
        require(cmd.flags.perplexity <= static_cast<double>(n - 1),
                "--perplexity must be <= n-1 = " + std::to_string(n - 1) +
                    " for the requested episode shape");
    }
}

ResultRow run_one(const EvalCmd& cmd, const std::string& method_str, int shots) {
    BenchmarkOptions opt;
    opt.method = parse_method(method_str);
    const Variant variant =
        opt.method == EmbedMethod::NoHubS ? Variant::NoHubS : Variant::NoHub;
    opt.nohub = make_config(cmd.flags, variant, cmd.seed);
    opt.classifier = cmd.classifier == "cosine" ? ClassifierMetric::Cosine
                                                : ClassifierMetric::Euclidean;
    opt.episodes = cmd.episodes;
    opt.k_hubness = cmd.k_hubness;
    opt.seed = cmd.seed;
    opt.threads = cmd.threads;

    const AggregateStats stats = run_benchmark(make_source(cmd, shots), opt);
    ResultRow row;
    row.method = method_str;
    row.variant = opt.method == EmbedMethod::NoHub || opt.method == EmbedMethod::NoHubS
                      ? method_str
                      : "-";
    row.shots = shots;
    row.accuracy_mean = stats.mean_accuracy;
    row.accuracy_ci = stats.ci95_halfwidth;
    row.sk_mean = stats.mean_skewness;
    row.ho_mean = stats.mean_hub_occurrence;
    row.episodes = stats.episode_count;
    row.seed = cmd.seed;
    return row;
}

std::vector<std::string> eval_comments(const EvalCmd& cmd, const std::string& head) {
    return {head,
            join_comments({{"input", cmd.input.empty() ? "<synthetic>" : cmd.input},
                           {"ways", std::to_string(cmd.episode.way)},
                           {"queries", std::to_string(cmd.episode.queries)},
                           {"dim", std::to_string(cmd.synth.dim)},
                           {"separation", format_double(cmd.synth.separation)},
                           {"within_spread", format_double(cmd.synth.within_spread)},
                           {"episodes", std::to_string(cmd.episodes)},
                           {"k_hubness", std::to_string(cmd.k_hubness)},
                           {"classifier", cmd.classifier},
                           {"alpha", format_double(cmd.flags.alpha)},
                           {"kappa", format_double(cmd.flags.kappa)},
                           {"perplexity", format_double(cmd.flags.perplexity)},
                           {"iterations", std::to_string(cmd.flags.iterations)},
                           {"lr", format_double(cmd.flags.learning_rate)},
                           {"embed_dim", std::to_string(cmd.flags.dim)},
                           {"epsilon", format_double(cmd.flags.epsilon)},
                           {"seed", std::to_string(cmd.seed)}})};
}

int cmd_eval(const EvalCmd& cmd) {
    validate_eval(cmd);
    std::vector<ResultRow> rows;
    for (const auto& method : cmd.methods) {
        for (int shots : cmd.episode.shots) {
            rows.push_back(run_one(cmd, method, shots));
            std::cout << method << " " << shots << "-shot: acc=" << rows.back().accuracy_mean
                      << " +/- " << rows.back().accuracy_ci << " sk=" << rows.back().sk_mean
                      << " ho=" << rows.back().ho_mean << "\n";
        }
    }
    write_result_table(cmd.output, rows, eval_comments(cmd, "nohub eval"));
    return 0;
}

struct SweepCmd {
    EvalCmd eval;
    std::string param = "alpha";
    std::vector<double> grid;
    std::string method = "nohub";
};

int cmd_sweep(const SweepCmd& cmd) {
    require(cmd.param == "alpha" || cmd.param == "kappa" || cmd.param == "epsilon",
            "--param must be alpha, kappa, or epsilon");
    require(!cmd.grid.empty(), "--grid must not be empty");
    const EmbedMethod method = parse_method(cmd.method);
    require(method == EmbedMethod::NoHub || method == EmbedMethod::NoHubS,
            "--method must be nohub or nohub-s for sweeps");

    EvalCmd base = cmd.eval;
    base.methods = {cmd.method};
    validate_eval(base);

    std::vector<ResultRow> rows;
    for (double value : cmd.grid) {
        EvalCmd point = base;
        if (cmd.param == "alpha") point.flags.alpha = value;
        if (cmd.param == "kappa") point.flags.kappa = value;
        if (cmd.param == "epsilon") point.flags.epsilon = value;
        for (int shots : point.episode.shots) {
            ResultRow row = run_one(point, cmd.method, shots);
            row.sweep = std::make_pair(cmd.param, value);
            rows.push_back(row);
            std::cout << cmd.param << "=" << value << " " << shots
                      << "-shot: acc=" << row.accuracy_mean << " sk=" << row.sk_mean << "\n";
        }
    }
    write_result_table(cmd.eval.output, rows,
                       eval_comments(base, "nohub sweep param=" + cmd.param));
    return 0;
}

// ---------------------------------------------------------------------------
// hubness

struct HubnessCmd {
    std::string input;
    int k = 5;
    std::string metric = "cosine";
    int threshold = -1;  // -1: default 2k
    std::string output;
};

int cmd_hubness(const HubnessCmd& cmd) {
    require(cmd.k >= 1, "--k must be >= 1");
    require(cmd.metric == "cosine" || cmd.metric == "euclidean",
            "--metric must be cosine or euclidean");
    const FeatureFile file = read_features(cmd.input);
    require(cmd.k <= static_cast<int>(file.x.rows()) - 1, "--k must be <= n-1");

    const Metric metric =
        cmd.metric == "cosine" ? Metric::CosineDistance : Metric::Euclidean;
    const std::optional<int> threshold =
        cmd.threshold >= 0 ? std::optional<int>(cmd.threshold) : std::nullopt;
    const HubnessReport report = hubness_report(file.x, cmd.k, metric, threshold);
    const KOccurrence occ = k_occurrence(file.x, cmd.k, metric);

    std::cout << "n=" << report.n << " k=" << report.k << " metric=" << cmd.metric
              << " threshold=" << report.hub_threshold << "\n"
              << "skewness=" << format_double(report.skewness)
              << " hub_occurrence=" << format_double(report.hub_occurrence) << "\n";

    if (!cmd.output.empty()) {
        auto out = std::ofstream(cmd.output, std::ios::trunc);
        if (!out) throw IoError("cannot open '" + cmd.output + "' for writing");
        out << "# nohub hubness\n";
        out << "# " << join_comments({{"input", cmd.input},
                                      {"k", std::to_string(cmd.k)},
                                      {"metric", cmd.metric},
                                      {"threshold", std::to_string(report.hub_threshold)},
                                      {"skewness", format_double(report.skewness)},
                                      {"hub_occurrence", format_double(report.hub_occurrence)}})
            << "\n";
        out << "point,k_occurrence\n";
        for (std::size_t i = 0; i < occ.counts.size(); ++i)
            out << i << "," << occ.counts[i] << "\n";
        if (!out) throw IoError("write failed on '" + cmd.output + "'");
    }
    return 0;
}

void add_synth_flags(CLI::App* app, SynthParams& params, bool with_pool_shape) {
    if (with_pool_shape) {
        add_flag_env(app, "--classes", params.classes, "number of classes in the pool");
        add_flag_env(app, "--per-class", params.per_class, "rows per class");
    }
    add_flag_env(app, "--dim", params.dim, "feature dimensionality");
    add_flag_env(app, "--separation", params.separation, "class-mean radius on the sphere");
    add_flag_env(app, "--within-spread", params.within_spread, "within-class noise scale");
}

void add_episode_flags(CLI::App* app, EpisodeParams& params) {
    add_flag_env(app, "--ways", params.way, "classes per episode (K)");
    add_flag_env(app, "--queries", params.queries, "query rows per class (N_Q)");
    add_flag_env(app, "--shots", params.shots, "support shots per class, comma list")
        ->delimiter(',');
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"noHub hyperspherical embeddings for transductive few-shot episodes"};
    app.require_subcommand(1);

    SynthCmd synth;
    auto* synth_app = app.add_subcommand("synth", "generate a labeled synthetic feature pool");
    add_synth_flags(synth_app, synth.params, true);
    add_flag_env(synth_app, "--seed", synth.seed, "RNG seed");
    add_flag_env(synth_app, "-o,--output", synth.output, "output feature file (.csv or binary)")
        ->required();

    EmbedCmd embed_cmd;
    auto* embed_app = app.add_subcommand("embed", "embed a feature file with noHub / noHub-S");
    add_flag_env(embed_app, "-i,--input", embed_cmd.input, "input feature file")->required();
    add_flag_env(embed_app, "-o,--output", embed_cmd.output, "output embedding file")->required();
    add_flag_env(embed_app, "--trace", embed_cmd.trace, "per-iteration loss trace CSV");
    add_flag_env(embed_app, "--variant", embed_cmd.variant, "nohub or nohub-s");
    add_nohub_flags(embed_app, embed_cmd.flags);
    add_flag_env(embed_app, "--seed", embed_cmd.seed, "RNG seed (provenance)");
    embed_app->add_flag("--verify", embed_cmd.verify, "check unit row norms after embedding");

    EvalCmd eval;
    auto* eval_app = app.add_subcommand("eval", "benchmark embedding methods over episodes");
    add_flag_env(eval_app, "-i,--input", eval.input, "labeled pool file (omit to synthesize)");
    add_synth_flags(eval_app, eval.synth, false);
    add_episode_flags(eval_app, eval.episode);
    add_flag_env(eval_app, "--methods", eval.methods,
                 "comma list from none,l2,cl2,zn,nohub,nohub-s")
        ->delimiter(',');
    add_nohub_flags(eval_app, eval.flags);
    add_flag_env(eval_app, "--classifier", eval.classifier, "euclidean or cosine");
    add_flag_env(eval_app, "--episodes", eval.episodes, "episodes per (method, shots) cell");
    add_flag_env(eval_app, "--k-hubness", eval.k_hubness, "k for the hubness metrics");
    add_flag_env(eval_app, "--seed", eval.seed, "run seed");
    add_flag_env(eval_app, "--threads", eval.threads, "worker threads (0 = all cores)");
    add_flag_env(eval_app, "-o,--output", eval.output, "result table CSV")->required();

    SweepCmd sweep;
    auto* sweep_app = app.add_subcommand("sweep", "sweep alpha, kappa, or epsilon");
    add_flag_env(sweep_app, "-i,--input", sweep.eval.input, "labeled pool file (omit to synthesize)");
    add_synth_flags(sweep_app, sweep.eval.synth, false);
    add_episode_flags(sweep_app, sweep.eval.episode);
    add_flag_env(sweep_app, "--param", sweep.param, "alpha, kappa, or epsilon");
    add_flag_env(sweep_app, "--grid", sweep.grid, "comma list of parameter values")
        ->delimiter(',')
        ->check(CLI::Number)
        ->required();
    add_flag_env(sweep_app, "--method", sweep.method, "nohub or nohub-s");
    add_nohub_flags(sweep_app, sweep.eval.flags);
    add_flag_env(sweep_app, "--classifier", sweep.eval.classifier, "euclidean or cosine");
    add_flag_env(sweep_app, "--episodes", sweep.eval.episodes, "episodes per grid value");
    add_flag_env(sweep_app, "--k-hubness", sweep.eval.k_hubness, "k for the hubness metrics");
    add_flag_env(sweep_app, "--seed", sweep.eval.seed, "run seed");
    add_flag_env(sweep_app, "--threads", sweep.eval.threads, "worker threads (0 = all cores)");
    add_flag_env(sweep_app, "-o,--output", sweep.eval.output, "result table CSV")->required();

    HubnessCmd hubness;
    auto* hubness_app = app.add_subcommand("hubness", "k-occurrence diagnostics for a feature file");
    add_flag_env(hubness_app, "-i,--input", hubness.input, "feature or embedding file")->required();
    add_flag_env(hubness_app, "--k", hubness.k, "neighborhood size");
    add_flag_env(hubness_app, "--metric", hubness.metric, "cosine or euclidean");
    add_flag_env(hubness_app, "--threshold", hubness.threshold, "hub threshold (default 2k)");
    add_flag_env(hubness_app, "-o,--output", hubness.output, "per-point k-occurrence CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (synth_app->parsed()) return cmd_synth(synth);
        if (embed_app->parsed()) return cmd_embed(embed_cmd);
        if (eval_app->parsed()) return cmd_eval(eval);
        if (sweep_app->parsed()) return cmd_sweep(sweep);
        if (hubness_app->parsed()) return cmd_hubness(hubness);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return 0;
}
