#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <random>
#include <thread>

#include "malytics/corpus.hpp"
#include "malytics/elm.hpp"
#include "malytics/eval.hpp"
#include "malytics/featurizer.hpp"
#include "malytics/model_io.hpp"

using json = nlohmann::json;
using namespace malytics;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

unsigned worker_count() {
    unsigned n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("MALYTICS_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1 && static_cast<unsigned>(cap) < n) n = static_cast<unsigned>(cap);
    }
    return n;
}

// Runs fn(i) for i in [0, count) on the worker pool. Results are whatever
// fn stores by index, so output order stays input order.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
    const unsigned workers = std::min<std::size_t>(worker_count(), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

// Loads sample bytes, optionally extracting the dex payload. Falls back to
// the whole container when the archive has no dex entries.
std::vector<std::uint8_t> load_sample(const std::string& path, bool dex,
                                      bool* fallback = nullptr) {
    auto bytes = read_file(path);
    if (fallback) *fallback = false;
    if (!dex) return bytes;
    try {
        return extract_dex(bytes);
    } catch (const NoDexEntries&) {
        if (fallback) *fallback = true;
        return bytes;
    }
}

json metrics_to_json(const MetricsReport& r, bool include_roc) {
    json j;
    auto put = [&j](const char* k, const std::optional<double>& v) {
        if (v) j[k] = *v;
    };
    put("recall", r.recall);
    put("fnr", r.fnr);
    put("precision", r.precision);
    put("f1", r.f1);
    put("accuracy", r.accuracy);
    put("fpr", r.fpr);
    put("auc", r.auc);
    if (!r.undefined.empty()) j["undefined"] = r.undefined;
    if (include_roc) {
        json roc = json::array();
        for (const auto& [fpr, tpr] : r.roc_points) roc.push_back({fpr, tpr});
        j["roc_points"] = roc;
    }
    return j;
}

json aggregate_to_json(const MetricAggregate& a) {
    json j;
    if (a.mean) j["mean"] = *a.mean;
    if (a.stddev) j["std"] = *a.stddev;
    return j;
}

struct HashFlags {
    NgramConfig config;
    bool dex = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--ngram", config.n, "n-gram order in bytes")
            ->check(CLI::Range(1, 3))
            ->capture_default_str();
        cmd->add_option("--hash-size", config.hash_size, "feature vector size")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd->add_option("--seed", config.seed, "projection seed")->capture_default_str();
        cmd->add_flag("--sparse", config.sparse, "use the sparse +-1/0 projection");
        cmd->add_option("--density", config.density, "nonzero fraction per sparse row")
            ->capture_default_str();
        cmd->add_flag("--dex", dex, "extract classes*.dex from app containers first");
    }
};

int cmd_hash(const std::vector<std::string>& files, const HashFlags& flags) {
    flags.config.validate();
    const auto proj = ProjectionMatrix::build(flags.config);

    std::vector<json> lines(files.size());
    std::atomic<std::size_t> failures{0};
    parallel_for(files.size(), [&](std::size_t i) {
        json j;
        j["path"] = files[i];
        try {
            bool fallback = false;
            const auto bytes = load_sample(files[i], flags.dex, &fallback);
            const auto fv = featurize(bytes, flags.config, proj);
            j["degenerate"] = fv.degenerate;
            if (fallback) j["dex_fallback"] = true;
            j["values"] = fv.values;
        } catch (const std::exception& e) {
            j["error"] = e.what();
            failures.fetch_add(1);
        }
        lines[i] = std::move(j);
    });
    for (const auto& j : lines) std::cout << j.dump() << "\n";
    return (failures.load() == files.size() && !files.empty()) ? kExitData : 0;
}

struct TrainFlags {
    HashFlags hash;
    double gamma = 1.0;
    double c = 200.0;
    std::size_t subsample = 0;  // 0 = no subsampling
    std::uint64_t train_seed = 0;
};

std::pair<std::vector<FeatureVector>, std::vector<Label>> featurize_corpus(
    const LabeledCorpus& corpus, const NgramConfig& config, const ProjectionMatrix& proj,
    bool dex) {
    std::vector<FeatureVector> features(corpus.records.size());
    std::vector<Label> labels(corpus.records.size());
    std::vector<std::string> errors(corpus.records.size());
    parallel_for(corpus.records.size(), [&](std::size_t i) {
        try {
            const auto bytes = load_sample(corpus.records[i].path, dex);
            features[i] = featurize(bytes, config, proj);
            labels[i] = corpus.records[i].label;
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty())
            throw std::runtime_error(corpus.records[i].path + ": " + errors[i]);
    return {std::move(features), std::move(labels)};
}

int cmd_train(const std::string& manifest, const std::string& output,
              const TrainFlags& flags) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto corpus = load_manifest(manifest);
    flags.hash.config.validate();
    const auto proj = ProjectionMatrix::build(flags.hash.config);
    auto [features, labels] = featurize_corpus(corpus, flags.hash.config, proj, flags.hash.dex);

    const KernelParams params{flags.gamma};
    const TrainedModel model =
        flags.subsample > 0
            ? train_subsampled(features, labels, params, flags.c, flags.subsample,
                               flags.train_seed, flags.hash.config)
            : train(features, labels, params, flags.c, flags.hash.config);
    save_model(model, output);

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json summary;
    summary["samples"] = features.size();
    summary["support"] = model.support.size();
    summary["gamma"] = flags.gamma;
    summary["c"] = flags.c;
    summary["solve_residual"] = model.meta.solve_residual;
    summary["model"] = output;
    summary["wall_time_seconds"] = secs;
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_predict(const std::string& model_path, const std::vector<std::string>& files,
                bool dex, const std::optional<int>& ngram,
                const std::optional<int>& hash_size,
                const std::optional<std::uint64_t>& seed) {
    const TrainedModel model = load_model(model_path);
    // The config embedded in the model wins; conflicting flags are an error.
    if ((ngram && *ngram != model.featurizer_config.n) ||
        (hash_size && *hash_size != model.featurizer_config.hash_size) ||
        (seed && *seed != model.featurizer_config.seed))
        throw std::runtime_error(
            "hash flags conflict with the configuration stored in the model");

    const auto proj = ProjectionMatrix::build(model.featurizer_config);
    std::vector<json> lines(files.size());
    std::atomic<std::size_t> failures{0};
    parallel_for(files.size(), [&](std::size_t i) {
        json j;
        j["path"] = files[i];
        try {
            bool fallback = false;
            const auto bytes = load_sample(files[i], dex, &fallback);
            const auto fv = featurize(bytes, model.featurizer_config, proj);
            const Scores s = predict_scores(model, fv);
            j["label"] = to_string(classify(s));
            j["malware_score"] = s.malware_score;
            j["benign_score"] = s.benign_score;
            j["margin"] = s.margin();
            if (fv.degenerate) j["degenerate"] = true;
            if (fallback) j["dex_fallback"] = true;
        } catch (const std::exception& e) {
            j["error"] = e.what();
            failures.fetch_add(1);
        }
        lines[i] = std::move(j);
    });
    for (const auto& j : lines) std::cout << j.dump() << "\n";
    return (failures.load() == files.size() && !files.empty()) ? kExitData : 0;
}

int cmd_eval(const std::string& model_path, const std::string& manifest, bool dex) {
    const TrainedModel model = load_model(model_path);
    const auto corpus = load_manifest(manifest);
    const auto proj = ProjectionMatrix::build(model.featurizer_config);
    auto [features, labels] = featurize_corpus(corpus, model.featurizer_config, proj, dex);

    std::vector<Label> predicted;
    std::vector<double> margins;
    for (const auto& fv : features) {
        const Scores s = predict_scores(model, fv);
        predicted.push_back(classify(s));
        margins.push_back(s.margin());
    }
    const auto report = metrics(confusion(labels, predicted), margins, labels);
    std::cout << metrics_to_json(report, true).dump() << "\n";
    return 0;
}

struct CvFlags {
    TrainFlags train;
    int folds = 5;
    std::uint64_t split_seed = 0;
    double mbr = 0.0;  // 0 = no subsampling
    std::vector<std::string> holdout_families;
};

int cmd_cv(const std::string& manifest, const CvFlags& flags) {
    auto corpus = load_manifest(manifest);
    flags.train.hash.config.validate();
    const auto proj = ProjectionMatrix::build(flags.train.hash.config);
    auto [features, labels] =
        featurize_corpus(corpus, flags.train.hash.config, proj, flags.train.hash.dex);
    std::vector<std::string> families;
    for (const auto& r : corpus.records) families.push_back(r.family);

    if (flags.mbr > 0.0) {
        const auto kept = mbr_subsample(labels, flags.mbr, flags.split_seed);
        std::vector<FeatureVector> f2;
        std::vector<Label> l2;
        std::vector<std::string> fam2;
        for (auto i : kept) {
            f2.push_back(std::move(features[i]));
            l2.push_back(labels[i]);
            fam2.push_back(families[i]);
        }
        features = std::move(f2);
        labels = std::move(l2);
        families = std::move(fam2);
    }

    SplitPlan plan;
    if (!flags.holdout_families.empty()) {
        std::set<std::string> held(flags.holdout_families.begin(),
                                   flags.holdout_families.end());
        try {
            plan = family_holdout(labels, families, held, flags.split_seed);
        } catch (const std::invalid_argument& e) {
            std::set<std::string> known;
            for (std::size_t i = 0; i < labels.size(); ++i)
                if (labels[i] == Label::Malware && !families[i].empty())
                    known.insert(families[i]);
            std::string msg = e.what();
            msg += "; known families:";
            for (const auto& f : known) msg += " " + f;
            throw std::runtime_error(msg);
        }
    } else {
        plan = kfold_split(labels, flags.folds, flags.split_seed);
    }

    CvOptions options;
    options.kernel.gamma = flags.train.gamma;
    options.c = flags.train.c;
    if (flags.train.subsample > 0) options.subsample = flags.train.subsample;
    options.seed = flags.train.train_seed;
    options.config = flags.train.hash.config;
    const CvResult result = run_cv(features, labels, plan, options);

    json j;
    j["folds"] = json::array();
    for (const auto& fold : result.per_fold)
        j["folds"].push_back(metrics_to_json(fold, false));
    j["aggregate"]["recall"] = aggregate_to_json(result.recall);
    j["aggregate"]["precision"] = aggregate_to_json(result.precision);
    j["aggregate"]["f1"] = aggregate_to_json(result.f1);
    j["aggregate"]["accuracy"] = aggregate_to_json(result.accuracy);
    j["aggregate"]["auc"] = aggregate_to_json(result.auc);
    if (result.pooled_fpr) j["aggregate"]["pooled_fpr"] = *result.pooled_fpr;
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_bench(std::size_t size_mb, std::uint64_t seed) {
    NgramConfig config;  // defaults: n=2, hash 1024, dense
    config.seed = seed;
    const auto proj = ProjectionMatrix::build(config);

    std::vector<std::uint8_t> buffer(size_mb << 20);
    std::mt19937_64 rng(seed);
    for (auto& b : buffer) b = static_cast<std::uint8_t>(rng());

    const auto t0 = std::chrono::steady_clock::now();
    const auto fv = featurize(buffer, config, proj);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    json j;
    j["bytes"] = buffer.size();
    j["seconds"] = secs;
    j["mb_per_second"] = static_cast<double>(buffer.size()) / (1024.0 * 1024.0) / secs;
    j["degenerate"] = fv.degenerate;
    std::cout << j.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Malytics: byte n-gram tf-simhashing with a kernel ELM classifier"};
    app.require_subcommand(1);

    // hash
    auto* hash_cmd = app.add_subcommand("hash", "Print feature vectors as JSON lines");
    std::vector<std::string> hash_files;
    hash_cmd->add_option("files", hash_files, "input files")->required();
    HashFlags hash_flags;
    hash_flags.attach(hash_cmd);

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a model from a manifest");
    std::string train_manifest, train_output;
    train_cmd->add_option("manifest", train_manifest, "labeled manifest CSV")->required();
    train_cmd->add_option("-o,--output", train_output, "model file to write")->required();
    TrainFlags train_flags;
    train_flags.hash.attach(train_cmd);
    train_cmd->add_option("--gamma", train_flags.gamma, "RBF spread")->capture_default_str();
    train_cmd->add_option("--c", train_flags.c, "regularization trade-off C")
        ->capture_default_str();
    train_cmd->add_option("--subsample", train_flags.subsample,
                          "train on l randomly selected samples");
    train_cmd->add_option("--train-seed", train_flags.train_seed, "subsample seed")
        ->capture_default_str();

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "Classify files with a model");
    std::string predict_model;
    std::vector<std::string> predict_files;
    bool predict_dex = false;
    std::optional<int> predict_ngram, predict_hash_size;
    std::optional<std::uint64_t> predict_seed;
    predict_cmd->add_option("model", predict_model, "model file")->required();
    predict_cmd->add_option("files", predict_files, "input files")->required();
    predict_cmd->add_flag("--dex", predict_dex, "extract classes*.dex first");
    predict_cmd->add_option("--ngram", predict_ngram,
                            "must match the model configuration if given");
    predict_cmd->add_option("--hash-size", predict_hash_size,
                            "must match the model configuration if given");
    predict_cmd->add_option("--seed", predict_seed,
                            "must match the model configuration if given");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model against a manifest");
    std::string eval_model, eval_manifest;
    bool eval_dex = false;
    eval_cmd->add_option("model", eval_model, "model file")->required();
    eval_cmd->add_option("manifest", eval_manifest, "labeled manifest CSV")->required();
    eval_cmd->add_flag("--dex", eval_dex, "extract classes*.dex first");

    // cv
    auto* cv_cmd = app.add_subcommand("cv", "Cross-validate over a manifest");
    std::string cv_manifest;
    CvFlags cv_flags;
    cv_cmd->add_option("manifest", cv_manifest, "labeled manifest CSV")->required();
    cv_flags.train.hash.attach(cv_cmd);
    cv_cmd->add_option("--gamma", cv_flags.train.gamma, "RBF spread")->capture_default_str();
    cv_cmd->add_option("--c", cv_flags.train.c, "regularization trade-off C")
        ->capture_default_str();
    cv_cmd->add_option("--subsample", cv_flags.train.subsample,
                       "per-fold random kernel subsampling size");
    cv_cmd->add_option("--train-seed", cv_flags.train.train_seed, "subsample seed");
    cv_cmd->add_option("--folds", cv_flags.folds, "number of folds")->capture_default_str();
    cv_cmd->add_option("--split-seed", cv_flags.split_seed, "split shuffle seed")
        ->capture_default_str();
    cv_cmd->add_option("--mbr", cv_flags.mbr,
                       "malware-to-benign ratio subsampling before splitting");
    cv_cmd->add_option("--holdout-families", cv_flags.holdout_families,
                       "family-exclusion test: comma-separated family names")
        ->delimiter(',');

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "Measure hashing throughput");
    std::size_t bench_mb = 32;
    std::uint64_t bench_seed = 0;
    bench_cmd->add_option("--size-mb", bench_mb, "buffer size in MiB")
        ->capture_default_str();
    bench_cmd->add_option("--seed", bench_seed, "data/projection seed")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (hash_cmd->parsed()) return cmd_hash(hash_files, hash_flags);
        if (train_cmd->parsed()) return cmd_train(train_manifest, train_output, train_flags);
        if (predict_cmd->parsed())
            return cmd_predict(predict_model, predict_files, predict_dex, predict_ngram,
                               predict_hash_size, predict_seed);
        if (eval_cmd->parsed()) return cmd_eval(eval_model, eval_manifest, eval_dex);
        if (cv_cmd->parsed()) return cmd_cv(cv_manifest, cv_flags);
        if (bench_cmd->parsed()) return cmd_bench(bench_mb, bench_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
