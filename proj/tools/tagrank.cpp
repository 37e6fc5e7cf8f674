// tagrank: prepare a corpus, train per-user tag rankers, evaluate and inspect them.
//
// Every subcommand takes an optional JSON config file (--config); flags override its values, and
// the resolved settings are written next to the outputs as <subcommand>.config.json.

#include <tagrank/pipeline.hpp>
#include <tagrank/synthgen.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace tagrank;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_data = 2;
constexpr int exit_internal = 3;

struct Settings {
    std::string work = "work";
    std::uint64_t seed = 1;
    unsigned threads = 0;

    std::string corpus;
    std::size_t min_occurrences = 50;
    std::size_t min_user_images = 6;

    std::size_t m = 50;
    bool exclude_same_user = false;
    double C = 0.01;
    std::size_t epochs = 20;
    std::string mode = "combined";
    std::vector<std::string> n_tags{"inf"};
    bool all_pairs = false;
    bool full_vocabulary_negatives = false;

    std::size_t embedding_dim = 100;
    std::size_t window = 5;
    std::size_t negatives = 5;
    std::size_t embedding_epochs = 5;
    double learning_rate = 0.025;

    std::size_t k = 10;
    std::vector<std::string> methods{"ranker", "ptrerank", "candidates_only"};
    std::string reference = "ptrerank";
    bool welch = false;
    double threshold = 0.8;
    std::size_t min_cooccur = 2;
    std::uint64_t ablation_seed = 1;

    std::string image;
    std::string output;

    std::size_t users = 20;
    std::size_t images_per_user = 40;
    std::size_t vocab_size = 300;
    std::size_t feature_dim = 32;
    std::size_t tags_per_image = 8;
    std::size_t latent_dim = 8;
    double sigma = 0.0;
    std::size_t pool_size = 0;
};

/// One setting: its JSON key, its flag, and how to copy it between Settings objects.
struct Field {
    std::string key;
    std::function<void(nlohmann::json&, const Settings&)> to_json;
    std::function<void(Settings&, const nlohmann::json&)> from_json;
    std::function<CLI::Option*(CLI::App&, Settings&, const std::string&)> add_flag;
    std::function<void(Settings&, const Settings&)> copy;
};

template<typename T>
Field field(std::string key, T Settings::*member) {
    Field f;
    f.key = key;
    f.to_json = [key, member](nlohmann::json& j, const Settings& s) { j[key] = s.*member; };
    f.from_json = [key, member](Settings& s, const nlohmann::json& value) {
        try {
            s.*member = value.get<T>();
        } catch (const nlohmann::json::exception&) {
            throw UsageError("config key '" + key + "' has the wrong type");
        }
    };
    f.add_flag = [key, member](CLI::App& app, Settings& flags, const std::string& help) {
        std::string name = "--" + key;
        std::replace(name.begin(), name.end(), '_', '-');
        if constexpr (std::is_same_v<T, bool>) {
            return app.add_flag(name, flags.*member, help);
        } else {
            return app.add_option(name, flags.*member, help);
        }
    };
    f.copy = [member](Settings& to, const Settings& from) { to.*member = from.*member; };
    return f;
}

/// n_tags entries may be written as numbers or as "inf" in the config file.
Field n_tags_field() {
    Field f = field("n_tags", &Settings::n_tags);
    f.from_json = [](Settings& s, const nlohmann::json& value) {
        if (!value.is_array()) {
            throw UsageError("config key 'n_tags' must be an array");
        }
        s.n_tags.clear();
        for (const auto& v : value) {
            if (v.is_number_unsigned()) {
                s.n_tags.push_back(std::to_string(v.get<std::size_t>()));
            } else if (v.is_string()) {
                s.n_tags.push_back(v.get<std::string>());
            } else {
                throw UsageError("config key 'n_tags' holds positive integers or \"inf\"");
            }
        }
    };
    return f;
}

const std::map<std::string, Field>& all_fields() {
    static const std::map<std::string, Field> fields = [] {
        std::vector<Field> list{
            field("work", &Settings::work),
            field("seed", &Settings::seed),
            field("threads", &Settings::threads),
            field("corpus", &Settings::corpus),
            field("min_occurrences", &Settings::min_occurrences),
            field("min_user_images", &Settings::min_user_images),
            field("m", &Settings::m),
            field("exclude_same_user", &Settings::exclude_same_user),
            field("C", &Settings::C),
            field("epochs", &Settings::epochs),
            field("mode", &Settings::mode),
            n_tags_field(),
            field("all_pairs", &Settings::all_pairs),
            field("full_vocabulary_negatives", &Settings::full_vocabulary_negatives),
            field("embedding_dim", &Settings::embedding_dim),
            field("window", &Settings::window),
            field("negatives", &Settings::negatives),
            field("embedding_epochs", &Settings::embedding_epochs),
            field("learning_rate", &Settings::learning_rate),
            field("k", &Settings::k),
            field("methods", &Settings::methods),
            field("reference", &Settings::reference),
            field("welch", &Settings::welch),
            field("threshold", &Settings::threshold),
            field("min_cooccur", &Settings::min_cooccur),
            field("ablation_seed", &Settings::ablation_seed),
            field("image", &Settings::image),
            field("output", &Settings::output),
            field("users", &Settings::users),
            field("images_per_user", &Settings::images_per_user),
            field("vocab_size", &Settings::vocab_size),
            field("feature_dim", &Settings::feature_dim),
            field("tags_per_image", &Settings::tags_per_image),
            field("latent_dim", &Settings::latent_dim),
            field("sigma", &Settings::sigma),
            field("pool_size", &Settings::pool_size),
        };
        std::map<std::string, Field> out;
        for (auto& f : list) {
            out.emplace(f.key, std::move(f));
        }
        return out;
    }();
    return fields;
}

const std::map<std::string, std::string> help_text{
    {"work", "Artifact directory"},
    {"seed", "Seed for the split, embeddings and solver"},
    {"threads", "Worker threads (0: all cores)"},
    {"corpus", "Raw records, one JSON object per line"},
    {"min_occurrences", "Drop tags used fewer times"},
    {"min_user_images", "Drop users with fewer images"},
    {"m", "Visual neighbors per query"},
    {"exclude_same_user", "Keep the user's own images out of the neighborhood"},
    {"C", "Hinge loss weight"},
    {"epochs", "Solver passes over the pairs"},
    {"mode", "supervised_only, semi_only or combined"},
    {"n_tags", "Augmented order lengths to train (integers or inf)"},
    {"all_pairs", "Raw pairwise constraints instead of relevance levels"},
    {"full_vocabulary_negatives", "Prefer listed tags over every unlisted tag"},
    {"embedding_dim", "Tag embedding dimension"},
    {"window", "Skip-gram window"},
    {"negatives", "Negative samples per context"},
    {"embedding_epochs", "Embedding training epochs"},
    {"learning_rate", "Initial embedding learning rate"},
    {"k", "Cutoff for DCG@k"},
    {"methods", "ranker, ptrerank, candidates_only, random_user"},
    {"reference", "Method the others are tested against"},
    {"welch", "Unpaired Welch test instead of the paired test"},
    {"threshold", "Order strength needed for a re-ranking constraint"},
    {"min_cooccur", "Co-occurrences needed for a re-ranking constraint"},
    {"ablation_seed", "Seed for the random-user reassignment"},
    {"image", "Image id to inspect"},
    {"output", "Output file (default: stdout or the work directory)"},
    {"users", "Synthetic users"},
    {"images_per_user", "Synthetic images per user"},
    {"vocab_size", "Synthetic vocabulary size"},
    {"feature_dim", "Synthetic visual feature dimension"},
    {"tags_per_image", "Tags listed per synthetic image"},
    {"latent_dim", "Latent dimension of tags and users"},
    {"sigma", "Noise on the listing scores"},
    {"pool_size", "Tags visible per synthetic image (0: all)"},
};

class Command {
public:
    Command(CLI::App& parent, std::string name, std::string description, std::vector<std::string> keys) : name_(std::move(name)), keys_(std::move(keys)) {
        app_ = parent.add_subcommand(name_, std::move(description));
        app_->add_option("--config", config_path_, "JSON file with settings; flags override it");
        for (const auto& key : keys_) {
            const auto& f = all_fields().at(key);
            options_.emplace_back(&f, f.add_flag(*app_, flags_, help_text.at(key)));
        }
    }

    bool parsed() const { return app_->parsed(); }
    const std::string& name() const { return name_; }

    /// Defaults, then the config file, then explicit flags.
    Settings resolve() const {
        Settings s;
        if (!config_path_.empty()) {
            std::ifstream in(config_path_);
            if (!in) {
                throw UsageError("cannot open config file '" + config_path_ + "'");
            }
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(in);
            } catch (const nlohmann::json::parse_error& e) {
                throw UsageError("config file '" + config_path_ + "' is not valid JSON (" + e.what() + ")");
            }
            if (!doc.is_object()) {
                throw UsageError("config file must hold a JSON object");
            }
            for (const auto& [key, value] : doc.items()) {
                auto it = all_fields().find(key);
                if (it == all_fields().end()) {
                    throw UsageError("unknown config key '" + key + "'");
                }
                it->second.from_json(s, value);
            }
        }
        for (const auto& [f, option] : options_) {
            if (option->count() > 0) {
                f->copy(s, flags_);
            }
        }
        return s;
    }

    /// The resolved settings this command reads, as JSON.
    nlohmann::json resolved_json(const Settings& s) const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& key : keys_) {
            all_fields().at(key).to_json(j, s);
        }
        return j;
    }

private:
    std::string name_;
    std::vector<std::string> keys_;
    CLI::App* app_ = nullptr;
    std::string config_path_;
    Settings flags_;
    std::vector<std::pair<const Field*, CLI::Option*>> options_;
};

// ---------------------------------------------------------------------------------------------
// Artifacts

fs::path artifact(const Settings& s, const std::string& name) { return fs::path(s.work) / name; }

std::ifstream open_artifact(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("missing artifact '" + path.string() + "'; run the earlier steps first");
    }
    return in;
}

std::ofstream create(const fs::path& path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    return out;
}

void write_resolved(const Command& command, const Settings& s, const fs::path& directory) {
    auto out = create(directory / (command.name() + ".config.json"));
    out << command.resolved_json(s).dump(2) << '\n';
}

std::string models_file(const std::string& n_tags) { return "models_n" + n_tags + ".txt"; }

std::vector<std::optional<std::size_t>> parse_n_tags(const std::vector<std::string>& values) {
    if (values.empty()) {
        throw UsageError("n_tags needs at least one value");
    }
    std::vector<std::optional<std::size_t>> out;
    for (const auto& v : values) {
        if (v == "inf") {
            out.emplace_back();
            continue;
        }
        std::size_t pos = 0;
        unsigned long long n = 0;
        try {
            n = std::stoull(v, &pos);
        } catch (const std::logic_error&) {
            pos = 0;
        }
        if (pos != v.size() || n < 1) {
            throw UsageError("n_tags value '" + v + "' is neither a positive integer nor inf");
        }
        out.emplace_back(static_cast<std::size_t>(n));
    }
    return out;
}

PipelineConfig pipeline_config(const Settings& s) {
    PipelineConfig config;
    config.seed = s.seed;
    config.candidates.m = s.m;
    config.candidates.exclude_same_user = s.exclude_same_user;
    config.solver.C = s.C;
    config.solver.epochs = s.epochs;
    config.solver.seed = s.seed;
    config.embedding.dim = s.embedding_dim;
    config.embedding.window = s.window;
    config.embedding.negatives = s.negatives;
    config.embedding.epochs = s.embedding_epochs;
    config.embedding.initial_lr = s.learning_rate;
    config.embedding.seed = s.seed;
    config.rerank.threshold = s.threshold;
    config.rerank.min_cooccur = s.min_cooccur;
    config.mode = parse_mode(s.mode);
    config.all_pairs = s.all_pairs;
    config.full_vocabulary_negatives = s.full_vocabulary_negatives;
    config.k = s.k;
    config.welch = s.welch;
    config.threads = s.threads;
    if (s.m < 1) {
        throw UsageError("m must be >= 1");
    }
    if (s.k < 1) {
        throw UsageError("k must be >= 1");
    }
    if (!(s.C > 0.0)) {
        throw UsageError("C must be > 0");
    }
    if (!(s.threshold > 0.5 && s.threshold <= 1.0)) {
        throw UsageError("threshold must be in (0.5, 1]");
    }
    return config;
}

/// The prepared corpus and split. The prepared corpus is already filtered, so it is loaded as is.
struct Prepared {
    Corpus corpus;
    Split split;
};

Prepared load_prepared(const Settings& s) {
    Prepared p;
    auto corpus_in = open_artifact(artifact(s, "corpus.jsonl"));
    p.corpus = load_corpus(corpus_in, 1, 1);
    auto split_in = open_artifact(artifact(s, "split.txt"));
    p.split = read_split(split_in, p.corpus.sessions.size());
    return p;
}

ModelSet load_model_set(const Settings& s, const Corpus& corpus, std::optional<std::size_t> n_tags, PairMode mode) {
    auto in = open_artifact(artifact(s, models_file(n_tags_name(n_tags))));
    ModelSet set;
    set.n_tags = n_tags;
    set.mode = mode;
    set.models.resize(corpus.users.size());
    for (auto& model : load_models(in)) {
        const auto user = corpus.user_index(model.user_id);
        set.models[user] = std::move(model);
    }
    for (std::size_t u = 0; u < corpus.users.size(); ++u) {
        if (!set.models[u]) {
            set.skipped.push_back(corpus.users[u].id);
        }
    }
    return set;
}

void load_embeddings_into(Experiment& ex, const Settings& s) {
    auto in = open_artifact(artifact(s, "embeddings.txt"));
    ex.set_embeddings(load_embeddings(in, ex.corpus().vocabulary));
}

// ---------------------------------------------------------------------------------------------
// Subcommands

int cmd_prepare(const Command& command, const Settings& s) {
    if (s.corpus.empty()) {
        throw UsageError("prepare needs --corpus");
    }
    if (s.min_occurrences < 1 || s.min_user_images < 2) {
        throw UsageError("min_occurrences must be >= 1 and min_user_images >= 2");
    }
    const auto corpus = load_corpus(s.corpus, s.min_occurrences, s.min_user_images);
    if (corpus.sessions.empty()) {
        throw DataError("no images survive filtering (min_occurrences " + std::to_string(s.min_occurrences) + ", min_user_images " +
                        std::to_string(s.min_user_images) + ")");
    }
    const auto split = split_corpus(corpus, s.seed);

    auto corpus_out = create(artifact(s, "corpus.jsonl"));
    write_corpus(corpus_out, corpus);
    auto split_out = create(artifact(s, "split.txt"));
    write_split(split_out, split, corpus.sessions.size());
    auto vocab_out = create(artifact(s, "vocabulary.csv"));
    vocab_out << "id,tag\n";
    for (std::size_t t = 0; t < corpus.vocabulary.size(); ++t) {
        vocab_out << t << ',' << csv_field(corpus.vocabulary.name(static_cast<TagId>(t))) << '\n';
    }
    write_resolved(command, s, s.work);

    std::cout << "images " << corpus.sessions.size() << ", users " << corpus.users.size() << ", tags " << corpus.vocabulary.size() << ", train "
              << split.train.size() << ", test " << split.test.size() << '\n';
    return exit_ok;
}

int cmd_train(const Command& command, const Settings& s) {
    const auto config = pipeline_config(s);
    const auto sweep = parse_n_tags(s.n_tags);
    auto prepared = load_prepared(s);
    Experiment ex(prepared.corpus, prepared.split, config);
    ex.train_embeddings();
    {
        auto out = create(artifact(s, "embeddings.txt"));
        save_embeddings(out, ex.embeddings(), prepared.corpus.vocabulary);
    }

    auto skipped_out = create(artifact(s, "skipped.csv"));
    skipped_out << "n_tags,user_id\n";
    for (const auto& n : sweep) {
        const auto models = ex.train_models(n);
        auto out = create(artifact(s, models_file(n_tags_name(n))));
        for (const auto& model : models.models) {
            if (model) {
                save_model(out, *model);
            }
        }
        for (const auto& user : models.skipped) {
            std::cerr << "warning: user '" << user << "' has no training pairs for n_tags=" << n_tags_name(n) << "; skipped\n";
            skipped_out << n_tags_name(n) << ',' << csv_field(user) << '\n';
        }
        std::cout << "n_tags " << n_tags_name(n) << ": " << models.modeled_users().size() << " models, " << models.skipped.size() << " skipped\n";
    }
    write_resolved(command, s, s.work);
    return exit_ok;
}

void print_summary(const std::vector<ReportRow>& rows) {
    std::printf("%-40s %8s %12s %12s %12s\n", "config", "images", "dcg@k/image", "dcg@k/user", "p");
    for (const auto& row : rows) {
        std::string p = "-";
        if (row.versus_reference) {
            char buffer[32];
            std::snprintf(buffer, sizeof(buffer), "%.3g", row.versus_reference->p_value);
            p = buffer;
        }
        std::printf("%-40s %8zu %12.4f %12.4f %12s\n", row.report.label.c_str(), row.report.per_image.size(), row.report.dcg_at_k.per_image_mean,
                    row.report.dcg_at_k.per_user_mean, p.c_str());
    }
}

std::vector<ReportRow> evaluate_rows(const Settings& s, bool ablation) {
    const auto config = pipeline_config(s);
    const auto sweep = parse_n_tags(s.n_tags);
    std::vector<Method> methods;
    if (ablation) {
        methods = {Method::ranker, Method::random_user};
    } else {
        if (s.methods.empty()) {
            throw UsageError("methods needs at least one value");
        }
        for (const auto& name : s.methods) {
            methods.push_back(parse_method(name));
        }
    }
    const Method reference = ablation ? Method::ranker : parse_method(s.reference);
    auto uses_models = [](Method m) { return m == Method::ranker || m == Method::random_user; };
    const bool need_models = std::any_of(methods.begin(), methods.end(), uses_models) || uses_models(reference);

    auto prepared = load_prepared(s);
    Experiment ex(prepared.corpus, prepared.split, config);
    std::vector<ModelSet> model_sets;
    if (need_models) {
        load_embeddings_into(ex, s);
        for (const auto& n : sweep) {
            model_sets.push_back(load_model_set(s, prepared.corpus, n, config.mode));
        }
    }

    // Model-free methods have one row; model methods one row per n_tags.
    std::map<std::pair<Method, std::size_t>, EvalReport> reports;
    auto report_for = [&](Method m, std::size_t slot) -> const EvalReport& {
        const auto key = std::make_pair(m, uses_models(m) ? slot : 0);
        auto it = reports.find(key);
        if (it == reports.end()) {
            const ModelSet* models = uses_models(m) ? &model_sets[slot] : nullptr;
            it = reports.emplace(key, ex.evaluate(m, models, s.ablation_seed)).first;
        }
        return it->second;
    };

    std::vector<ReportRow> rows;
    for (auto m : methods) {
        const std::size_t slots = uses_models(m) ? sweep.size() : 1;
        for (std::size_t slot = 0; slot < slots; ++slot) {
            ReportRow row;
            row.report = report_for(m, slot);
            row.n_tags = uses_models(m) ? n_tags_name(sweep[slot]) : "inf";
            if (m != reference) {
                row.versus_reference = ex.compare(row.report, report_for(reference, slot));
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

int cmd_evaluate(const Command& command, const Settings& s, bool ablation) {
    const auto rows = evaluate_rows(s, ablation);
    const fs::path target = s.output.empty() ? artifact(s, ablation ? "ablation.csv" : "report.csv") : fs::path(s.output);
    auto out = create(target);
    write_report_csv(out, rows);
    write_resolved(command, s, target.has_parent_path() ? target.parent_path() : fs::path("."));
    print_summary(rows);
    return exit_ok;
}

int cmd_dump_candidates(const Command& command, const Settings& s) {
    (void)command;
    if (s.image.empty()) {
        throw UsageError("dump-candidates needs --image");
    }
    const auto config = pipeline_config(s);
    auto prepared = load_prepared(s);
    const auto& corpus = prepared.corpus;
    auto it = std::find_if(corpus.sessions.begin(), corpus.sessions.end(), [&](const Session& x) { return x.image_id == s.image; });
    if (it == corpus.sessions.end()) {
        throw DataError("unknown image '" + s.image + "'");
    }
    const auto id = static_cast<SessionId>(it - corpus.sessions.begin());
    const bool in_train = std::binary_search(prepared.split.train.begin(), prepared.split.train.end(), id);
    const auto stats = compute_candidate_stats(corpus, prepared.split);
    const auto index = build_index(corpus, prepared.split.train);
    // Training images get the list used for training: own tags removed and the image kept out of its neighborhood.
    const auto list = build_candidates(*it, it->user, corpus, index, stats, config.candidates, in_train,
                                       in_train ? std::optional<SessionId>(id) : std::nullopt);
    if (s.output.empty()) {
        write_candidates_csv(std::cout, list, corpus.vocabulary);
    } else {
        auto out = create(s.output);
        write_candidates_csv(out, list, corpus.vocabulary);
    }
    return exit_ok;
}

int cmd_dump_stats(const Command& command, const Settings& s) {
    (void)command;
    auto prepared = load_prepared(s);
    const auto stats = compute_global_stats(select_sessions(prepared.corpus, prepared.split.train), prepared.corpus.vocabulary.size());
    const fs::path target = s.output.empty() ? artifact(s, "stats.csv") : fs::path(s.output);
    auto out = create(target);
    write_stats_csv(out, prepared.corpus.vocabulary, stats);
    std::cout << "wrote " << target.string() << '\n';
    return exit_ok;
}

int cmd_synth(const Command& command, const Settings& s) {
    if (s.output.empty()) {
        throw UsageError("synth needs --output");
    }
    SynthSpec spec;
    spec.n_users = s.users;
    spec.images_per_user = s.images_per_user;
    spec.vocab_size = s.vocab_size;
    spec.feature_dim = s.feature_dim;
    spec.tags_per_image = s.tags_per_image;
    spec.latent_dim = s.latent_dim;
    spec.sigma = s.sigma;
    spec.pool_size = s.pool_size;
    spec.seed = s.seed;
    SynthData data;
    try {
        data = generate(spec);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const fs::path records_path(s.output);
    {
        auto out = create(records_path);
        write_records(out, data.records);
    }
    {
        auto out = create(records_path.string() + ".users.csv");
        write_latent_truth(out, data);
    }
    {
        auto out = create(records_path.string() + ".tags.csv");
        write_tag_latents(out, data);
    }
    write_resolved(command, s, records_path.has_parent_path() ? records_path.parent_path() : fs::path("."));
    std::cout << "wrote " << data.records.size() << " records to " << records_path.string() << '\n';
    return exit_ok;
}

}

int main(int argc, char** argv) {
    CLI::App app{"Personalized tag ranking: prepare, train, evaluate"};
    app.require_subcommand(1);

    const std::vector<std::string> common{"work", "seed", "threads"};
    auto with = [&](std::vector<std::string> keys) {
        keys.insert(keys.begin(), common.begin(), common.end());
        return keys;
    };
    const std::vector<std::string> model_keys{"m", "exclude_same_user", "C", "epochs", "mode", "n_tags", "all_pairs", "full_vocabulary_negatives",
                                              "embedding_dim", "window", "negatives", "embedding_epochs", "learning_rate"};
    auto join = [](std::vector<std::string> a, const std::vector<std::string>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };
    const std::vector<std::string> eval_keys{"k", "reference", "welch", "threshold", "min_cooccur", "ablation_seed", "output"};

    Command prepare(app, "prepare", "Filter a raw corpus and split it", with({"corpus", "min_occurrences", "min_user_images"}));
    Command train(app, "train", "Train tag embeddings and per-user models", with(model_keys));
    Command evaluate(app, "evaluate", "Score test images with each method", with(join(join(model_keys, eval_keys), {"methods"})));
    Command ablate(app, "ablate", "Compare each user's model with a random other user's", with(join(model_keys, eval_keys)));
    Command dump_candidates(app, "dump-candidates", "Print the candidate list of one image", with({"m", "exclude_same_user", "image", "output"}));
    Command dump_stats(app, "dump-stats", "Write per-tag training statistics", with({"output"}));
    Command synth(app, "synth", "Generate a synthetic corpus with planted preferences",
                  {"seed", "users", "images_per_user", "vocab_size", "feature_dim", "tags_per_image", "latent_dim", "sigma", "pool_size", "output"});

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? exit_ok : exit_usage;
    }

    try {
        if (prepare.parsed()) {
            return cmd_prepare(prepare, prepare.resolve());
        }
        if (train.parsed()) {
            return cmd_train(train, train.resolve());
        }
        if (evaluate.parsed()) {
            return cmd_evaluate(evaluate, evaluate.resolve(), false);
        }
        if (ablate.parsed()) {
            return cmd_evaluate(ablate, ablate.resolve(), true);
        }
        if (dump_candidates.parsed()) {
            return cmd_dump_candidates(dump_candidates, dump_candidates.resolve());
        }
        if (dump_stats.parsed()) {
            return cmd_dump_stats(dump_stats, dump_stats.resolve());
        }
        if (synth.parsed()) {
            return cmd_synth(synth, synth.resolve());
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_data;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_data;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return exit_internal;
    }
    return exit_usage;
}
