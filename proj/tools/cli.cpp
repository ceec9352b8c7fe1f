#include "dmgnet/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "dmgnet/json_io.hpp"
#include "dmgnet/scene_data.hpp"

namespace dmgnet {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

std::vector<std::uint64_t> RunConfig::members() const {
    return ensemble_seeds.empty() ? std::vector<std::uint64_t>{seed} : ensemble_seeds;
}

fs::path RunConfig::checkpoint_for(std::uint64_t member_seed) const {
    return output_dir / "checkpoints" / ("model_seed" + std::to_string(member_seed) + ".ckpt");
}

std::vector<fs::path> RunConfig::model_paths() const {
    if (!checkpoints.empty()) return checkpoints;
    std::vector<fs::path> out;
    for (auto m : members()) out.push_back(checkpoint_for(m));
    return out;
}

namespace {

template <typename T>
T field(const json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(key, "wrong type");
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

Aggregation parse_aggregation(const std::string& s) {
    if (s == "micro") return Aggregation::micro;
    if (s == "per_scene") return Aggregation::per_scene;
    throw ConfigError("aggregation", "expected micro or per_scene, got '" + s + "'");
}

std::string to_string(Aggregation a) { return a == Aggregation::micro ? "micro" : "per_scene"; }

}  // namespace

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ConfigError("<root>", "expected an object");
    static const std::set<std::string> known{"manifest", "output_dir", "checkpoints", "network",  "train",
                                             "decision", "resolutions", "folds",      "scheme",   "seed",
                                             "ensemble_seeds", "adapt_event", "shares", "aggregation"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw ConfigError(key, "unknown key");

    RunConfig c;
    if (j.contains("manifest")) c.manifest = resolve(base_dir, field<std::string>(j, "manifest"));
    c.output_dir = resolve(base_dir, j.contains("output_dir") ? field<std::string>(j, "output_dir") : "out");
    if (j.contains("checkpoints"))
        for (const auto& p : field<std::vector<std::string>>(j, "checkpoints")) c.checkpoints.push_back(resolve(base_dir, p));
    if (j.contains("network")) c.network = network_config_from_json(j.at("network"));
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    if (j.contains("decision")) c.decision = decision_rule_from_json(j.at("decision"));
    if (j.contains("resolutions")) c.resolutions.gsd = field<std::vector<double>>(j, "resolutions");
    if (j.contains("folds")) c.folds = resolve(base_dir, field<std::string>(j, "folds"));
    if (j.contains("scheme")) c.scheme = field<std::string>(j, "scheme");
    if (j.contains("seed")) c.seed = field<std::uint64_t>(j, "seed");
    if (j.contains("ensemble_seeds")) c.ensemble_seeds = field<std::vector<std::uint64_t>>(j, "ensemble_seeds");
    if (j.contains("adapt_event")) c.adapt_event = field<std::string>(j, "adapt_event");
    if (j.contains("shares")) c.shares = field<std::vector<double>>(j, "shares");
    if (j.contains("aggregation")) c.aggregation = parse_aggregation(field<std::string>(j, "aggregation"));
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot read " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
    }
    return run_config_from_json(j, path.parent_path());
}

json to_json(const RunConfig& c) {
    json ckpts = json::array();
    for (const auto& p : c.checkpoints) ckpts.push_back(p.generic_string());
    return {{"manifest", c.manifest.generic_string()},
            {"output_dir", c.output_dir.generic_string()},
            {"checkpoints", ckpts},
            {"network", to_json(c.network)},
            {"train", to_json(c.train)},
            {"decision", to_json(c.decision)},
            {"resolutions", c.resolutions.gsd},
            {"folds", c.folds.generic_string()},
            {"scheme", c.scheme},
            {"seed", c.seed},
            {"ensemble_seeds", c.ensemble_seeds},
            {"adapt_event", c.adapt_event},
            {"shares", c.shares},
            {"aggregation", to_string(c.aggregation)}};
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a_hex(ss.str());
}

std::uint64_t synth_scene_seed(std::uint64_t seed, int index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index)};
    return std::mt19937_64(seq)();
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

namespace {

struct Options {
    fs::path config;
    std::uint64_t seed = 0;
    int jobs = 0;
    std::string resolutions;
    std::string mode = "symmetric";
    std::string shares;
    std::string scheme;
    bool oracle = false;

    // synth
    int scenes = 8;
    int side = 128;
    int events = 1;
    int buildings = 8;
    double test_share = 0.25;
    fs::path out = "synthetic";
};

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    f << text;
    if (!f) throw std::runtime_error("cannot write " + path.string());
}

// Provenance for one command: run_<command>.json holds digests only, while
// wall-clock timestamps go to run.log.
class RunRecord {
public:
    RunRecord(fs::path dir, std::string command, std::string digest, std::uint64_t seed)
        : dir_(std::move(dir)), command_(std::move(command)), digest_(std::move(digest)), seed_(seed) {
        fs::create_directories(dir_);
        log_.open(dir_ / "run.log", std::ios::app);
        log("start " + command_ + " config_digest=" + digest_);
    }

    const std::string& digest() const { return digest_; }

    void log(const std::string& line) {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        log_ << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << ' ' << line << '\n';
        log_.flush();
    }

    void input(const std::string& name, const fs::path& path) { inputs_[name] = file_digest(path); }

    void artifact(const fs::path& path, const std::string& text) {
        write_text(path, text);
        artifacts_[fs::relative(path, dir_).generic_string()] = fnv1a_hex(text);
    }

    void artifact_file(const fs::path& path) { artifacts_[fs::relative(path, dir_).generic_string()] = file_digest(path); }

    void finish(const json& config) {
        const json doc{{"command", command_}, {"config_digest", digest_}, {"seed", seed_},
                       {"config", config},    {"inputs", inputs_},        {"artifacts", artifacts_}};
        write_text(dir_ / ("run_" + command_ + ".json"), doc.dump(2) + "\n");
        log("done " + command_);
    }

private:
    fs::path dir_;
    std::string command_;
    std::string digest_;
    std::uint64_t seed_;
    std::ofstream log_;
    json inputs_ = json::object();
    json artifacts_ = json::object();
};

std::string join(const std::vector<std::string>& items) {
    std::string s;
    for (const auto& i : items) s += (s.empty() ? "" : ",") + i;
    return s;
}

std::vector<double> parse_doubles(const std::string& csv, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError(flag, "not a number: '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError(flag, "empty list");
    return out;
}

template <typename F>
void check(const std::string& fieldname, F&& f) {
    try {
        f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(fieldname, e.what());
    }
}

std::string report_json(const MetricsReport& r, const std::string& digest) {
    json j = to_json(r);
    j["config_digest"] = digest;
    return j.dump(2) + "\n";
}

std::string summary(const MetricsReport& r) {
    std::ostringstream s;
    s << std::setprecision(4) << std::fixed;
    for (const auto& [name, value] : metric_values(r)) s << name << '=' << value << ' ';
    s << "score=" << r.score;
    return s.str();
}

// Everything a command needs after validation.
struct Prepared {
    RunConfig cfg;
    GradeScheme scheme;
    DatasetManifest manifest;
    FoldSpec folds;
    std::string digest;
};

// The digest covers what determines the results: the experiment settings
// and the content of every input file, not where outputs are written.
std::string config_digest(const RunConfig& cfg, const json& input_digests) {
    json j = to_json(cfg);
    j.erase("manifest");
    j.erase("output_dir");
    j.erase("checkpoints");
    j.erase("folds");
    j["inputs"] = input_digests;
    return fnv1a_hex(j.dump());
}

Prepared prepare(const std::string& command, const Options& opt, bool seed_given, bool need_models) {
    Prepared p;
    if (opt.config.empty()) throw ConfigError("--config", "required for " + command);
    p.cfg = load_run_config(opt.config);
    RunConfig& c = p.cfg;
    if (seed_given) c.seed = opt.seed;
    if (!opt.scheme.empty()) c.scheme = opt.scheme;
    if (!opt.resolutions.empty()) check("--resolutions", [&] { c.resolutions = parse_schedule(opt.resolutions); });
    if (!opt.shares.empty()) c.shares = parse_doubles(opt.shares, "--share");

    check("scheme", [&] { p.scheme = GradeScheme::parse(c.scheme); });
    check("network", [&] { c.network.validate(); });
    check("train", [&] { c.train.validate(); });
    check("decision", [&] { c.decision.validate(); });

    json inputs = json::object();
    if (c.manifest.empty()) throw ConfigError("manifest", "required");
    if (!fs::exists(c.manifest)) throw ConfigError("manifest", "no such file: " + c.manifest.string());
    try {
        p.manifest = load_manifest(c.manifest);
    } catch (const ManifestError& e) {
        throw ConfigError("manifest", e.what());
    }
    inputs["manifest"] = file_digest(c.manifest);

    if (command == "sweep" && !p.manifest.scenes.empty())
        check("resolutions", [&] { c.resolutions.validate(p.manifest.scenes.front().gsd); });
    if (command == "folds") {
        if (c.folds.empty()) throw ConfigError("folds", "required for folds");
        if (!fs::exists(c.folds)) throw ConfigError("folds", "no such file: " + c.folds.string());
        check("folds", [&] {
            p.folds = load_fold_spec(c.folds);
            p.folds.validate(p.manifest.events());
        });
        inputs["folds"] = file_digest(c.folds);
    }
    if (command == "adapt") {
        if (c.adapt_event.empty()) throw ConfigError("adapt_event", "required for adapt");
        const auto events = p.manifest.events();
        if (std::find(events.begin(), events.end(), c.adapt_event) == events.end())
            throw ConfigError("adapt_event", "event '" + c.adapt_event + "' not in manifest");
        for (double s : c.shares)
            if (!(s >= 0.0 && s <= 0.5)) throw ConfigError("shares", "share outside [0, 0.5]");
    }
    if (need_models) {
        json models = json::array();
        for (const auto& path : c.model_paths()) {
            if (!fs::exists(path)) throw ConfigError("checkpoints", "no such checkpoint: " + path.string());
            models.push_back(file_digest(path));
        }
        inputs["checkpoints"] = models;
    }
    p.digest = config_digest(c, inputs);
    return p;
}

std::vector<ScenePair> scenes_of(const DatasetManifest& m, const char* what) {
    auto scenes = load_scenes(m);
    if (scenes.empty()) throw std::runtime_error(std::string("no ") + what + " scenes in the manifest");
    return scenes;
}

std::vector<ModelParams> load_models(const RunConfig& c) {
    std::vector<ModelParams> models;
    for (const auto& p : c.model_paths()) models.push_back(load_checkpoint(p));
    return models;
}

// ---- synth ---------------------------------------------------------------

int cmd_synth(const Options& opt, std::ostream& out) {
    if (opt.scenes < 0) throw ConfigError("--scenes", "must be >= 0");
    if (opt.events < 1) throw ConfigError("--events", "must be >= 1");
    if (!(opt.test_share >= 0.0 && opt.test_share <= 1.0)) throw ConfigError("--test-share", "must lie in [0, 1]");
    SyntheticSceneSpec probe;
    probe.side = opt.side;
    probe.n_buildings = opt.buildings;
    probe.min_building = std::min(probe.min_building, std::max(2, opt.side / 8));
    probe.max_building = std::max(probe.min_building, std::min(probe.max_building, opt.side / 4));
    check("--side", [&] {
        if (opt.side < 32) throw std::invalid_argument("side must be at least 32");
        if (opt.buildings < 0) throw std::invalid_argument("buildings must be >= 0");
    });

    static constexpr HazardType kHazards[] = {HazardType::wind,    HazardType::flood,   HazardType::fire,
                                              HazardType::tsunami, HazardType::volcano, HazardType::earthquake};
    const json settings{{"seed", opt.seed},          {"scenes", opt.scenes}, {"side", opt.side},
                        {"events", opt.events},      {"buildings", opt.buildings},
                        {"test_share", opt.test_share}};
    RunRecord record(opt.out, "synth", fnv1a_hex(settings.dump()), opt.seed);

    DatasetManifest m;
    m.base_dir = opt.out;
    for (int i = 0; i < opt.scenes; ++i) {
        SyntheticSceneSpec spec = probe;
        spec.seed = synth_scene_seed(opt.seed, i);
        const int e = i % opt.events;
        spec.event_id = "synthetic-" + std::to_string(e);
        spec.hazard = kHazards[e % 6];
        // Spread test scenes evenly through the list.
        const bool test = std::floor((i + 1) * opt.test_share) > std::floor(i * opt.test_share);
        spec.split = test ? Split::test : Split::train;
        const auto scene = generate_synthetic_scene(spec).scene;

        char stem[32];
        std::snprintf(stem, sizeof stem, "s%04d", i);
        const std::string pre = std::string("pre/") + stem + ".png";
        const std::string post = std::string("post/") + stem + ".png";
        const std::string mask = std::string("masks/") + stem + ".png";
        write_png(scene.pre, opt.out / pre);
        write_png(scene.post, opt.out / post);
        write_png(scene.labels, opt.out / mask);
        for (const auto& rel : {pre, post, mask}) record.artifact_file(opt.out / rel);
        m.scenes.push_back({spec.event_id, spec.hazard, spec.split, pre, post, mask, spec.gsd});
    }
    save_manifest(m, opt.out / "manifest.json");
    record.artifact_file(opt.out / "manifest.json");
    record.finish(settings);
    out << "wrote " << opt.scenes << " scenes to " << (opt.out / "manifest.json").string() << '\n';
    return 0;
}

// ---- train ---------------------------------------------------------------

int cmd_train(const Prepared& p, std::ostream& out) {
    const RunConfig& c = p.cfg;
    RunRecord record(c.output_dir, "train", p.digest, c.seed);
    record.input("manifest", c.manifest);
    const auto scenes = scenes_of(p.manifest.filter_split(Split::train), "training");
    for (auto member : c.members()) {
        NetworkConfig net = c.network;
        net.seed = member;
        TrainConfig tc = c.train;
        tc.seed = member;
        LossTrace t1, t2;
        record.log("training member seed=" + std::to_string(member) + " on " + std::to_string(scenes.size()) + " scenes");
        const auto params = train_two_stage(scenes, net, tc, &t1, &t2);
        const auto ckpt = c.checkpoint_for(member);
        fs::create_directories(ckpt.parent_path());
        save_checkpoint(params, ckpt);
        record.artifact_file(ckpt);
        const std::string tag = "seed" + std::to_string(member);
        record.artifact(c.output_dir / ("loss_stage1_" + tag + ".csv"), t1.to_csv());
        record.artifact(c.output_dir / ("loss_stage2_" + tag + ".csv"), t2.to_csv());
        out << "trained " << ckpt.string() << '\n';
    }
    record.finish(to_json(c));
    return 0;
}

// ---- eval ----------------------------------------------------------------

int cmd_eval(const Prepared& p, bool oracle, std::ostream& out) {
    const RunConfig& c = p.cfg;
    RunRecord record(c.output_dir, "eval", p.digest, c.seed);
    record.input("manifest", c.manifest);
    const auto scenes = scenes_of(p.manifest.filter_split(Split::test), "test");
    MetricsReport report;
    if (oracle) {
        std::vector<GradeMap> pred, truth;
        for (const auto& s : scenes) {
            GradeMap g = s.labels;
            for (auto& code : g.codes)
                if (code == kUnclassified) code = 0;  // never scored
            pred.push_back(std::move(g));
            truth.push_back(s.labels);
        }
        report = evaluate_maps(pred, truth, p.scheme, c.aggregation);
    } else {
        for (std::size_t i = 0; i < c.model_paths().size(); ++i)
            record.input("checkpoint" + std::to_string(i), c.model_paths()[i]);
        report = evaluate(scenes, load_models(c), c.decision, p.scheme, c.aggregation);
    }
    const std::string stem = oracle ? "report_oracle" : "report";
    record.artifact(c.output_dir / (stem + ".json"), report_json(report, p.digest));
    record.artifact(c.output_dir / (stem + "_confusion.csv"), report.confusion.to_csv(report.grade_labels));
    record.log(summary(report));
    record.finish(to_json(c));
    out << summary(report) << '\n';
    return 0;
}

// ---- sweep ---------------------------------------------------------------

int cmd_sweep(const Prepared& p, const std::string& mode, std::ostream& out) {
    const RunConfig& c = p.cfg;
    RunRecord record(c.output_dir, "sweep", p.digest, c.seed);
    record.input("manifest", c.manifest);
    const auto scenes = scenes_of(p.manifest.filter_split(Split::test), "test");
    const auto models = load_models(c);
    std::string csv;
    if (mode == "symmetric") {
        csv = symmetric_sweep(models, scenes, c.resolutions, c.decision, p.scheme).to_csv();
    } else {
        csv = asymmetric_sweep(models, scenes, c.resolutions, c.decision, p.scheme).to_csv();
    }
    const auto path = c.output_dir / ("sweep_" + mode + ".csv");
    record.artifact(path, csv);
    record.finish(to_json(c));
    out << "wrote " << path.string() << '\n';
    return 0;
}

// ---- folds ---------------------------------------------------------------

int cmd_folds(const Prepared& p, std::ostream& out) {
    const RunConfig& c = p.cfg;
    RunRecord record(c.output_dir, "folds", p.digest, c.seed);
    record.input("manifest", c.manifest);
    record.input("folds", c.folds);
    const auto scenes = scenes_of(p.manifest, "usable");
    NetworkConfig net = c.network;
    net.seed = c.seed;
    TrainConfig tc = c.train;
    tc.seed = c.seed;
    const auto result = event_cross_validation(scenes, p.folds, net, tc, c.decision, p.scheme);
    for (const auto& f : result.folds) {
        record.log("fold " + f.name + " train_events=" + join(f.train_events) + " test_events=" + join(f.test_events));
        record.log("fold " + f.name + " " + summary(f.report));
        out << f.name << ' ' << summary(f.report) << '\n';
    }
    out << "average " << summary(result.average) << '\n';
    json j = to_json(result);
    j["config_digest"] = p.digest;
    record.artifact(c.output_dir / "folds.json", j.dump(2) + "\n");
    record.finish(to_json(c));
    return 0;
}

// ---- adapt ---------------------------------------------------------------

int cmd_adapt(const Prepared& p, std::ostream& out) {
    const RunConfig& c = p.cfg;
    RunRecord record(c.output_dir, "adapt", p.digest, c.seed);
    record.input("manifest", c.manifest);
    const auto scenes = scenes_of(p.manifest.filter_events({c.adapt_event}), "adaptation");
    const auto model = load_checkpoint(c.model_paths().front());
    TrainConfig tc = c.train;
    tc.seed = c.seed;
    const auto curve = adaptation_study(model, scenes, c.shares, tc, c.decision, p.scheme);
    json subsets = json::array();
    for (const auto& pt : curve.points) subsets.push_back({{"share", pt.share}, {"scenes", pt.subset}});
    const json audit{{"test_scenes", curve.test_scenes},
                     {"pool_scenes", curve.pool_scenes},
                     {"subsets", subsets},
                     {"config_digest", p.digest}};
    record.artifact(c.output_dir / "adaptation.csv", curve.to_csv());
    record.artifact(c.output_dir / "adaptation_subsets.json", audit.dump(2) + "\n");
    record.finish(to_json(c));
    for (const auto& pt : curve.points) out << "s=" << pt.share << ' ' << summary(pt.report) << '\n';
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options opt;
    CLI::App app{"Building damage assessment from pre/post imagery"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--config", opt.config, "Run configuration (JSON)");
    auto* seed_opt = app.add_option("--seed", opt.seed, "Global seed");
    app.add_option("--jobs", opt.jobs, "Worker thread cap")->check(CLI::PositiveNumber);
    app.add_option("--resolutions", opt.resolutions, "Resolution schedule in m/px, e.g. 0.5,1,2");
    app.add_option("--scheme", opt.scheme, "Grade scheme")->check(CLI::IsMember({"fine", "ahr"}));

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("--scenes", opt.scenes, "Number of scenes");
    synth->add_option("--side", opt.side, "Scene side in pixels");
    synth->add_option("--events", opt.events, "Number of events");
    synth->add_option("--buildings", opt.buildings, "Buildings per scene");
    synth->add_option("--test-share", opt.test_share, "Fraction of scenes in the test split");
    synth->add_option("--out", opt.out, "Output directory");
    auto* train = app.add_subcommand("train", "Two-stage training");
    auto* eval = app.add_subcommand("eval", "Evaluate on the test split");
    eval->add_flag("--oracle", opt.oracle, "Score the ground truth against itself");
    auto* sweep = app.add_subcommand("sweep", "Resolution sweep");
    sweep->add_option("--mode", opt.mode, "symmetric or asymmetric")->check(CLI::IsMember({"symmetric", "asymmetric"}));
    auto* folds = app.add_subcommand("folds", "Leave-events-out cross-validation");
    auto* adapt = app.add_subcommand("adapt", "Fine-tuning adaptation study");
    adapt->add_option("--share", opt.shares, "Fine-tuning shares, e.g. 0,0.1,0.5");

    std::vector<std::string> argv_store{"dmgnet"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }
    if (opt.jobs > 0) omp_set_num_threads(opt.jobs);

    Prepared prepared;
    try {
        if (!synth->parsed()) {
            const bool need_models = (eval->parsed() && !opt.oracle) || sweep->parsed() || adapt->parsed();
            const std::string name = app.get_subcommands().front()->get_name();
            prepared = prepare(name, opt, seed_opt->count() > 0, need_models);
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(opt, out);
        if (train->parsed()) return cmd_train(prepared, out);
        if (eval->parsed()) return cmd_eval(prepared, opt.oracle, out);
        if (sweep->parsed()) return cmd_sweep(prepared, opt.mode, out);
        if (folds->parsed()) return cmd_folds(prepared, out);
        if (adapt->parsed()) return cmd_adapt(prepared, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace dmgnet
