#include "swarmnas/cli.hpp"

#include <array>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>

#include <CLI11.hpp>

#include "swarmnas/descriptor_json.hpp"
#include "swarmnas/landscape.hpp"
#include "swarmnas/protocol.hpp"

namespace swarmnas {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BindingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> ants;
    std::optional<std::size_t> max_depth;
    std::optional<double> greediness;
    std::optional<double> beta;
    std::optional<double> rho;
    std::optional<double> alpha;
    std::optional<double> tau0;
    std::optional<std::string> evaluator;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> landscape_seed;
};

void add_run_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_path, "JSON run config; flags override its values");
    cmd->add_option("--seed", o.seed, "Search seed");
    cmd->add_option("--ants", o.ants, "Ants per round (ant_count)");
    cmd->add_option("--max-depth", o.max_depth, "Rounds and maximum selectable layers");
    cmd->add_option("--greediness", o.greediness, "Exploitation probability q0 in [0, 1]");
    cmd->add_option("--beta", o.beta, "Heuristic exponent");
    cmd->add_option("--rho", o.rho, "Local pheromone decay in (0, 1)");
    cmd->add_option("--alpha", o.alpha, "Global evaporation in (0, 1)");
    cmd->add_option("--tau0", o.tau0, "Initial pheromone");
    cmd->add_option("--evaluator", o.evaluator, "synthetic | exec:<command> | tcp:<host>:<port>");
    cmd->add_option("--out-dir", o.out_dir, "Output directory");
    cmd->add_option("--landscape-seed", o.landscape_seed, "Seed of the synthetic landscape target");
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path.string() + " is not valid JSON: " + e.what());
    }
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << text;
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

RunConfig load_config(const Overrides& o) {
    RunConfig c;
    if (!o.config_path.empty()) {
        json j;
        try {
            j = read_json_file(o.config_path);
        } catch (const IoError& e) {
            throw ConfigError("config", e.what());
        } catch (const std::invalid_argument& e) {
            throw ConfigError("config", e.what());
        }
        c = RunConfig::from_json(j);
    }
    if (o.seed) c.seed = *o.seed;
    if (o.ants) c.ant_count = *o.ants;
    if (o.max_depth) c.max_depth = *o.max_depth;
    if (o.greediness) c.selection.greediness = *o.greediness;
    if (o.beta) c.selection.beta = *o.beta;
    if (o.rho) c.pheromone.rho = *o.rho;
    if (o.alpha) c.pheromone.alpha = *o.alpha;
    if (o.tau0) c.pheromone.tau0 = *o.tau0;
    if (o.evaluator) c.evaluator = *o.evaluator;
    if (o.out_dir) c.out_dir = *o.out_dir;
    if (o.landscape_seed) c.landscape.seed = *o.landscape_seed;
    c.validate();
    return c;
}

/// Pins the synthetic target into the config so the echoed config reproduces the run.
void pin_landscape(RunConfig& c) {
    if (c.evaluator == "synthetic" && !c.landscape.target) c.landscape.target = c.resolved_landscape().target;
}

std::unique_ptr<Evaluator> bind_evaluator(const RunConfig& c, std::ostream& err) {
    try {
        return make_evaluator(c, default_space(), [&err](const std::string& line) { err << "protocol: " << line << '\n'; });
    } catch (const std::exception& e) {
        throw BindingError(std::string("cannot bind evaluator '") + c.evaluator + "': " + e.what());
    }
}

const char* kStatsHeader[] = {"round", "ant_index", "depth", "score", "canonical", "wall_ms", "failure"};

class StatsWriter {
public:
    explicit StatsWriter(const fs::path& path) {
        const bool fresh = !fs::exists(path);
        out_.open(path, std::ios::binary | std::ios::app);
        if (!out_) throw IoError("cannot open " + path.string());
        if (fresh) out_ << csv_record({std::begin(kStatsHeader), std::end(kStatsHeader)});
    }

    void write(const Tour& t) {
        out_ << csv_record({std::to_string(t.round), std::to_string(t.ant_index), std::to_string(t.walk_length()),
                            format_number(t.score()), canonical_prefix(t.descriptor, t.descriptor.layers.size()),
                            format_number(t.metrics ? t.metrics->wall_ms : 0.0), t.failure.value_or("")});
        out_.flush();
    }

private:
    std::ofstream out_;
};

void drive(SearchEngine& engine, const fs::path& dir, std::ostream& out) {
    ensure_dir(dir);
    StatsWriter stats(dir / "stats.csv");
    SearchObserver observer;
    observer.on_ant = [&stats](const Tour& t) { stats.write(t); };
    observer.on_round_end = [&dir, &out](const SearchEngine& e) {
        write_json(dir / ("checkpoint_round_" + std::to_string(e.completed_rounds()) + ".json"), e.checkpoint());
        out << "round " << e.completed_rounds() << "/" << e.config().max_depth << ": best "
            << format_number(e.incumbent()->score()) << "  "
            << canonical_prefix(e.incumbent()->descriptor, e.incumbent()->descriptor.layers.size()) << '\n';
    };
    engine.set_observer(std::move(observer));
    engine.run();
    write_json(dir / "best.json", best_json(engine));
    out << "best.json written to " << (dir / "best.json").string() << '\n';
}

int cmd_run(const Overrides& o, std::ostream& out, std::ostream& err) {
    RunConfig config = load_config(o);
    pin_landscape(config);
    auto evaluator = bind_evaluator(config, err);
    SearchEngine engine(config, *evaluator);
    drive(engine, config.out_dir, out);
    return kExitOk;
}

int cmd_resume(const std::string& path, const std::optional<std::string>& evaluator_override,
               const std::optional<std::string>& out_dir, std::ostream& out, std::ostream& err) {
    json checkpoint;
    RunConfig config;
    try {
        checkpoint = read_json_file(path);
        config = SearchEngine::checkpoint_config(checkpoint);
    } catch (const std::exception& e) {
        throw CheckpointError(std::string("cannot resume from ") + path + ": " + e.what());
    }
    RunConfig binding = config;
    if (evaluator_override) binding.evaluator = *evaluator_override;
    binding.validate();

    // A stand-in evaluator validates the whole checkpoint before a worker is started.
    {
        struct Unused final : Evaluator {
            Metrics evaluate(const ArchitectureDescriptor&, const ReuseHint&) override { return {}; }
        } unused;
        try {
            const auto probe = SearchEngine::resume(checkpoint, unused);
            if (probe.finished()) {
                out << "run already finished after " << probe.completed_rounds() << " rounds; nothing to do\n";
                return kExitOk;
            }
        } catch (const std::exception& e) {
            throw CheckpointError(std::string("cannot resume from ") + path + ": " + e.what());
        }
    }

    auto evaluator = bind_evaluator(binding, err);
    SearchEngine engine = SearchEngine::resume(checkpoint, *evaluator);
    const fs::path dir = out_dir ? fs::path(*out_dir) : fs::absolute(path).parent_path();
    out << "resuming after round " << engine.completed_rounds() << " of " << engine.config().max_depth << '\n';
    drive(engine, dir, out);
    return kExitOk;
}

std::vector<std::string> split_values(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw ConfigError("values", "empty entry in --values");
        out.push_back(item.substr(b, e - b + 1));
    }
    if (out.empty()) throw ConfigError("values", "--values needs at least one value");
    return out;
}

double parse_double(const std::string& text, const std::string& field) {
    double v = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size()) {
        throw ConfigError(field, field + " value '" + text + "' is not a number");
    }
    return v;
}

std::size_t parse_count(const std::string& text, const std::string& field) {
    std::size_t v = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size()) {
        throw ConfigError(field, field + " value '" + text + "' is not a non-negative integer");
    }
    return v;
}

int cmd_sweep(const Overrides& o, const std::string& axis, const std::string& values_text, std::size_t trials,
              std::ostream& out, std::ostream& err) {
    if (axis != "ant_count" && axis != "greediness") {
        throw ConfigError("axis", "axis = " + axis + " must be ant_count or greediness");
    }
    if (trials < 1) throw ConfigError("trials", "trials = 0 must be >= 1");
    RunConfig base = load_config(o);
    pin_landscape(base);

    struct Point {
        std::string label;
        RunConfig config;
    };
    std::vector<Point> points;
    for (const auto& v : split_values(values_text)) {
        RunConfig c = base;
        if (axis == "ant_count") {
            c.ant_count = parse_count(v, axis);
            points.push_back({std::to_string(c.ant_count), c});
        } else {
            c.selection.greediness = parse_double(v, axis);
            points.push_back({format_number(c.selection.greediness), c});
        }
        points.back().config.validate();
    }

    const fs::path dir = base.out_dir;
    ensure_dir(dir);
    std::ostringstream csv;
    csv << csv_record({"value", "trial", "best_score", "evaluations", "wall_ms", "error"});
    for (const auto& p : points) {
        double sum = 0.0;
        std::size_t ok = 0;
        for (std::size_t trial = 0; trial < trials; ++trial) {
            RunConfig c = p.config;
            c.seed = base.seed + trial;
            const auto start = std::chrono::steady_clock::now();
            std::vector<std::string> row{p.label, std::to_string(trial)};
            try {
                auto evaluator = bind_evaluator(c, err);
                const auto result = search(c, *evaluator);
                const double ms =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
                row.insert(row.end(), {format_number(result.best.score()), std::to_string(result.evaluations),
                                       format_number(ms), ""});
                sum += result.best.score();
                ++ok;
            } catch (const std::exception& e) {
                const double ms =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
                row.insert(row.end(), {"", "0", format_number(ms), e.what()});
                err << "sweep " << axis << "=" << p.label << " trial " << trial << " failed: " << e.what() << '\n';
            }
            csv << csv_record(row);
        }
        out << axis << "=" << p.label << ": mean best "
            << (ok > 0 ? format_number(sum / static_cast<double>(ok)) : std::string("n/a")) << " over " << ok << "/"
            << trials << " trials\n";
    }
    write_text_atomic(dir / "sweep.csv", csv.str());
    out << "sweep.csv written to " << (dir / "sweep.csv").string() << '\n';
    return kExitOk;
}

fs::path latest_checkpoint(const fs::path& dir) {
    static const std::regex pattern(R"(checkpoint_round_(\d+)\.json)");
    std::optional<std::pair<unsigned long, fs::path>> best;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (std::regex_match(name, m, pattern)) {
            const unsigned long n = std::stoul(m[1]);
            if (!best || n > best->first) best = {n, entry.path()};
        }
    }
    if (!best) throw IoError("no best.json or checkpoint in " + dir.string());
    return best->second;
}

int cmd_export(const std::string& path, const std::string& format, const std::string& output, std::ostream& out) {
    fs::path source = path;
    if (fs::is_directory(source)) {
        source = fs::exists(source / "best.json") ? source / "best.json" : latest_checkpoint(source);
    }
    const json j = read_json_file(source);

    ArchitectureDescriptor descriptor;
    json summary;
    if (j.contains("schema_version")) {
        (void)SearchEngine::checkpoint_config(j);
        if (j.at("incumbent").is_null()) throw CheckpointError(source.string() + " has no completed round");
        const Tour best = tour_from_json(j.at("incumbent"));
        descriptor = best.descriptor;
        summary = {{"descriptor", descriptor_to_json(descriptor)},
                   {"score", best.score()},
                   {"canonical", canonical_string(descriptor)},
                   {"config", j.at("config")},
                   {"seed", j.at("config").value("seed", std::uint64_t{0})}};
    } else if (j.contains("descriptor")) {
        descriptor = descriptor_from_json(j.at("descriptor"));
        summary = j;
    } else {
        throw std::invalid_argument(source.string() + " is neither best.json nor a checkpoint");
    }

    std::string text;
    if (format == "descriptor") {
        text = descriptor_to_json(descriptor).dump(2) + "\n";
    } else if (format == "canonical") {
        text = canonical_string(descriptor) + "\n";
    } else if (format == "summary") {
        text = summary.dump(2) + "\n";
    } else {
        throw std::invalid_argument("format must be descriptor, canonical or summary");
    }
    if (output.empty() || output == "-") {
        out << text;
    } else {
        write_text_atomic(output, text);
    }
    return kExitOk;
}

}  // namespace

std::string format_number(double value) {
    std::array<char, 64> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) return "nan";
    return std::string(buf.data(), end);
}

std::string csv_record(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) line.push_back(',');
        const auto& f = fields[i];
        if (f.find_first_of(",\"\r\n") == std::string::npos) {
            line += f;
            continue;
        }
        line.push_back('"');
        for (char c : f) {
            if (c == '"') line.push_back('"');
            line.push_back(c);
        }
        line.push_back('"');
    }
    line += "\r\n";
    return line;
}

std::unique_ptr<Evaluator> make_evaluator(const RunConfig& config, const SearchSpace& space, ProtocolLogger logger) {
    if (config.evaluator == "synthetic") {
        return std::make_unique<SyntheticEvaluator>(config.resolved_landscape(space), space);
    }
    SessionOptions options;
    options.logger = std::move(logger);
    options.handshake_timeout = std::chrono::milliseconds(static_cast<std::int64_t>(config.handshake_timeout_s * 1000));
    options.request_timeout = std::chrono::milliseconds(static_cast<std::int64_t>(config.request_timeout_s * 1000));
    return std::make_unique<RemoteEvaluator>(config.evaluator, config.input_shape, options);
}

json best_json(const SearchEngine& engine) {
    const auto& best = engine.incumbent();
    if (!best) throw std::logic_error("no round has completed");
    return {{"descriptor", descriptor_to_json(best->descriptor)},
            {"score", best->score()},
            {"canonical", canonical_string(best->descriptor)},
            {"config", engine.config().to_json()},
            {"seed", engine.config().seed},
            {"rounds", engine.completed_rounds()},
            {"evaluations", engine.evaluations()}};
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Ant colony architecture search"};
    app.name("swarmnas");
    app.require_subcommand(1);

    Overrides run_flags;
    auto* run = app.add_subcommand("run", "Run a search; writes checkpoints, stats.csv and best.json");
    add_run_flags(run, run_flags);

    std::string checkpoint_path;
    std::optional<std::string> resume_evaluator;
    std::optional<std::string> resume_out;
    auto* resume = app.add_subcommand("resume", "Continue a search from a checkpoint");
    resume->add_option("checkpoint", checkpoint_path, "checkpoint_round_<n>.json")->required();
    resume->add_option("--evaluator", resume_evaluator, "Replace the stored evaluator binding");
    resume->add_option("--out-dir", resume_out, "Output directory (default: the checkpoint's directory)");

    Overrides sweep_flags;
    std::string axis;
    std::string values;
    std::size_t trials = 5;
    auto* sweep = app.add_subcommand("sweep", "Run one search per value and trial; writes sweep.csv");
    add_run_flags(sweep, sweep_flags);
    sweep->add_option("--axis", axis, "ant_count or greediness")->required();
    sweep->add_option("--values", values, "Comma separated values, e.g. 0,0.25,0.5,0.75,1")->required();
    sweep->add_option("--trials", trials, "Trials per value; trial t uses seed + t")->capture_default_str();

    std::string export_path;
    std::string format = "descriptor";
    std::string output;
    auto* exp = app.add_subcommand("export-best", "Print the best architecture of a run");
    exp->add_option("path", export_path, "Run directory, best.json or checkpoint")->required();
    exp->add_option("--format", format, "descriptor | canonical | summary")->capture_default_str();
    exp->add_option("--output,-o", output, "Write to a file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*run) return cmd_run(run_flags, out, err);
        if (*resume) return cmd_resume(checkpoint_path, resume_evaluator, resume_out, out, err);
        if (*sweep) return cmd_sweep(sweep_flags, axis, values, trials, out, err);
        if (*exp) return cmd_export(export_path, format, output, out);
    } catch (const ConfigError& e) {
        err << "error: invalid config (" << e.field() << "): " << e.what() << '\n';
        return kExitConfig;
    } catch (const BindingError& e) {
        err << "error: " << e.what() << '\n';
        return kExitEvaluator;
    } catch (const CheckpointError& e) {
        err << "error: " << e.what() << '\n';
        return kExitCheckpoint;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace swarmnas
