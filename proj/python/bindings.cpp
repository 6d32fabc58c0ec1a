#include <sstream>

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "swarmnas/cli.hpp"
#include "swarmnas/descriptor_json.hpp"
#include "swarmnas/engine.hpp"
#include "swarmnas/landscape.hpp"
#include "swarmnas/pheromone_graph.hpp"
#include "swarmnas/protocol.hpp"
#include "swarmnas/selection.hpp"

namespace py = pybind11;
using namespace swarmnas;
using nlohmann::json;

namespace {

// JSON values cross the boundary through the stdlib json module.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& obj) {
    return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

ArchitectureDescriptor descriptor_arg(const py::handle& obj) { return descriptor_from_json(from_py(obj)); }

LandscapeSpec landscape_arg(const py::handle& obj) { return LandscapeSpec::from_json(from_py(obj)); }

json space_json(const SearchSpace& space) {
    json out = json::array();
    for (const auto& t : space.templates()) {
        json attrs = json::array();
        for (const auto& a : t.attributes) {
            json options = json::array();
            for (const auto& o : a.options) std::visit([&](const auto& v) { options.push_back(v); }, o);
            attrs.push_back({{"name", a.name}, {"options", options}});
        }
        json next = json::array();
        for (LayerKind k : t.allowed_successors) next.push_back(std::string(to_string(k)));
        out.push_back({{"kind", std::string(to_string(t.kind))}, {"attributes", attrs}, {"successors", next}});
    }
    return out;
}

// Python callable evaluator: f(descriptor, reuse_prefix_len) -> float or
// {"accuracy": ..., "loss": ..., "wall_ms": ...}. Exceptions become failed
// evaluations.
class CallableEvaluator final : public Evaluator {
public:
    explicit CallableEvaluator(py::function fn) : fn_(std::move(fn)) {}

    Metrics evaluate(const ArchitectureDescriptor& d, const ReuseHint& hint) override {
        py::object r = fn_(to_py(descriptor_to_json(d)), hint.prefix_len);
        Metrics m;
        if (py::isinstance<py::dict>(r)) {
            const json j = from_py(r);
            m.accuracy = j.at("accuracy").get<double>();
            if (j.contains("loss") && !j["loss"].is_null()) m.loss = j["loss"].get<double>();
            m.wall_ms = j.value("wall_ms", 0.0);
        } else {
            m.accuracy = r.cast<double>();
        }
        return m;
    }

private:
    py::function fn_;
};

std::unique_ptr<Evaluator> evaluator_for(const RunConfig& config, const py::object& evaluator) {
    if (evaluator.is_none()) return make_evaluator(config);
    if (py::isinstance<py::function>(evaluator)) return std::make_unique<CallableEvaluator>(evaluator);
    throw std::invalid_argument("evaluator must be None (use the config binding) or a callable");
}

py::dict result_dict(const SearchEngine& engine) {
    py::dict out;
    const auto& best = *engine.incumbent();
    out["descriptor"] = to_py(descriptor_to_json(best.descriptor));
    out["score"] = best.score();
    out["canonical"] = canonical_string(best.descriptor);
    out["evaluations"] = engine.evaluations();
    out["rounds"] = engine.completed_rounds();
    out["best_by_round"] = engine.best_by_round();
    out["checkpoint"] = to_py(engine.checkpoint());
    return out;
}

py::dict run_engine(SearchEngine& engine, std::optional<std::size_t> rounds) {
    std::size_t left = rounds.value_or(engine.config().max_depth);
    while (!engine.finished() && left-- > 0) engine.run_round();
    if (!engine.incumbent()) throw std::invalid_argument("no round was run");
    return result_dict(engine);
}

Tour tour_arg(const std::vector<NodeId>& nodes, const std::vector<EdgeId>& edges,
              const std::vector<std::vector<std::size_t>>& choices) {
    Tour t;
    t.nodes = nodes;
    t.edges = edges;
    t.choices = choices;
    return t;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Ant colony architecture search core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);

    m.def("default_space", [] { return to_py(space_json(default_space())); },
          "Default catalog: kinds, attribute options and successor lists.");

    m.def(
        "validate_descriptor",
        [](const py::object& d) -> py::tuple {
            const auto verdict = validate(descriptor_arg(d), default_space());
            if (verdict) return py::make_tuple(true, py::none());
            return py::make_tuple(false, verdict.rejection->detail);
        },
        "(valid, reason) for a descriptor dict.");
    m.def("canonical_string", [](const py::object& d) { return canonical_string(descriptor_arg(d)); });
    m.def("parse_descriptor", [](const std::string& text) { return to_py(descriptor_to_json(deserialize(text))); });
    m.def("serialize_descriptor", [](const py::object& d) { return serialize(descriptor_arg(d)); });

    py::class_<RandomSource>(m, "RandomSource")
        .def(py::init<std::uint64_t>(), py::arg("seed") = 0)
        .def("uniform", &RandomSource::uniform)
        .def("index", &RandomSource::index)
        .def_property_readonly("draws", &RandomSource::draws);

    m.def(
        "aco_select",
        [](const std::vector<std::pair<double, double>>& candidates, double greediness, double beta,
           RandomSource& rng) {
            std::vector<Candidate> c;
            for (const auto& [tau, eta] : candidates) c.push_back({tau, eta});
            return aco_select(c, SelectionParams{greediness, beta}, rng);
        },
        py::arg("candidates"), py::arg("greediness"), py::arg("beta"), py::arg("rng"),
        "Pick an index from (pheromone, heuristic) pairs.");

    py::class_<PheromoneGraph>(m, "PheromoneGraph")
        .def(py::init([](double tau0) { return PheromoneGraph(default_space(), tau0); }), py::arg("tau0") = 0.1)
        .def_property_readonly("input_node", &PheromoneGraph::input_node)
        .def_property_readonly("node_count", &PheromoneGraph::node_count)
        .def_property_readonly("edge_count", [](const PheromoneGraph& g) { return g.edges().size(); })
        .def_property_readonly("current_max_depth", &PheromoneGraph::current_max_depth)
        .def("expand_neighbours",
             [](PheromoneGraph& g, NodeId from, bool flattened) {
                 std::vector<std::pair<EdgeId, NodeId>> out;
                 for (const auto& n : g.expand_neighbours(from, flattened)) out.emplace_back(n.edge, n.node);
                 return out;
             },
             py::arg("node"), py::arg("flattened") = false, "List of (edge, node) pairs.")
        .def("node_kind", [](const PheromoneGraph& g, NodeId id) { return std::string(to_string(g.node(id).kind)); })
        .def("attribute_count", [](const PheromoneGraph& g, NodeId id) { return g.node(id).attributes.size(); })
        .def("edge_pheromone", [](const PheromoneGraph& g, EdgeId id) { return g.edge(id).pheromone; })
        .def("set_edge_pheromone", &PheromoneGraph::set_edge_pheromone)
        .def("local_update",
             [](PheromoneGraph& g, const std::vector<NodeId>& nodes, const std::vector<EdgeId>& edges,
                const std::vector<std::vector<std::size_t>>& choices, double rho, double tau0) {
                 g.local_update(tour_arg(nodes, edges, choices), rho, tau0);
             },
             py::arg("nodes"), py::arg("edges"), py::arg("choices"), py::arg("rho"), py::arg("tau0"))
        .def("global_update",
             [](PheromoneGraph& g, const std::vector<NodeId>& nodes, const std::vector<EdgeId>& edges,
                const std::vector<std::vector<std::size_t>>& choices, double score, double alpha) {
                 Tour t = tour_arg(nodes, edges, choices);
                 t.metrics = Metrics{score};
                 g.global_update(t, alpha);
             },
             py::arg("nodes"), py::arg("edges"), py::arg("choices"), py::arg("score"), py::arg("alpha"))
        .def("increase_depth", &PheromoneGraph::increase_depth)
        .def("to_json", [](const PheromoneGraph& g) { return to_py(g.to_json()); });

    m.def(
        "generate_landscape",
        [](std::size_t depth, std::uint64_t seed, double discount, double noise_sigma) {
            return to_py(LandscapeSpec::generate(default_space(), depth, seed, {}, discount, noise_sigma).to_json());
        },
        py::arg("depth"), py::arg("seed"), py::arg("discount") = 0.5, py::arg("noise_sigma") = 0.0);
    m.def("landscape_score",
          [](const py::object& d, const py::object& l) { return landscape_score(descriptor_arg(d), landscape_arg(l)); });
    m.def("synthetic_evaluate", [](const py::object& d, const py::object& l) {
        return synthetic_evaluate(descriptor_arg(d), landscape_arg(l)).accuracy;
    });
    m.def(
        "brute_force_best",
        [](std::size_t depth, const py::object& l) {
            const auto r = brute_force_best(default_space(), depth, landscape_arg(l));
            return py::make_tuple(to_py(descriptor_to_json(r.best)), r.score);
        },
        py::arg("depth"), py::arg("landscape"), "(best descriptor, best score) by exhaustive enumeration.");
    m.def("count_walks", [](std::size_t depth) { return count_walks(default_space(), depth); });

    m.def(
        "search",
        [](const py::object& config, const py::object& evaluator, std::optional<std::size_t> rounds) {
            const RunConfig c = RunConfig::from_json(config.is_none() ? json::object() : from_py(config));
            auto eval = evaluator_for(c, evaluator);
            SearchEngine engine(c, *eval);
            return run_engine(engine, rounds);
        },
        py::arg("config") = py::none(), py::arg("evaluator") = py::none(), py::arg("rounds") = py::none(),
        "Run a search. Without an evaluator the config's binding is used (default synthetic).");
    m.def(
        "resume",
        [](const py::object& checkpoint, const py::object& evaluator, std::optional<std::size_t> rounds) {
            const json j = from_py(checkpoint);
            auto eval = evaluator_for(SearchEngine::checkpoint_config(j), evaluator);
            SearchEngine engine = SearchEngine::resume(j, *eval);
            return run_engine(engine, rounds);
        },
        py::arg("checkpoint"), py::arg("evaluator") = py::none(), py::arg("rounds") = py::none());
    m.def(
        "random_search",
        [](const py::object& landscape, std::size_t budget, std::size_t max_depth, std::uint64_t seed) {
            SyntheticEvaluator eval(landscape_arg(landscape));
            const auto r = random_search(eval, default_space(), budget, max_depth, seed);
            return py::make_tuple(to_py(descriptor_to_json(r.best)), r.best_score);
        },
        py::arg("landscape"), py::arg("budget"), py::arg("max_depth"), py::arg("seed"));

    m.def(
        "decode_message", [](const std::string& line) { return to_py(json::parse(encode(decode(line)))); },
        "Parse one protocol line; raises ProtocolError if it is malformed.");
    m.def("encode_message", [](const py::object& msg) { return encode(decode(from_py(msg).dump())); });
    m.attr("PROTOCOL_VERSION") = kProtocolVersion;

    m.def(
        "cli",
        [](const std::vector<std::string>& args) {
            std::vector<std::string> all = {"swarmnas"};
            all.insert(all.end(), args.begin(), args.end());
            std::vector<const char*> argv;
            for (const auto& a : all) argv.push_back(a.c_str());
            std::ostringstream out, err;
            const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        "Run the command line in-process; returns (exit_code, stdout, stderr).");
}
