#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "swarmnas/config.hpp"
#include "swarmnas/engine.hpp"
#include "swarmnas/evaluation.hpp"
#include "swarmnas/protocol.hpp"

namespace swarmnas {

/// Exit codes of cli_main.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitConfig = 2,
    kExitEvaluator = 3,
    kExitCheckpoint = 4,
    kExitIo = 5,
};

/// Entry point of the `swarmnas` command: run, resume, sweep, export-best.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Evaluator for `config.evaluator`. For "synthetic" the landscape must carry
/// a target or a landscape seed (see RunConfig::resolved_landscape); remote
/// bindings connect and handshake here.
std::unique_ptr<Evaluator> make_evaluator(const RunConfig& config, const SearchSpace& space = default_space(),
                                          ProtocolLogger logger = {});

/// One RFC 4180 record with CRLF line ending; fields are quoted when needed.
std::string csv_record(const std::vector<std::string>& fields);

/// Shortest round-trip text for a double.
std::string format_number(double value);

/// Contents of best.json: descriptor, score, canonical form, config, seed.
nlohmann::json best_json(const SearchEngine& engine);

}  // namespace swarmnas
