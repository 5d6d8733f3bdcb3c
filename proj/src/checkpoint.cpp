#include <json.hpp>

#include "coalition_prune/error.hpp"
#include "coalition_prune/estimator.hpp"

namespace cprune {

using nlohmann::json;

std::string save_checkpoint(const Checkpoint& checkpoint) {
  json players = json::array();
  for (const auto& p : checkpoint.players) {
    players.push_back({{"t", p.t},
                       {"mean", p.mean},
                       {"m2", p.m2},
                       {"converged", p.converged},
                       {"reason", to_string(p.reason)}});
  }
  json doc = {{"config_digest", checkpoint.config_digest},
              {"seed", checkpoint.seed},
              {"permutations_completed", checkpoint.permutations_completed},
              {"players", players}};
  return doc.dump(1) + "\n";
}

Checkpoint load_checkpoint(const std::string& json_text) {
  Checkpoint checkpoint;
  try {
    const json doc = json::parse(json_text);
    checkpoint.config_digest = doc.at("config_digest").get<std::string>();
    checkpoint.seed = doc.at("seed").get<std::uint64_t>();
    checkpoint.permutations_completed = doc.at("permutations_completed").get<std::uint64_t>();
    for (const auto& entry : doc.at("players")) {
      PlayerStats p;
      p.t = entry.at("t").get<std::uint64_t>();
      p.mean = entry.at("mean").get<double>();
      p.m2 = entry.at("m2").get<double>();
      p.converged = entry.at("converged").get<bool>();
      p.reason = parse_convergence_reason(entry.at("reason").get<std::string>());
      if (p.m2 < 0.0) throw Error(ErrorCode::checkpoint, "negative m2 in checkpoint");
      checkpoint.players.push_back(p);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::checkpoint, std::string("malformed checkpoint: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::checkpoint, std::string("malformed checkpoint: ") + e.what());
  }
  return checkpoint;
}

}  // namespace cprune
