#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hktgnn/graph_io.hpp"
#include "hktgnn/synthgen.hpp"
#include "hktgnn/train.hpp"

// Serialization of configs and results. Every artifact carries the resolved
// configuration that produced it.
namespace hktgnn::io {

Json to_json(const TrainConfig& cfg);
Json to_json(const synth::GenConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
synth::GenConfig gen_config_from_json(const Json& j);

Json to_json(const RunResult& r);
Json to_json(const RunReport& r);
Json to_json(const std::vector<AblationArm>& arms, const TrainConfig& base);

void write_sweep_csv(const std::filesystem::path& path, SweepParam param,
                     const std::vector<std::pair<std::string, RunReport>>& points, const Json& config);
void write_stats_csv(const std::filesystem::path& path, const std::vector<synth::StatsRow>& rows,
                     const Json& config);

}  // namespace hktgnn::io
