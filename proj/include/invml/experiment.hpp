#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "invml/config.hpp"
#include "invml/datasets.hpp"
#include "invml/metrics.hpp"
#include "invml/model.hpp"
#include "invml/trainer.hpp"

namespace invml {

struct DataSplit {
  Dataset train;
  /// Equals `train` when no held-out set is configured.
  Dataset eval;
};

/// Builds or loads the configured dataset. Standardization, when enabled,
/// uses training statistics for both splits.
DataSplit load_data(const ExperimentConfig& config);

InvMLEncoder make_encoder(const ExperimentConfig& config, std::size_t input_dim);

/// Metrics at layer L (embedding) and L-1 (body output).
///
/// The L row reconstructs through the least-squares head inverse followed by
/// the body inverse; the L-1 row inverts the body output exactly.
std::vector<MetricsReport> evaluate_encoder(const InvMLEncoder& enc, const Dataset& data,
                                            const MetricsSpec& spec, std::uint64_t seed);

struct TrainRun {
  InvMLEncoder encoder;
  TrainResult result;
};
TrainRun run_training(const ExperimentConfig& config, const Dataset& train,
                      std::ostream* log = nullptr);

/// Ablation combination over the extra-head, orthogonality and padding losses.
struct Combo {
  std::string name;
  bool ex = false;
  bool orth = false;
  bool pad = false;
};
/// Parses "ex+orth+pad", "orth", "baseline" (no optional loss) and so on.
Combo parse_combo(const std::string& text);
ExperimentConfig with_combo(ExperimentConfig config, const Combo& combo);

// Subcommands. Each writes into `out` (created if missing).
void cmd_generate(const ExperimentConfig& config, const std::filesystem::path& out);
void cmd_stats(const ExperimentConfig& config, const std::filesystem::path& out);
void cmd_train(const ExperimentConfig& config, const std::filesystem::path& out,
               std::ostream* log = nullptr);
void cmd_evaluate(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                  const std::filesystem::path& out);
void cmd_ablate(const ExperimentConfig& config, const std::vector<std::string>& combos,
                const std::filesystem::path& out, std::ostream* log = nullptr);
void cmd_interpolate(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                     const std::filesystem::path& out);
void cmd_reconstruct(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                     const std::filesystem::path& out);

}  // namespace invml
