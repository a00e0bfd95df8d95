#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "invml/error.hpp"
#include "invml/losses.hpp"
#include "invml/matrix.hpp"
#include "invml/model.hpp"

namespace invml {

struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::uint64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update. Moments are created on the first call.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state);

/// Body, head, then extra heads: the fixed parameter order used by the
/// optimizer and the checkpoint.
std::vector<Matrix*> parameter_list(InvMLEncoder& enc);

enum class BatchMode { Full, NeighborhoodBlock };

struct TrainConfig {
  std::size_t epochs = 2000;
  std::size_t k = 15;
  std::uint64_t seed = 0;
  ScheduleConfig schedule;  // input_dim/target_dim/layers are taken from the encoder
  LossOptions loss;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clip; 0 disables.
  double grad_clip = 1e3;
  BatchMode batch_mode = BatchMode::Full;
  /// Anchors per block in NeighborhoodBlock mode.
  std::size_t block_size = 512;
  std::size_t log_interval = 10;
};

struct HistoryRow {
  std::size_t epoch = 0;
  LossBreakdown loss;
};

struct TrainResult {
  std::vector<HistoryRow> history;
  AdamState adam;
  double push_radius = 0.0;
};

/// Raised when a loss component becomes NaN/Inf.
class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(std::size_t epoch, std::string component);
  std::size_t epoch() const noexcept { return epoch_; }
  const std::string& component() const noexcept { return component_; }

 private:
  std::size_t epoch_;
  std::string component_;
};

using EpochCallback = std::function<void(const HistoryRow&)>;

/// Adam on the scheduled total loss for `config.epochs` epochs.
///
/// Full mode takes one step per epoch on the whole set. Block mode shuffles
/// anchors each epoch and takes one step per block; each block carries every
/// anchor's complete input neighbourhood and the history sums the blocks.
/// History rows are the pre-step losses of every `log_interval`-th epoch and
/// of the final epoch.
TrainResult train(InvMLEncoder& enc, const Matrix& x, const TrainConfig& config,
                  const EpochCallback& on_log = {});

void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> history);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  InvMLEncoder encoder;
  AdamState adam;
  std::uint64_t epoch = 0;
  std::string config_echo;
};

/// Little-endian binary: "IMLE", version, dims, s_l list, scalars, matrices
/// (body, head, extra heads, Adam moments) as row-major f64, config echo,
/// then CRC32 of everything before it.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace invml
