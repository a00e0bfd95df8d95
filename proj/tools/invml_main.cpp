#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "invml/config.hpp"
#include "invml/error.hpp"
#include "invml/experiment.hpp"
#include "invml/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

int exit_code_for(invml::ErrorCode code) {
  using invml::ErrorCode;
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::DimMismatch:
    case ErrorCode::InvalidArgument:
    case ErrorCode::KTooLarge:
    case ErrorCode::KRangeInvalid:
    case ErrorCode::MissingLabels:
      return kExitConfig;
    case ErrorCode::IoError:
    case ErrorCode::BadMagic:
    case ErrorCode::TruncatedFile:
    case ErrorCode::CountMismatch:
    case ErrorCode::VersionMismatch:
    case ErrorCode::ChecksumMismatch:
      return kExitIo;
    default:
      return kExitNumeric;
  }
}

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string profile;
  bool quick = false;
};

invml::ExperimentConfig resolve(const GlobalFlags& f, bool check = true) {
  invml::ExperimentConfig c = invml::profile_config(f.profile.empty() ? "swissroll" : f.profile);
  if (!f.config.empty()) c = invml::load_config(f.config, c);
  if (!f.profile.empty() && c.profile != f.profile) {
    // --profile wins over a profile named inside the file.
    c = invml::profile_config(f.profile);
    if (!f.config.empty()) c = invml::load_config(f.config, c);
    c.profile = f.profile;
  }
  if (f.seed) {
    c.trainer.seed = *f.seed;
    c.dataset.seed = *f.seed;
  }
  if (f.quick) invml::apply_quick(c);
  if (!f.out.empty()) c.output.dir = f.out;
  if (check) invml::validate(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Invertible manifold-learning encoder: train, evaluate, interpolate"};
  app.require_subcommand(1);
  GlobalFlags flags;
  app.add_option("--config", flags.config, "INI configuration overlaid on the profile")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", flags.seed, "Seed for data generation and training");
  app.add_option("--out", flags.out, "Output directory");
  std::vector<std::string> profiles = invml::profile_names();
  app.add_option("--profile", flags.profile, "Dataset profile")->check(CLI::IsMember(profiles));
  app.add_flag("--quick", flags.quick, "Scale epochs and sample counts down 5x");

  std::string checkpoint;
  std::vector<std::string> combos;
  std::string mode;
  std::optional<std::size_t> sparsity;
  bool quiet = false;
  app.add_flag("--quiet", quiet, "Suppress training progress");

  auto* generate = app.add_subcommand("generate", "Write the dataset as CSV (and a scatter plot)");
  auto* stats = app.add_subcommand("stats", "Dataset difficulty statistics");
  auto* train = app.add_subcommand("train", "Train; writes checkpoint, history and manifest");
  auto* evaluate = app.add_subcommand("evaluate", "Metrics at layers L and L-1");
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate one model per loss combination");
  auto* interpolate = app.add_subcommand("interpolate", "kNN or geodesic latent interpolation");
  auto* reconstruct = app.add_subcommand("reconstruct", "Invert the head and body");
  auto* show = app.add_subcommand("config", "Print the resolved configuration as INI");
  for (auto* sub : {evaluate, interpolate, reconstruct}) {
    sub->add_option("--checkpoint", checkpoint, "Checkpoint (default <out>/checkpoint.bin)");
  }
  ablate->add_option("--combos", combos, "e.g. ex+orth+pad ex+orth orth baseline")
      ->required()
      ->expected(1, -1);
  interpolate->add_option("--mode", mode, "knn or geodesic")
      ->check(CLI::IsMember({"knn", "geodesic"}));
  reconstruct->add_option("--sparsity", sparsity, "OMP sparsity; 0 uses least squares");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    // Printing a profile must not require its data files.
    invml::ExperimentConfig c = resolve(flags, !show->parsed());
    if (!mode.empty()) c.interpolation.mode = mode;
    if (sparsity) c.interpolation.sparsity = *sparsity;
    if (!show->parsed()) invml::validate(c);
    const std::filesystem::path out = c.output.dir;
    const std::filesystem::path ckpt = checkpoint.empty() ? out / "checkpoint.bin" : std::filesystem::path(checkpoint);
    std::ostream* log = quiet ? nullptr : &std::cout;

    if (show->parsed()) std::cout << invml::to_ini(c);
    if (generate->parsed()) invml::cmd_generate(c, out);
    if (stats->parsed()) invml::cmd_stats(c, out);
    if (train->parsed()) invml::cmd_train(c, out, log);
    if (evaluate->parsed()) invml::cmd_evaluate(c, ckpt, out);
    if (ablate->parsed()) invml::cmd_ablate(c, combos, out, log);
    if (interpolate->parsed()) invml::cmd_interpolate(c, ckpt, out);
    if (reconstruct->parsed()) invml::cmd_reconstruct(c, ckpt, out);
  } catch (const invml::NonFiniteLossError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const invml::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitOk;
}
