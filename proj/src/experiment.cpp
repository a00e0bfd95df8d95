#include "invml/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "invml/interpolation.hpp"
#include "invml/linalg.hpp"
#include "invml/plot.hpp"

namespace invml {
namespace {

namespace fs = std::filesystem;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

Dataset generate(const ExperimentConfig& c, std::size_t n, std::uint64_t seed) {
  const auto& d = c.dataset;
  if (d.kind == "swissroll") return gen_swiss_roll(n, seed);
  SpheresOptions o;
  o.n = n;
  o.ambient_dim = d.ambient_dim;
  o.intrinsic_dim = d.intrinsic_dim;
  o.half = d.kind == "halfspheres";
  return gen_spheres(o, seed);
}

void standardize(DataSplit& split) {
  Matrix& x = split.train.x;
  const std::size_t n = x.rows();
  const std::size_t m = x.cols();
  std::vector<double> mean(m, 0.0);
  std::vector<double> sd(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) mean[j] += x(i, j);
  }
  for (double& v : mean) v /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) sd[j] += (x(i, j) - mean[j]) * (x(i, j) - mean[j]);
  }
  // Constant features keep unit scale so they stay at zero.
  for (double& v : sd) v = v > 0.0 ? std::sqrt(v / static_cast<double>(n)) : 1.0;
  const auto apply = [&](Matrix& a) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < m; ++j) a(i, j) = (a(i, j) - mean[j]) / sd[j];
    }
  };
  apply(split.eval.x);
  apply(x);
}

/// Embedding coordinates for plotting: PCA to 2-D when s' > 2.
Matrix plot_coordinates(const Matrix& z) {
  if (z.cols() == 2) return z;
  if (z.cols() < 2) {
    Matrix out(z.rows(), 2);
    for (std::size_t i = 0; i < z.rows(); ++i) out(i, 0) = z(i, 0);
    return out;
  }
  return pca_project(z, 2);
}

void warn(const std::string& what) { std::clog << "warning: " << what << '\n'; }

void fill_common(MetricsReport& r, const Matrix& x, const Matrix& z, const Dataset& data,
                 const NeighborGraph& graph, const MetricsSpec& spec, std::uint64_t seed) {
  r.k1 = spec.k1;
  r.k2 = spec.k2;
  const NeighborhoodScores tc = trust_and_continuity(x, z, spec.k1, spec.k2);
  r.trust = tc.trust;
  r.cont = tc.cont;
  const BiLipschitz bl = bi_lipschitz(x, z, graph);
  r.k_min = bl.k_min;
  r.k_max = bl.k_max;
  r.skipped_pairs = bl.skipped_pairs;
  r.l_mse = latent_mse(x, z, seed, spec.lmse_rows);
  r.rank_sparsity = svd_rank(z, spec.rank_tol).rank;
  if (!spec.accuracy) return;
  if (!data.labels) {
    warn("accuracy requested but the dataset has no labels; Acc left empty");
    return;
  }
  try {
    r.acc_logistic = acc_logistic_10fold(z, *data.labels, seed);
    r.acc_knn = acc_knn(z, *data.labels, 5, seed);
  } catch (const Error& e) {
    warn(std::string("accuracy skipped: ") + e.what());
    r.acc_logistic.reset();
    r.acc_knn.reset();
  }
}

Checkpoint load_matching(const fs::path& path, const Dataset& data) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.encoder.input_dim() != data.dim()) {
    throw Error(ErrorCode::DimMismatch,
                "checkpoint expects m = " + std::to_string(ck.encoder.input_dim()) +
                    " but the dataset has " + std::to_string(data.dim()) + " columns");
  }
  return ck;
}

void write_rows_csv(const fs::path& path, const std::string& header,
                    const std::vector<std::string>& rows) {
  std::ostringstream s;
  s << header << '\n';
  for (const auto& r : rows) s << r << '\n';
  write_text(path, s.str());
}

std::string matrix_row(std::span<const double> v) {
  std::string out;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (j) out += ',';
    out += num(v[j]);
  }
  return out;
}

void write_strip(const fs::path& path, const Dataset& data, const Matrix& frames) {
  const auto strip = image_strip(frames, data.image_width, data.image_height);
  write_pgm(path, strip, data.image_width * frames.rows(), data.image_height);
}

}  // namespace

DataSplit load_data(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  DataSplit split;
  if (d.kind == "swissroll" || d.kind == "spheres" || d.kind == "halfspheres") {
    split.train = generate(c, d.n, d.seed);
    // Held-out samples come from an independent stream of the same generator.
    split.eval = d.test_n ? generate(c, d.test_n, d.seed + 1) : split.train;
  } else {
    Dataset all;
    if (d.kind == "idx") {
      std::optional<fs::path> labels;
      if (!d.labels.empty()) labels = d.labels;
      all = load_idx(d.images, labels, d.downsample16);
    } else {
      all = load_csv(d.csv, d.csv_labels);
    }
    const std::size_t n_train = std::min(d.n, all.size());
    auto [train, rest] = train_test_split(all, n_train, d.seed);
    split.train = std::move(train);
    if (d.test_n && rest.size() > 0) {
      std::vector<std::size_t> rows(std::min(d.test_n, rest.size()));
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      split.eval = subset(rest, rows);
    } else {
      split.eval = split.train;
    }
  }
  if (d.standardize) standardize(split);
  if (c.model.target_dim > split.train.dim()) {
    throw Error(ErrorCode::ConfigError, "[model] target_dim: s' = " +
                                            std::to_string(c.model.target_dim) +
                                            " exceeds input dimension m = " +
                                            std::to_string(split.train.dim()));
  }
  return split;
}

InvMLEncoder make_encoder(const ExperimentConfig& c, std::size_t input_dim) {
  const ActivationSpec act{c.model.leaky_alpha};
  if (c.model.init == "identity") {
    return InvMLEncoder::identity(input_dim, c.model.target_dim, c.model.layers, act);
  }
  return InvMLEncoder::initialized(input_dim, c.model.target_dim, c.model.layers, c.trainer.seed,
                                   act);
}

std::vector<MetricsReport> evaluate_encoder(const InvMLEncoder& enc, const Dataset& data,
                                            const MetricsSpec& spec, std::uint64_t seed) {
  const Matrix& x = data.x;
  const ForwardTrace trace = forward(enc, x, false);
  const NeighborGraph graph = knn_graph(x, spec.lipschitz_k);

  MetricsReport top;
  top.layer = "L";
  fill_common(top, x, trace.embedding, data, graph, spec, seed);
  try {
    const Matrix z_hat = invert_head_least_squares(enc, trace.embedding);
    top.rmse = rmse(x, inverse_body(enc, z_hat));
    top.mne = mne(layer_round_trips(enc, trace, z_hat));
  } catch (const Error& e) {
    warn(std::string("layer L reconstruction skipped: ") + e.what());
  }

  MetricsReport body;
  body.layer = "L-1";
  const Matrix& z = trace.body_output();
  fill_common(body, x, z, data, graph, spec, seed);
  body.rmse = rmse(x, inverse_body(enc, z));
  body.mne = mne(layer_round_trips(enc, trace, z));
  return {top, body};
}

TrainRun run_training(const ExperimentConfig& c, const Dataset& train, std::ostream* log) {
  TrainRun run{make_encoder(c, train.dim()), {}};
  EpochCallback cb;
  if (log) {
    cb = [log](const HistoryRow& r) {
      *log << "epoch " << r.epoch << " total " << r.loss.total << " orth " << r.loss.orth
           << " pad " << r.loss.pad << " lis " << r.loss.lis << " push " << r.loss.push
           << " extra " << r.loss.extra << '\n';
    };
  }
  run.result = invml::train(run.encoder, train.x, c.trainer, cb);
  return run;
}

Combo parse_combo(const std::string& text) {
  Combo c;
  c.name = text;
  if (text == "baseline") return c;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, '+')) {
    std::string p = part;
    std::ranges::transform(p, p.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (p == "ex") {
      c.ex = true;
    } else if (p == "orth") {
      c.orth = true;
    } else if (p == "pad") {
      c.pad = true;
    } else {
      throw Error(ErrorCode::ConfigError,
                  "[ablate] combo: unknown term '" + part + "' (expected ex, orth, pad or baseline)");
    }
  }
  if (!c.ex && !c.orth && !c.pad) {
    throw Error(ErrorCode::ConfigError, "[ablate] combo: '" + text + "' names no loss term");
  }
  return c;
}

ExperimentConfig with_combo(ExperimentConfig config, const Combo& combo) {
  config.trainer.schedule.use_extra = combo.ex;
  config.trainer.schedule.use_orth = combo.orth;
  config.trainer.schedule.use_pad = combo.pad;
  return config;
}

void cmd_generate(const ExperimentConfig& c, const fs::path& out) {
  ensure_dir(out);
  const DataSplit split = load_data(c);
  save_csv(out / "train.csv", split.train);
  if (c.dataset.test_n) save_csv(out / "eval.csv", split.eval);
  if (c.output.plots && split.train.dim() >= 2) {
    write_text(out / "train.svg",
               scatter_svg(plot_coordinates(split.train.x), split.train.labels, split.train.name));
  }
}

void cmd_stats(const ExperimentConfig& c, const fs::path& out) {
  ensure_dir(out);
  const DataSplit split = load_data(c);
  const bool acc = c.metrics.accuracy && split.train.labels.has_value();
  const DatasetStats s = dataset_stats(split.train, 256, c.dataset.seed, acc);
  const auto opt = [](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
  write_rows_csv(out / "stats.csv", "n,m,entropy_mean,hist_std_mean,knn_acc,logistic_acc",
                 {std::to_string(split.train.size()) + ',' + std::to_string(split.train.dim()) +
                  ',' + num(s.entropy_mean) + ',' + num(s.hist_std_mean) + ',' +
                  opt(s.knn_acc) + ',' + opt(s.logistic_acc)});
}

void cmd_train(const ExperimentConfig& c, const fs::path& out, std::ostream* log) {
  ensure_dir(out);
  const DataSplit split = load_data(c);
  TrainRun run = run_training(c, split.train, log);
  write_history_csv(out / "history.csv", run.result.history);
  Checkpoint ck;
  ck.encoder = std::move(run.encoder);
  ck.adam = std::move(run.result.adam);
  ck.epoch = c.trainer.epochs;
  ck.config_echo = to_ini(c);
  save_checkpoint(out / "checkpoint.bin", ck);
  write_text(out / "manifest.ini", ck.config_echo);
}

void cmd_evaluate(const ExperimentConfig& c, const fs::path& checkpoint, const fs::path& out) {
  ensure_dir(out);
  const DataSplit split = load_data(c);
  const Checkpoint ck = load_matching(checkpoint, split.eval);
  const auto reports = evaluate_encoder(ck.encoder, split.eval, c.metrics, c.trainer.seed);
  std::vector<std::string> rows;
  for (const auto& r : reports) rows.push_back(to_csv_row(r));
  write_rows_csv(out / "metrics.csv", csv_header(), rows);
  if (c.output.plots) {
    const Matrix y = embed(ck.encoder, split.eval.x);
    write_text(out / "embedding.svg",
               scatter_svg(plot_coordinates(y), split.eval.labels, "embedding (" + c.profile + ")"));
  }
}

void cmd_ablate(const ExperimentConfig& c, const std::vector<std::string>& combos,
                const fs::path& out, std::ostream* log) {
  if (combos.empty()) throw Error(ErrorCode::ConfigError, "[ablate] combos: list is empty");
  std::vector<Combo> parsed;
  for (const auto& text : combos) parsed.push_back(parse_combo(text));
  ensure_dir(out);
  const DataSplit split = load_data(c);
  std::vector<std::string> rows;
  for (const Combo& combo : parsed) {
    if (log) *log << "combo " << combo.name << '\n';
    const ExperimentConfig cc = with_combo(c, combo);
    const TrainRun run = run_training(cc, split.train, nullptr);
    for (const auto& r : evaluate_encoder(run.encoder, split.eval, c.metrics, c.trainer.seed)) {
      rows.push_back(combo.name + ',' + to_csv_row(r));
    }
  }
  write_rows_csv(out / "ablation.csv", "combo," + csv_header(), rows);
}

void cmd_interpolate(const ExperimentConfig& c, const fs::path& checkpoint, const fs::path& out) {
  ensure_dir(out);
  const DataSplit split = load_data(c);
  const Dataset& data = split.eval;
  const Checkpoint ck = load_matching(checkpoint, data);
  const InvMLEncoder& enc = ck.encoder;
  const auto& ip = c.interpolation;
  const bool images = data.image_width > 0 && data.image_height > 0;

  if (ip.mode == "knn") {
    const NeighborGraph latent = latent_graph(enc, data.x, ip.k_max);
    KnnInterpolationOptions o;
    o.anchors = ip.anchors;
    o.t_steps = ip.t_steps;
    o.seed = c.trainer.seed;
    const auto curve = interpolation_mse_curve(enc, data.x, latent, ip.k_max, o);
    std::vector<std::string> rows;
    LineSeries series{"encoder", {}, {}};
    for (std::size_t k = 1; k <= curve.size(); ++k) {
      rows.push_back(std::to_string(k) + ',' + num(curve[k - 1]));
      series.x.push_back(static_cast<double>(k));
      series.y.push_back(curve[k - 1]);
    }
    write_rows_csv(out / "interpolation_curve.csv", "k,mse", rows);
    if (c.output.plots) {
      write_text(out / "interpolation_curve.svg",
                 line_svg(std::span(&series, 1), "kNN interpolation", "k", "MSE"));
    }
    o.k = ip.k_max;
    o.anchors = std::min<std::size_t>(ip.anchors, 4);
    const auto samples = knn_interpolate(enc, data.x, latent, o);
    std::vector<std::string> sample_rows;
    for (std::size_t p = 0; p < samples.size(); ++p) {
      const auto& s = samples[p];
      for (std::size_t r = 0; r < s.t_grid.size(); ++r) {
        sample_rows.push_back(std::to_string(p) + ',' + std::to_string(s.i) + ',' +
                              std::to_string(s.j) + ',' + num(s.t_grid[r]) + ',' +
                              num(s.mse_per_t[r]) + ',' + matrix_row(s.latent_recons.row(r)));
      }
      if (images) {
        write_strip(out / ("knn_strip_" + std::to_string(p) + ".pgm"), data, s.latent_recons);
      }
    }
    write_rows_csv(out / "interpolation_samples.csv", "pair,i,j,t,mse,x_hat...", sample_rows);
    return;
  }

  const NeighborGraph latent = latent_graph(enc, data.x, c.trainer.k);
  GeodesicOptions g;
  g.segments = ip.segments;
  g.t_steps = ip.t_steps;
  g.min_pair_rank = ip.min_pair_rank;
  g.max_hop_rank = ip.max_hop_rank;
  GeodesicResult res;
  if (ip.pair_i >= 0) {
    const auto i = static_cast<std::size_t>(ip.pair_i);
    const auto j = static_cast<std::size_t>(ip.pair_j);
    if (i >= data.size() || j >= data.size()) {
      throw Error(ErrorCode::ConfigError, "[interpolation] pair_i: index outside the dataset");
    }
    res = geodesic_interpolate(enc, data.x, latent, i, j, g);
  } else {
    // Some anchors admit no waypoint sequence; try a bounded number of others.
    constexpr std::size_t kPairAttempts = 50;
    const Matrix z = encode_body(enc, data.x);
    bool found = false;
    for (std::size_t a = 0; a < kPairAttempts && !found; ++a) {
      const auto pair = find_distant_pair(z, ip.min_pair_rank, c.trainer.seed + a, data.labels, 1);
      if (!pair) continue;
      try {
        res = geodesic_interpolate(enc, data.x, latent, pair->first, pair->second, g);
        found = true;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoValidWaypoints && e.code() != ErrorCode::DisconnectedPair) throw;
      }
    }
    if (!found) {
      throw Error(ErrorCode::NoValidWaypoints,
                  "no distant pair with an admissible waypoint sequence after " +
                      std::to_string(kPairAttempts) + " anchors");
    }
  }

  std::vector<std::string> rows;
  for (std::size_t s = 0; s < res.segments.size(); ++s) {
    const auto& seg = res.segments[s];
    for (std::size_t r = 0; r < seg.t_grid.size(); ++r) {
      rows.push_back(std::to_string(s) + ',' + std::to_string(seg.i) + ',' + std::to_string(seg.j) +
                     ',' + num(seg.t_grid[r]) + ',' + num(seg.mse_per_t[r]) + ',' +
                     matrix_row(seg.latent_recons.row(r)));
    }
  }
  write_rows_csv(out / "geodesic.csv", "segment,i,j,t,mse,x_hat...", rows);
  std::vector<std::string> path_rows;
  for (std::size_t p : res.path) {
    const bool waypoint = std::ranges::find(res.waypoints, p) != res.waypoints.end();
    path_rows.push_back(std::to_string(p) + ',' + (waypoint ? "1" : "0"));
  }
  write_rows_csv(out / "geodesic_path.csv", "index,waypoint", path_rows);
  if (images) {
    for (std::size_t s = 0; s < res.segments.size(); ++s) {
      write_strip(out / ("geodesic_strip_" + std::to_string(s) + ".pgm"), data,
                  res.segments[s].latent_recons);
    }
  }
}

void cmd_reconstruct(const ExperimentConfig& c, const fs::path& checkpoint, const fs::path& out) {
  ensure_dir(out);
  const DataSplit split = load_data(c);
  const Dataset& data = split.eval;
  const Checkpoint ck = load_matching(checkpoint, data);
  const InvMLEncoder& enc = ck.encoder;
  const ForwardTrace trace = forward(enc, data.x, false);
  const std::size_t s = c.interpolation.sparsity;
  const Matrix z_hat = s == 0 ? invert_head_least_squares(enc, trace.embedding)
                              : invert_head_sparse(enc, trace.embedding, s);
  const Matrix x_hat = inverse_body(enc, z_hat);
  double max_abs = 0.0;
  for (std::size_t i = 0; i < x_hat.rows(); ++i) {
    for (std::size_t k = 0; k < x_hat.cols(); ++k) {
      max_abs = std::max(max_abs, std::abs(x_hat(i, k) - data.x(i, k)));
    }
  }
  write_rows_csv(out / "reconstruct.csv", "method,sparsity,rmse,max_abs_error",
                 {std::string(s == 0 ? "least_squares" : "sparse") + ',' + std::to_string(s) +
                  ',' + num(rmse(data.x, x_hat)) + ',' + num(max_abs)});
  std::vector<std::string> rows;
  for (std::size_t i = 0; i < x_hat.rows(); ++i) rows.push_back(matrix_row(x_hat.row(i)));
  write_rows_csv(out / "reconstruction.csv", "x_hat...", rows);
  if (data.image_width > 0) {
    const std::size_t shown = std::min<std::size_t>(10, data.size());
    std::vector<std::size_t> idx(shown);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Matrix pairs(2 * shown, data.dim());
    for (std::size_t r = 0; r < shown; ++r) {
      std::ranges::copy(data.x.row(r), pairs.row(2 * r).begin());
      std::ranges::copy(x_hat.row(r), pairs.row(2 * r + 1).begin());
    }
    write_strip(out / "reconstruction_strip.pgm", data, pairs);
  }
}

}  // namespace invml
