#include "invml/trainer.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <zlib.h>

#include "invml/random.hpp"

namespace invml {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

bool all_finite(const LossBreakdown& b, std::string& bad) {
  const std::pair<const char*, double> parts[] = {{"orth", b.orth}, {"pad", b.pad},
                                                  {"lis", b.lis},   {"push", b.push},
                                                  {"extra", b.extra}, {"total", b.total}};
  for (const auto& [name, v] : parts) {
    if (!std::isfinite(v)) {
      bad = name;
      return false;
    }
  }
  return true;
}

LossBreakdown& operator+=(LossBreakdown& a, const LossBreakdown& b) {
  a.orth += b.orth;
  a.pad += b.pad;
  a.lis += b.lis;
  a.push += b.push;
  a.extra += b.extra;
  a.total += b.total;
  return a;
}

/// Loss and gradients for one batch; returns the breakdown.
LossBreakdown step_batch(InvMLEncoder& enc, const Matrix& x, const LocalNeighborhood& hood,
                         const ScheduleSet& schedule, const TrainConfig& config,
                         AdamState& adam, std::size_t epoch) {
  Graph g;
  const EncoderVars vars = bind_parameters(g, enc);
  const LossResult res = total_loss(g, vars, enc, x, hood, schedule, config.loss);
  std::string bad;
  if (!all_finite(res.breakdown, bad)) throw NonFiniteLossError(epoch, bad);
  g.backward(res.total);

  std::vector<Matrix> grads;
  for (const Var& v : vars.body) grads.push_back(v.grad());
  grads.push_back(vars.head.grad());
  for (const Var& v : vars.extra_heads) grads.push_back(v.grad());

  double sq = 0.0;
  for (const auto& gm : grads) {
    for (double v : gm.data()) sq += v * v;
  }
  if (!std::isfinite(sq)) throw NonFiniteLossError(epoch, "gradient");
  const double gnorm = std::sqrt(sq);
  if (config.grad_clip > 0.0 && gnorm > config.grad_clip) {
    const double s = config.grad_clip / gnorm;
    for (auto& gm : grads) gm *= s;
  }
  const auto params = parameter_list(enc);
  adam_step(params, grads, adam);
  return res.breakdown;
}

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f64(double v) { bytes(&v, 8); }
  void matrix(const Matrix& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    bytes(m.data().data(), m.size() * sizeof(double));
  }
  std::vector<unsigned char>& buffer() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const std::vector<unsigned char>& buf, std::size_t end) : buf_(buf), end_(end) {}
  void bytes(void* p, std::size_t n) {
    if (pos_ + n > end_) throw Error(ErrorCode::ChecksumMismatch, "checkpoint ends early");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, 8);
    return v;
  }
  Matrix matrix(std::size_t rows, std::size_t cols) {
    if (u32() != rows || u32() != cols) {
      throw Error(ErrorCode::ShapeMismatch, "checkpoint matrix has unexpected shape");
    }
    std::vector<double> data(rows * cols);
    bytes(data.data(), data.size() * sizeof(double));
    return Matrix(rows, cols, std::move(data));
  }
  std::size_t position() const noexcept { return pos_; }

 private:
  const std::vector<unsigned char>& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[4] = {'I', 'M', 'L', 'E'};

std::uint32_t crc_of(const unsigned char* p, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), p, static_cast<uInt>(n)));
}

}  // namespace

NonFiniteLossError::NonFiniteLossError(std::size_t epoch, std::string component)
    : Error(ErrorCode::NonFiniteLoss,
            "component '" + component + "' diverged at epoch " + std::to_string(epoch)),
      epoch_(epoch),
      component_(std::move(component)) {}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& s) {
  if (params.size() != grads.size()) {
    throw Error(ErrorCode::ShapeMismatch, "one gradient per parameter required");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    require_same_shape(*params[p], grads[p], "adam_step");
  }
  if (s.first_moment.empty()) {
    for (const Matrix* p : params) {
      s.first_moment.emplace_back(p->rows(), p->cols());
      s.second_moment.emplace_back(p->rows(), p->cols());
    }
  }
  if (s.first_moment.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state tracks a different parameter count");
  }
  ++s.step;
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    require_same_shape(*params[p], s.first_moment[p], "adam_step moments");
    auto theta = params[p]->data();
    const auto g = grads[p].data();
    auto m = s.first_moment[p].data();
    auto v = s.second_moment[p].data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
      theta[i] -= s.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + s.eps);
    }
  }
}

std::vector<Matrix*> parameter_list(InvMLEncoder& enc) {
  std::vector<Matrix*> out;
  for (auto& w : enc.body()) out.push_back(&w);
  out.push_back(&enc.head());
  for (auto& h : enc.extra_heads()) out.push_back(&h);
  return out;
}

TrainResult train(InvMLEncoder& enc, const Matrix& x, const TrainConfig& config,
                  const EpochCallback& on_log) {
  enc.validate();
  if (x.cols() != enc.input_dim()) {
    throw Error(ErrorCode::DimMismatch, "dataset has " + std::to_string(x.cols()) +
                                            " columns, encoder expects " +
                                            std::to_string(enc.input_dim()));
  }
  if (config.k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (config.log_interval == 0) throw Error(ErrorCode::InvalidArgument, "log interval must be >= 1");

  ScheduleConfig sc = config.schedule;
  sc.epochs_total = std::max<std::size_t>(config.epochs, 1);
  sc.input_dim = enc.input_dim();
  sc.target_dim = enc.target_dim();
  sc.layers = enc.layer_count();

  TrainResult result;
  result.adam.lr = config.lr;
  result.adam.beta1 = config.beta1;
  result.adam.beta2 = config.beta2;
  result.adam.eps = config.eps;
  if (config.epochs == 0) return result;

  const NeighborGraph graph = knn_graph(x, config.k);
  result.push_radius = sc.push_radius > 0.0 ? sc.push_radius : 3.0 * graph.mean_distance();
  const LocalNeighborhood full = LocalNeighborhood::from_graph(graph);
  Rng rng(config.seed);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const ScheduleSet schedule = eval_schedules(epoch, sc, result.push_radius);
    LossBreakdown sum;
    if (config.batch_mode == BatchMode::Full || config.block_size >= x.rows()) {
      sum = step_batch(enc, x, full, schedule, config, result.adam, epoch);
    } else {
      const std::vector<std::size_t> order = rng.permutation(x.rows());
      for (std::size_t b0 = 0; b0 < order.size(); b0 += config.block_size) {
        const std::size_t b1 = std::min(order.size(), b0 + config.block_size);
        const std::span<const std::size_t> anchors(order.data() + b0, b1 - b0);
        std::vector<std::size_t> members;
        const LocalNeighborhood hood = LocalNeighborhood::for_block(graph, anchors, members);
        sum += step_batch(enc, select_rows(x, members), hood, schedule, config, result.adam,
                          epoch);
      }
    }
    if (epoch % config.log_interval == 0 || epoch + 1 == config.epochs) {
      result.history.push_back({epoch, sum});
      if (on_log) on_log(result.history.back());
    }
  }
  return result;
}

void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> history) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "epoch,orth,pad,lis,push,extra,total\n";
  out << std::setprecision(17);
  for (const auto& r : history) {
    out << r.epoch << ',' << r.loss.orth << ',' << r.loss.pad << ',' << r.loss.lis << ','
        << r.loss.push << ',' << r.loss.extra << ',' << r.loss.total << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const InvMLEncoder& enc = ckpt.encoder;
  enc.validate();
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(enc.input_dim()));
  w.u32(static_cast<std::uint32_t>(enc.target_dim()));
  w.u32(static_cast<std::uint32_t>(enc.layer_count()));
  for (std::size_t l = 2; l + 1 <= enc.layer_count(); ++l) {
    w.u32(static_cast<std::uint32_t>(enc.extra_dims()[l]));
  }
  w.u64(ckpt.epoch);
  w.u64(ckpt.adam.step);
  w.f64(ckpt.adam.lr);
  w.f64(ckpt.adam.beta1);
  w.f64(ckpt.adam.beta2);
  w.f64(ckpt.adam.eps);
  w.f64(enc.activation().alpha);

  for (const auto& m : enc.body()) w.matrix(m);
  w.matrix(enc.head());
  for (const auto& m : enc.extra_heads()) w.matrix(m);
  const std::size_t n_params = enc.body().size() + 1 + enc.extra_heads().size();
  const bool has_moments = !ckpt.adam.first_moment.empty();
  if (has_moments && (ckpt.adam.first_moment.size() != n_params ||
                      ckpt.adam.second_moment.size() != n_params)) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match encoder");
  }
  w.u32(has_moments ? 1 : 0);
  if (has_moments) {
    for (const auto& m : ckpt.adam.first_moment) w.matrix(m);
    for (const auto& m : ckpt.adam.second_moment) w.matrix(m);
  }
  w.u32(static_cast<std::uint32_t>(ckpt.config_echo.size()));
  w.bytes(ckpt.config_echo.data(), ckpt.config_echo.size());
  auto& buf = w.buffer();
  w.u32(crc_of(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0) {
    if (buf.size() < 4) throw Error(ErrorCode::ChecksumMismatch, "checkpoint too short");
    throw Error(ErrorCode::BadMagic, path.string() + " is not a checkpoint");
  }
  if (buf.size() < 12) throw Error(ErrorCode::ChecksumMismatch, "checkpoint too short");
  std::uint32_t version;
  std::memcpy(&version, buf.data() + 4, 4);
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(version) +
                                                ", expected " +
                                                std::to_string(kCheckpointVersion));
  }
  const std::size_t body_end = buf.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, buf.data() + body_end, 4);
  if (crc_of(buf.data(), body_end) != stored) {
    throw Error(ErrorCode::ChecksumMismatch, path.string() + " failed its CRC check");
  }

  Reader r(buf, body_end);
  char magic[4];
  r.bytes(magic, 4);
  r.u32();
  const std::size_t m = r.u32();
  const std::size_t s = r.u32();
  const std::size_t L = r.u32();
  if (L < 3 || L > 4096) throw Error(ErrorCode::ShapeMismatch, "implausible layer count");
  std::vector<std::size_t> dims(L, 0);
  for (std::size_t l = 2; l + 1 <= L; ++l) dims[l] = r.u32();

  Checkpoint ck;
  ck.epoch = r.u64();
  ck.adam.step = r.u64();
  ck.adam.lr = r.f64();
  ck.adam.beta1 = r.f64();
  ck.adam.beta2 = r.f64();
  ck.adam.eps = r.f64();
  const double alpha = r.f64();

  InvMLEncoder enc(m, s, L, ActivationSpec{alpha});
  if (enc.extra_dims() != dims) {
    throw Error(ErrorCode::ShapeMismatch, "stored layer dims disagree with the schedule formula");
  }
  for (auto& w : enc.body()) w = r.matrix(m, m);
  enc.head() = r.matrix(s, m);
  for (std::size_t l = 2; l + 1 <= L; ++l) enc.extra_heads()[l - 2] = r.matrix(dims[l], m);
  if (r.u32() != 0) {
    for (int pass = 0; pass < 2; ++pass) {
      auto& dst = pass == 0 ? ck.adam.first_moment : ck.adam.second_moment;
      for (const Matrix* p : parameter_list(enc)) dst.push_back(r.matrix(p->rows(), p->cols()));
    }
  }
  const std::uint32_t echo_len = r.u32();
  ck.config_echo.resize(echo_len);
  r.bytes(ck.config_echo.data(), echo_len);
  if (r.position() != body_end) throw Error(ErrorCode::ChecksumMismatch, "trailing bytes");
  ck.encoder = std::move(enc);
  return ck;
}

}  // namespace invml
