#include "ttnav/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "ttnav/errors.hpp"
#include "ttnav/rng.hpp"

namespace ttnav {

namespace {

constexpr double kLayerNormEps = 1e-5;

EncoderLayer xavier_linear(int out, int in, RngStream& rng) {
  EncoderLayer layer;
  layer.kind = LayerKind::linear;
  layer.W.resize(out, in);
  const double limit = std::sqrt(6.0 / (in + out));
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < in; ++c) layer.W(r, c) = rng.uniform(-limit, limit);
  layer.b = Eigen::VectorXd::Zero(out);
  return layer;
}

EncoderLayer layernorm_layer(int dim) {
  EncoderLayer layer;
  layer.kind = LayerKind::layernorm;
  layer.W = Eigen::MatrixXd::Ones(dim, 1);   // gain
  layer.b = Eigen::VectorXd::Zero(dim);      // shift
  return layer;
}

EncoderLayer activation_layer(LayerKind kind) {
  EncoderLayer layer;
  layer.kind = kind;
  return layer;
}

// Distance coefficients a_j = G p_j - h for a batch of local points.
Eigen::MatrixXd distance_coeffs(const ConvexPolygon& poly,
                                const Eigen::MatrixXd& points) {
  return (points * poly.G.transpose()).rowwise() - poly.h.transpose();
}

}  // namespace

EncoderNetwork make_encoder(const ConvexPolygon& poly, int depth_blocks,
                            std::uint64_t init_seed) {
  EncoderNetwork net;
  net.output_dim = poly.edge_count();
  net.depth_blocks = depth_blocks;
  net.polygon_id = polygon_hash(poly);
  RngStream rng(mix_seed(init_seed, net.polygon_id));

  int in = net.input_dim;
  for (int b = 0; b < depth_blocks; ++b) {
    net.layers.push_back(xavier_linear(net.hidden_dim, in, rng));
    net.layers.push_back(layernorm_layer(net.hidden_dim));
    net.layers.push_back(activation_layer(LayerKind::tanh));
    net.layers.push_back(xavier_linear(net.hidden_dim, net.hidden_dim, rng));
    net.layers.push_back(activation_layer(LayerKind::relu));
    in = net.hidden_dim;
  }
  net.layers.push_back(xavier_linear(net.output_dim, net.hidden_dim, rng));
  return net;
}

namespace {

// Forward pass that keeps the per-layer inputs (and layernorm internals)
// needed by the backward pass.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;       // input to each layer
  std::vector<Eigen::MatrixXd> ln_xhat;      // normalized pre-gain values
  std::vector<Eigen::VectorXd> ln_inv_std;   // per-row 1/std
  Eigen::MatrixXd output;
};

void run_forward(const EncoderNetwork& net, const Eigen::MatrixXd& points,
                 ForwardCache* cache, Eigen::MatrixXd& out) {
  if (points.cols() != net.input_dim)
    throw DimensionMismatch("encoder input width mismatch");
  Eigen::MatrixXd x = points;
  const std::size_t n_layers = net.layers.size();
  if (cache) {
    cache->inputs.resize(n_layers);
    cache->ln_xhat.resize(n_layers);
    cache->ln_inv_std.resize(n_layers);
  }
  for (std::size_t i = 0; i < n_layers; ++i) {
    const auto& layer = net.layers[i];
    if (cache) cache->inputs[i] = x;
    switch (layer.kind) {
      case LayerKind::linear:
        x = (x * layer.W.transpose()).rowwise() + layer.b.transpose();
        break;
      case LayerKind::layernorm: {
        const int dim = static_cast<int>(x.cols());
        const Eigen::VectorXd mean = x.rowwise().mean();
        Eigen::MatrixXd centered = x.colwise() - mean;
        const Eigen::VectorXd var = centered.array().square().rowwise().mean();
        const Eigen::VectorXd inv_std =
            (var.array() + kLayerNormEps).sqrt().inverse();
        Eigen::MatrixXd xhat = centered.array().colwise() * inv_std.array();
        if (cache) {
          cache->ln_xhat[i] = xhat;
          cache->ln_inv_std[i] = inv_std;
        }
        x = (xhat.array().rowwise() * layer.W.col(0).transpose().array())
                .rowwise() +
            layer.b.transpose().array();
        (void)dim;
        break;
      }
      case LayerKind::tanh:
        x = x.array().tanh();
        break;
      case LayerKind::relu:
        x = x.cwiseMax(0.0);
        break;
    }
  }
  out = std::move(x);
  if (cache) cache->output = out;
}

}  // namespace

Eigen::MatrixXd forward_raw(const EncoderNetwork& net,
                            const Eigen::MatrixXd& points) {
  Eigen::MatrixXd out;
  run_forward(net, points, nullptr, out);
  return out;
}

Eigen::MatrixXd forward(const EncoderNetwork& net, const Eigen::MatrixXd& points) {
  return forward_raw(net, points).cwiseMax(0.0);
}

double encoder_loss(const EncoderNetwork& net, const ConvexPolygon& poly,
                    const Eigen::MatrixXd& points, const Eigen::MatrixXd& labels,
                    double* distance_mse) {
  const Eigen::MatrixXd out = forward_raw(net, points);
  const Eigen::MatrixXd diff = out - labels;
  const Eigen::MatrixXd coeffs = distance_coeffs(poly, points);
  // The distance term goes through the inference-time clamp; otherwise
  // signed components co-adapt so that errors cancel in the raw sum and the
  // served (clamped) distances are far less accurate than the loss reports.
  const Eigen::MatrixXd clamped_diff = out.cwiseMax(0.0) - labels;
  const Eigen::VectorXd dist_err =
      (clamped_diff.array() * coeffs.array()).rowwise().sum();
  const double n = static_cast<double>(points.rows());
  if (distance_mse) *distance_mse = dist_err.squaredNorm() / n;
  return (diff.squaredNorm() + dist_err.squaredNorm()) / n;
}

double encoder_loss_and_gradients(const EncoderNetwork& net,
                                  const ConvexPolygon& poly,
                                  const Eigen::MatrixXd& points,
                                  const Eigen::MatrixXd& labels,
                                  std::vector<LayerGrads>& grads) {
  ForwardCache cache;
  Eigen::MatrixXd out;
  run_forward(net, points, &cache, out);

  const double n = static_cast<double>(points.rows());
  const Eigen::MatrixXd diff = out - labels;
  const Eigen::MatrixXd coeffs = distance_coeffs(poly, points);
  // Distance term through the clamp (see encoder_loss); the mu term stays on
  // raw outputs so negative components still receive gradient.
  const Eigen::MatrixXd clamped_diff = out.cwiseMax(0.0) - labels;
  const Eigen::VectorXd dist_err =
      (clamped_diff.array() * coeffs.array()).rowwise().sum();
  const double loss = (diff.squaredNorm() + dist_err.squaredNorm()) / n;

  // dL/dout = (2/n) (diff + dist_err * a_j .* 1[out > 0])
  const Eigen::MatrixXd clamp_mask =
      (out.array() > 0.0).cast<double>().matrix();
  Eigen::MatrixXd delta =
      (2.0 / n) *
      (diff + (coeffs.array().colwise() * dist_err.array() * clamp_mask.array())
                  .matrix());

  grads.assign(net.layers.size(), {});
  for (int i = static_cast<int>(net.layers.size()) - 1; i >= 0; --i) {
    const auto& layer = net.layers[i];
    const Eigen::MatrixXd& x = cache.inputs[i];
    switch (layer.kind) {
      case LayerKind::linear:
        grads[i].dW = delta.transpose() * x;
        grads[i].db = delta.colwise().sum();
        delta = delta * layer.W;
        break;
      case LayerKind::layernorm: {
        const Eigen::MatrixXd& xhat = cache.ln_xhat[i];
        const Eigen::VectorXd& inv_std = cache.ln_inv_std[i];
        grads[i].dW = (delta.array() * xhat.array()).colwise().sum().transpose();
        grads[i].db = delta.colwise().sum();
        const Eigen::MatrixXd dxhat =
            delta.array().rowwise() * layer.W.col(0).transpose().array();
        const Eigen::VectorXd row_mean = dxhat.rowwise().mean();
        const Eigen::VectorXd xhat_mean =
            (dxhat.array() * xhat.array()).rowwise().mean();
        delta = ((dxhat.colwise() - row_mean).array() -
                 xhat.array().colwise() * xhat_mean.array())
                    .colwise() *
                inv_std.array();
        break;
      }
      case LayerKind::tanh: {
        const Eigen::MatrixXd y = x.array().tanh();
        delta = delta.array() * (1.0 - y.array().square());
        break;
      }
      case LayerKind::relu:
        delta = (x.array() > 0.0).select(delta, 0.0);
        break;
    }
  }
  return loss;
}

TrainingDataset generate_dataset(const ConvexPolygon& poly, int n_samples,
                                 std::uint64_t seed) {
  TrainingDataset data;
  data.polygon_id = polygon_hash(poly);
  data.points.resize(n_samples, 2);
  data.labels_mu.resize(n_samples, poly.edge_count());

  RngStream rng(mix_seed(seed, data.polygon_id, 0xDA7A));
  const Pose2D identity = Pose2D::identity();
  int filled = 0;
  long attempts = 0;
  const long max_attempts = 3L * n_samples;
  std::vector<Eigen::Vector2d> batch;
  while (filled < n_samples) {
    if (attempts >= max_attempts)
      throw SolverFailure("dual labeling kept failing to converge");
    const int want = n_samples - filled;
    batch.clear();
    for (int i = 0; i < want && attempts < max_attempts; ++i, ++attempts)
      batch.emplace_back(rng.uniform(-30.0, 30.0), rng.uniform(-30.0, 30.0));

    std::vector<DualSolution> sols(batch.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < static_cast<int>(batch.size()); ++i)
      sols[i] = solve_dual_bcd(poly, batch[i], identity);

    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (!sols[i].converged) continue;  // redraw
      data.points.row(filled) = batch[i].transpose();
      data.labels_mu.row(filled) = sols[i].mu.transpose();
      ++filled;
    }
  }
  return data;
}

namespace {

struct AdamState {
  std::vector<LayerGrads> m, v;
  long step = 0;
};

void adam_update(EncoderNetwork& net, const std::vector<LayerGrads>& grads,
                 AdamState& state, const TrainConfig& cfg, double lr) {
  ++state.step;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  constexpr double eps = 1e-8;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (grads[i].dW.size() == 0) continue;
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.dW.size() == 0) {
      m.dW = Eigen::MatrixXd::Zero(grads[i].dW.rows(), grads[i].dW.cols());
      m.db = Eigen::VectorXd::Zero(grads[i].db.size());
      v = m;
    }
    m.dW = b1 * m.dW + (1.0 - b1) * grads[i].dW;
    m.db = b1 * m.db + (1.0 - b1) * grads[i].db;
    v.dW = b2 * v.dW + (1.0 - b2) * grads[i].dW.cwiseProduct(grads[i].dW);
    v.db = b2 * v.db + (1.0 - b2) * grads[i].db.cwiseProduct(grads[i].db);
    net.layers[i].W.array() -=
        lr * (m.dW.array() / corr1) /
        ((v.dW.array() / corr2).sqrt() + eps);
    net.layers[i].b.array() -=
        lr * (m.db.array() / corr1) /
        ((v.db.array() / corr2).sqrt() + eps);
  }
}

}  // namespace

TrainResult train(const ConvexPolygon& poly, const TrainingDataset& data,
                  const TrainConfig& cfg) {
  if (data.polygon_id != polygon_hash(poly))
    throw DimensionMismatch("dataset belongs to a different polygon");
  if (cfg.split <= 0.0 || cfg.split >= 1.0)
    throw ConfigError("train split must lie in (0, 1)");

  const int total = static_cast<int>(data.points.rows());
  const int n_train = std::max(1, static_cast<int>(total * cfg.split));

  RngStream rng(mix_seed(cfg.seed, data.polygon_id, 0x7EA1));
  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());

  Eigen::MatrixXd train_x(n_train, 2), test_x(total - n_train, 2);
  Eigen::MatrixXd train_y(n_train, poly.edge_count()),
      test_y(total - n_train, poly.edge_count());
  for (int i = 0; i < total; ++i) {
    if (i < n_train) {
      train_x.row(i) = data.points.row(order[i]);
      train_y.row(i) = data.labels_mu.row(order[i]);
    } else {
      test_x.row(i - n_train) = data.points.row(order[i]);
      test_y.row(i - n_train) = data.labels_mu.row(order[i]);
    }
  }

  TrainResult result;
  EncoderNetwork net = make_encoder(poly, cfg.depth_blocks, cfg.seed);
  AdamState adam;
  adam.m.resize(net.layers.size());
  adam.v.resize(net.layers.size());

  result.best_test_loss = std::numeric_limits<double>::infinity();
  std::vector<int> batch_order(n_train);
  std::iota(batch_order.begin(), batch_order.end(), 0);
  std::vector<LayerGrads> grads;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Cosine decay from learning_rate to lr_final across the run.
    const double progress =
        cfg.epochs > 1 ? double(epoch - 1) / double(cfg.epochs - 1) : 0.0;
    const double lr = cfg.lr_final +
                      0.5 * (cfg.learning_rate - cfg.lr_final) *
                          (1.0 + std::cos(M_PI * progress));

    std::shuffle(batch_order.begin(), batch_order.end(), rng.engine());
    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < n_train; start += cfg.batch_size) {
      const int len = std::min(cfg.batch_size, n_train - start);
      Eigen::MatrixXd bx(len, 2), by(len, poly.edge_count());
      for (int i = 0; i < len; ++i) {
        bx.row(i) = train_x.row(batch_order[start + i]);
        by.row(i) = train_y.row(batch_order[start + i]);
      }
      const double loss = encoder_loss_and_gradients(net, poly, bx, by, grads);
      if (!std::isfinite(loss)) throw NonFiniteLoss("training loss diverged");
      adam_update(net, grads, adam, cfg, lr);
      epoch_loss += loss;
      ++batches;
    }

    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      double dist_mse = 0.0;
      const double test_loss = encoder_loss(net, poly, test_x, test_y, &dist_mse);
      if (!std::isfinite(test_loss)) throw NonFiniteLoss("test loss diverged");
      result.curve.push_back(
          {epoch, epoch_loss / std::max(1, batches), test_loss, dist_mse});
      if (test_loss < result.best_test_loss) {
        result.best_test_loss = test_loss;
        result.best_epoch = epoch;
        result.net = net;
      }
    }
  }
  if (result.net.layers.empty()) result.net = net;
  return result;
}

Eigen::VectorXd encoder_distances_local(const EncoderNetwork& net,
                                        const ConvexPolygon& poly,
                                        const Eigen::MatrixXd& local_points) {
  if (net.output_dim != poly.edge_count())
    throw DimensionMismatch("encoder output width does not match polygon");
  const Eigen::MatrixXd mu = forward(net, local_points);
  const Eigen::MatrixXd coeffs = distance_coeffs(poly, local_points);
  Eigen::VectorXd out(local_points.rows());
  for (int i = 0; i < local_points.rows(); ++i) {
    const double max_coeff = coeffs.row(i).maxCoeff();
    // Interior points get the exact penetration depth; the learned duals
    // carry no meaning there (their labels are zero).
    out(i) = max_coeff <= 0.0 ? max_coeff : mu.row(i).dot(coeffs.row(i));
  }
  return out;
}

DistancePrediction predict_distance(const EncoderNetwork& net,
                                    const ConvexPolygon& poly, const Pose2D& pose,
                                    const PointCloud& cloud) {
  if (cloud.empty()) throw EmptyCloud("cannot predict distances for an empty cloud");
  const int m = static_cast<int>(cloud.points.size());
  Eigen::MatrixXd local(m, 2);
  for (int i = 0; i < m; ++i)
    local.row(i) = transform_point_to_local(cloud.points[i], pose).transpose();

  const Eigen::VectorXd d = encoder_distances_local(net, poly, local);
  DistancePrediction pred;
  pred.distances.assign(d.data(), d.data() + m);
  pred.min_distance = d.minCoeff();
  return pred;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(out, bits);
}

struct Reader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > bytes.size()) throw CorruptWeights("truncated weight stream");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
};

constexpr std::uint32_t kWeightMagic = 0x57455454;  // "TTEW" little-endian
constexpr std::uint32_t kWeightVersion = 1;

}  // namespace

std::vector<std::uint8_t> save_weights(const EncoderNetwork& net) {
  std::vector<std::uint8_t> out;
  put_u32(out, kWeightMagic);
  put_u32(out, kWeightVersion);
  put_u64(out, net.polygon_id);
  put_u32(out, static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& layer : net.layers) {
    put_u32(out, static_cast<std::uint32_t>(layer.kind));
    put_u32(out, static_cast<std::uint32_t>(layer.W.rows()));
    put_u32(out, static_cast<std::uint32_t>(layer.W.cols()));
    for (int r = 0; r < layer.W.rows(); ++r)
      for (int c = 0; c < layer.W.cols(); ++c) put_f64(out, layer.W(r, c));
    put_u32(out, static_cast<std::uint32_t>(layer.b.size()));
    for (int i = 0; i < layer.b.size(); ++i) put_f64(out, layer.b(i));
  }
  return out;
}

EncoderNetwork load_weights(const std::vector<std::uint8_t>& bytes) {
  Reader r{bytes};
  if (r.u32() != kWeightMagic) throw CorruptWeights("bad magic");
  if (r.u32() != kWeightVersion) throw CorruptWeights("unsupported version");
  EncoderNetwork net;
  net.polygon_id = r.u64();
  const std::uint32_t n_layers = r.u32();
  if (n_layers == 0 || n_layers > 1024) throw CorruptWeights("bad layer count");
  int blocks = 0;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    EncoderLayer layer;
    const std::uint32_t kind = r.u32();
    if (kind > static_cast<std::uint32_t>(LayerKind::relu))
      throw CorruptWeights("unknown layer kind");
    layer.kind = static_cast<LayerKind>(kind);
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (rows > 4096 || cols > 4096) throw CorruptWeights("implausible layer size");
    layer.W.resize(rows, cols);
    for (std::uint32_t a = 0; a < rows; ++a)
      for (std::uint32_t b = 0; b < cols; ++b) layer.W(a, b) = r.f64();
    const std::uint32_t blen = r.u32();
    if (blen > 4096) throw CorruptWeights("implausible bias size");
    layer.b.resize(blen);
    for (std::uint32_t a = 0; a < blen; ++a) layer.b(a) = r.f64();
    if (layer.kind == LayerKind::layernorm) ++blocks;
    net.layers.push_back(std::move(layer));
  }
  if (r.pos != bytes.size()) throw CorruptWeights("trailing bytes");

  // Recover the summary dims and check the layer chain is consistent.
  const auto* first_linear = &net.layers.front();
  if (first_linear->kind != LayerKind::linear)
    throw CorruptWeights("network must start with a linear layer");
  net.input_dim = static_cast<int>(first_linear->W.cols());
  net.hidden_dim = static_cast<int>(first_linear->W.rows());
  net.depth_blocks = blocks;
  int width = net.input_dim;
  for (const auto& layer : net.layers) {
    switch (layer.kind) {
      case LayerKind::linear:
        if (layer.W.cols() != width || layer.b.size() != layer.W.rows())
          throw CorruptWeights("linear layer dimension chain broken");
        width = static_cast<int>(layer.W.rows());
        break;
      case LayerKind::layernorm:
        if (layer.W.rows() != width || layer.W.cols() != 1 ||
            layer.b.size() != width)
          throw CorruptWeights("layernorm dimension mismatch");
        break;
      default:
        break;
    }
  }
  net.output_dim = width;
  return net;
}

void save_weights_file(const EncoderNetwork& net,
                       const std::filesystem::path& path) {
  const auto bytes = save_weights(net);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open weight file for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

EncoderNetwork load_weights_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EncoderMissing("weight file not found: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return load_weights(bytes);
}

EncoderNetwork load_weights_file(const std::filesystem::path& path,
                                 const ConvexPolygon& expected) {
  EncoderNetwork net = load_weights_file(path);
  if (net.output_dim != expected.edge_count())
    throw DimensionMismatch("weights were trained for a polygon with " +
                            std::to_string(net.output_dim) + " edges, expected " +
                            std::to_string(expected.edge_count()));
  if (net.polygon_id != polygon_hash(expected))
    throw CorruptWeights("weights belong to a different polygon geometry");
  return net;
}

}  // namespace ttnav
