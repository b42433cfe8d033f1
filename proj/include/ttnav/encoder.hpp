#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ttnav/geometry.hpp"
#include "ttnav/point_cloud.hpp"

namespace ttnav {

enum class LayerKind : std::uint32_t { linear = 0, layernorm = 1, tanh = 2, relu = 3 };

// One layer of the encoder. Linear layers hold W (out x in) and bias (out);
// layernorm holds gain in W (dim x 1) and shift in bias; activations hold no
// parameters.
struct EncoderLayer {
  LayerKind kind = LayerKind::linear;
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

// MLP mapping polygon-local points to predicted dual variables mu.
// Block structure: [linear -> layernorm -> tanh] [linear -> relu], stacked
// depth_blocks times with 16 hidden units, then a final linear to l_i
// outputs. Inference output is clamped to >= 0; training sees raw outputs.
struct EncoderNetwork {
  std::vector<EncoderLayer> layers;
  int input_dim = 2;
  int hidden_dim = 16;
  int output_dim = 0;
  int depth_blocks = 2;
  std::uint64_t polygon_id = 0;
};

EncoderNetwork make_encoder(const ConvexPolygon& poly, int depth_blocks,
                            std::uint64_t init_seed);

// Batched inference: rows are points, output rows are clamped mu estimates.
// Throws DimensionMismatch when the input width is not input_dim.
Eigen::MatrixXd forward(const EncoderNetwork& net, const Eigen::MatrixXd& points);

// Raw (unclamped) outputs, used by training and the gradient checks.
Eigen::MatrixXd forward_raw(const EncoderNetwork& net,
                            const Eigen::MatrixXd& points);

struct LayerGrads {
  Eigen::MatrixXd dW;
  Eigen::VectorXd db;
};

// Supervised loss on raw outputs:
//   mean_j( |mu_hat_j - mu_j|^2 + ((mu_hat_j - mu_j)^T a_j)^2 ),
// a_j = G p_j - h. The second term supervises the reconstructed distance.
double encoder_loss(const EncoderNetwork& net, const ConvexPolygon& poly,
                    const Eigen::MatrixXd& points, const Eigen::MatrixXd& labels,
                    double* distance_mse = nullptr);

// Same loss with hand-derived backprop through every layer; fills one
// gradient slot per layer (empty for activation layers).
double encoder_loss_and_gradients(const EncoderNetwork& net,
                                  const ConvexPolygon& poly,
                                  const Eigen::MatrixXd& points,
                                  const Eigen::MatrixXd& labels,
                                  std::vector<LayerGrads>& grads);

struct TrainingDataset {
  Eigen::MatrixXd points;     // M x 2, polygon-local
  Eigen::MatrixXd labels_mu;  // M x l_i
  std::uint64_t polygon_id = 0;
};

// Samples points uniformly in [-30, 30]^2 and labels them with converged
// dual solutions; non-converged samples are redrawn. Deterministic per seed.
// Throws SolverFailure when redraws exceed 3x n_samples.
TrainingDataset generate_dataset(const ConvexPolygon& poly, int n_samples,
                                 std::uint64_t seed);

struct TrainConfig {
  int epochs = 2000;
  int batch_size = 1024;
  double learning_rate = 1e-3;
  double lr_final = 1e-5;  // cosine-decay floor; set equal to learning_rate
                           // for a constant rate
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double split = 0.8;  // train fraction
  std::uint64_t seed = 0;
  int depth_blocks = 2;
  int eval_every = 10;  // held-out evaluation cadence, epochs
};

struct TrainCurvePoint {
  int epoch = 0;
  double train_loss = 0;
  double test_loss = 0;
  double distance_mse = 0;
};

struct TrainResult {
  EncoderNetwork net;  // snapshot with the best held-out loss
  std::vector<TrainCurvePoint> curve;
  int best_epoch = 0;
  double best_test_loss = 0;
};

// Adam on the two-term loss. Throws NonFiniteLoss on divergence.
TrainResult train(const ConvexPolygon& poly, const TrainingDataset& data,
                  const TrainConfig& cfg);

struct DistancePrediction {
  std::vector<double> distances;
  double min_distance = 0;
};

// Encoder-backed point-to-polygon distances for a world-frame cloud.
// Points inside the polygon (exact half-space test) get the exact
// penetration depth instead of the learned value. Throws EmptyCloud.
DistancePrediction predict_distance(const EncoderNetwork& net,
                                    const ConvexPolygon& poly, const Pose2D& pose,
                                    const PointCloud& cloud);

// Same computation on already-local points (rows), without the cloud
// plumbing; hot path for batched rollout queries.
Eigen::VectorXd encoder_distances_local(const EncoderNetwork& net,
                                        const ConvexPolygon& poly,
                                        const Eigen::MatrixXd& local_points);

// Little-endian weight serialization: magic, version, polygon id hash,
// layer count, then per layer (kind, rows, cols, row-major weights, bias).
std::vector<std::uint8_t> save_weights(const EncoderNetwork& net);
EncoderNetwork load_weights(const std::vector<std::uint8_t>& bytes);

void save_weights_file(const EncoderNetwork& net, const std::filesystem::path& path);
EncoderNetwork load_weights_file(const std::filesystem::path& path);

// Loads and verifies the weights against the polygon they will serve:
// wrong edge count raises DimensionMismatch, wrong geometry hash raises
// CorruptWeights.
EncoderNetwork load_weights_file(const std::filesystem::path& path,
                                 const ConvexPolygon& expected);

}  // namespace ttnav
