#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vdscan/clips.hpp"
#include "vdscan/voting.hpp"

namespace vdscan {

enum class ModelKind { BuiltinLinear, ExternalGraph };

/// Tensor layout an external graph expects for one clip.
enum class InputLayout {
  Nthwc,  // 1 x 16 x 224 x 224 x 3
  Ncthw   // 1 x 3 x 16 x 224 x 224
};

/// Pooled clip descriptor used by the built-in baseline: per-channel mean,
/// standard deviation, spatial-gradient magnitude, and temporal difference.
inline constexpr std::size_t kFeatureCount = 12;
using ClipFeatures = std::array<double, kFeatureCount>;

ClipFeatures clip_features(const ClipTensor& clip);

/// Logistic model over standardized clip features.
struct LinearWeights {
  ClipFeatures feature_mean{};
  ClipFeatures feature_scale{};  // all ones means "not standardized"
  ClipFeatures weights{};
  double bias = 0.0;

  LinearWeights() { feature_scale.fill(1.0); }

  double score(const ClipFeatures& features) const;
  double probability(const ClipFeatures& features) const;
};

/// Scores one normalized clip. Implementations are immutable and thread-safe.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual double predict(const ClipTensor& clip) const = 0;
};

/// A loaded model: identity, card metadata, and a backend. Immutable after
/// load; copies share the backend.
struct ModelHandle {
  std::string model_id;
  ModelKind kind = ModelKind::BuiltinLinear;
  NormStats norm_stats;
  std::filesystem::path artifact_path;
  InputLayout input_layout = InputLayout::Nthwc;
  std::shared_ptr<const ModelBackend> backend;
  /// Present for BuiltinLinear models.
  std::shared_ptr<const LinearWeights> linear;
};

/// Wraps in-memory linear weights as a model handle.
ModelHandle make_builtin_model(std::string model_id, const NormStats& stats, const LinearWeights& weights);

/// True when this build can execute ExternalGraph (ONNX) artifacts.
bool external_graph_supported();

/// Parses a model card and loads its artifact. Throws ModelLoadError.
ModelHandle load_model(const std::filesystem::path& card_path);

/// Writes the card plus, for builtin models, the weights artifact next to it.
void save_model(const ModelHandle& model, const std::filesystem::path& card_path);

ClipPrediction predict_clip(const ModelHandle& model, const ClipTensor& clip);

struct LabeledFeatures {
  ClipFeatures features{};
  int label = 0;
};

struct TrainOptions {
  int epochs = 40;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  std::size_t batch_size = 32;
  bool class_weighting = true;
};

/// Class-weighted logistic regression with seeded mini-batch SGD.
LinearWeights train_linear(std::span<const LabeledFeatures> samples, const TrainOptions& options);

/// Convenience: features from normalized clips, then train_linear.
ModelHandle train_builtin(std::span<const ClipTensor> clips, std::span<const int> labels, const NormStats& stats,
                          const TrainOptions& options, std::string model_id = "builtin-linear");

struct ParityResult {
  std::size_t n = 0;
  double agreement = 0.0;     // fraction of matching labels
  double max_abs_diff = 0.0;  // max |prob - recorded prob|
};

/// Replays a parity file (`clip_file <TAB> prob` per line, paths relative to
/// the parity file) through the model. Clip files hold unnormalized exports.
ParityResult check_parity(const ModelHandle& model, const std::filesystem::path& parity_file);

}  // namespace vdscan
