#include "vdscan/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "vdscan/error.hpp"
#include "vdscan/kv.hpp"
#include "vdscan/rng.hpp"

#ifdef VDSCAN_WITH_ONNXRUNTIME
#include <onnxruntime_cxx_api.h>
#endif

namespace vdscan {

// --- features -------------------------------------------------------------------

ClipFeatures clip_features(const ClipTensor& clip) {
  if (clip.data.size() != kClipElements) throw Error(ErrorKind::ShapeMismatch, "clip has the wrong element count");
  constexpr int S = kClipSize;
  constexpr int C = kClipChannels;
  std::array<double, C> sum{}, sum_sq{}, grad_x{}, grad_y{}, tdiff{};
  const float* d = clip.data.data();
  for (int t = 0; t < kClipLength; ++t) {
    for (int y = 0; y < S; ++y) {
      const float* row = d + ClipTensor::offset(t, y, 0, 0);
      const float* below = y + 1 < S ? d + ClipTensor::offset(t, y + 1, 0, 0) : nullptr;
      const float* prev = t > 0 ? d + ClipTensor::offset(t - 1, y, 0, 0) : nullptr;
      for (int x = 0; x < S; ++x) {
        for (int c = 0; c < C; ++c) {
          const double v = row[x * C + c];
          sum[c] += v;
          sum_sq[c] += v * v;
          if (x + 1 < S) grad_x[c] += std::abs(row[(x + 1) * C + c] - v);
          if (below) grad_y[c] += std::abs(below[x * C + c] - v);
          if (prev) tdiff[c] += std::abs(v - prev[x * C + c]);
        }
      }
    }
  }
  const double n = static_cast<double>(kClipLength) * S * S;
  const double n_grad = static_cast<double>(kClipLength) * S * (S - 1);
  const double n_tdiff = static_cast<double>(kClipLength - 1) * S * S;
  ClipFeatures f{};
  for (int c = 0; c < C; ++c) {
    const double mean = sum[c] / n;
    f[c] = mean;
    f[3 + c] = std::sqrt(std::max(0.0, sum_sq[c] / n - mean * mean));
    f[6 + c] = 0.5 * (grad_x[c] / n_grad + grad_y[c] / n_grad);
    f[9 + c] = tdiff[c] / n_tdiff;
  }
  return f;
}

double LinearWeights::score(const ClipFeatures& features) const {
  double s = bias;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    s += weights[i] * (features[i] - feature_mean[i]) / feature_scale[i];
  }
  return s;
}

double LinearWeights::probability(const ClipFeatures& features) const {
  return 1.0 / (1.0 + std::exp(-score(features)));
}

namespace {

class LinearBackend final : public ModelBackend {
 public:
  explicit LinearBackend(std::shared_ptr<const LinearWeights> weights) : weights_(std::move(weights)) {}
  double predict(const ClipTensor& clip) const override { return weights_->probability(clip_features(clip)); }

 private:
  std::shared_ptr<const LinearWeights> weights_;
};

#ifdef VDSCAN_WITH_ONNXRUNTIME
class OnnxBackend final : public ModelBackend {
 public:
  OnnxBackend(const std::filesystem::path& path, InputLayout layout)
      : env_(ORT_LOGGING_LEVEL_WARNING, "vdscan"), layout_(layout) {
    Ort::SessionOptions options;
    options.SetIntraOpNumThreads(1);
    session_ = std::make_unique<Ort::Session>(env_, path.c_str(), options);
    Ort::AllocatorWithDefaultOptions allocator;
    input_name_ = session_->GetInputNameAllocated(0, allocator).get();
    output_name_ = session_->GetOutputNameAllocated(0, allocator).get();
    const auto shape = session_->GetInputTypeInfo(0).GetTensorTypeAndShapeInfo().GetShape();
    const std::vector<std::int64_t> expected = layout == InputLayout::Nthwc
                                                   ? std::vector<std::int64_t>{1, kClipLength, kClipSize, kClipSize, 3}
                                                   : std::vector<std::int64_t>{1, 3, kClipLength, kClipSize, kClipSize};
    if (shape.size() != expected.size()) throw Error(ErrorKind::ModelLoadError, "graph input rank mismatch");
    for (std::size_t i = 1; i < shape.size(); ++i) {
      if (shape[i] > 0 && shape[i] != expected[i]) throw Error(ErrorKind::ModelLoadError, "graph input shape mismatch");
    }
  }

  double predict(const ClipTensor& clip) const override {
    std::vector<float> input;
    std::vector<std::int64_t> shape;
    if (layout_ == InputLayout::Nthwc) {
      input = clip.data;
      shape = {1, kClipLength, kClipSize, kClipSize, 3};
    } else {
      input.resize(kClipElements);
      const std::size_t plane = static_cast<std::size_t>(kClipLength) * kClipSize * kClipSize;
      for (std::size_t p = 0; p < plane; ++p) {
        for (std::size_t c = 0; c < 3; ++c) input[c * plane + p] = clip.data[p * 3 + c];
      }
      shape = {1, 3, kClipLength, kClipSize, kClipSize};
    }
    const auto memory = Ort::MemoryInfo::CreateCpu(OrtArenaAllocator, OrtMemTypeDefault);
    Ort::Value tensor = Ort::Value::CreateTensor<float>(memory, input.data(), input.size(), shape.data(), shape.size());
    const char* in_names[] = {input_name_.c_str()};
    const char* out_names[] = {output_name_.c_str()};
    auto outputs = session_->Run(Ort::RunOptions{nullptr}, in_names, &tensor, 1, out_names, 1);
    const float* logits = outputs.front().GetTensorData<float>();
    const auto count = outputs.front().GetTensorTypeAndShapeInfo().GetElementCount();
    if (count == 1) return 1.0 / (1.0 + std::exp(-static_cast<double>(logits[0])));
    const double m = std::max<double>(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - m);
    const double e1 = std::exp(logits[1] - m);
    return e1 / (e0 + e1);
  }

 private:
  Ort::Env env_;
  InputLayout layout_;
  std::unique_ptr<Ort::Session> session_;
  std::string input_name_;
  std::string output_name_;
};
#endif

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), ptr);
}

template <std::size_t N>
std::string join(const std::array<double, N>& values) {
  std::string out;
  for (std::size_t i = 0; i < N; ++i) out += (i ? "," : "") + format_double(values[i]);
  return out;
}

template <std::size_t N>
std::array<double, N> parse_vector(const std::string& text, std::string_view key) {
  const auto parts = kv::split(text, ',');
  if (parts.size() != N) {
    throw Error(ErrorKind::ModelLoadError, std::string(key) + " needs " + std::to_string(N) + " values");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    const std::string p = kv::trim(parts[i]);
    const auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), out[i]);
    if (ec != std::errc{} || ptr != p.data() + p.size() || !std::isfinite(out[i])) {
      throw Error(ErrorKind::ModelLoadError, std::string(key) + ": cannot parse '" + p + "'");
    }
  }
  return out;
}

std::map<std::string, std::string> read_kv_or_model_error(const std::filesystem::path& path) {
  try {
    auto entries = kv::read_file(path);
    std::map<std::string, std::string> out;
    for (auto& [k, v] : entries) {
      if (!out.emplace(k, std::move(v)).second) {
        throw Error(ErrorKind::ModelLoadError, path.string() + ": duplicate key '" + k + "'");
      }
    }
    return out;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ModelLoadError) throw;
    throw Error(ErrorKind::ModelLoadError, e.what());
  }
}

std::string require(const std::map<std::string, std::string>& m, const std::string& key,
                    const std::filesystem::path& source) {
  const auto it = m.find(key);
  if (it == m.end() || it->second.empty()) {
    throw Error(ErrorKind::ModelLoadError, source.string() + ": missing key '" + key + "'");
  }
  return it->second;
}

LinearWeights read_linear_weights(const std::filesystem::path& path) {
  const auto m = read_kv_or_model_error(path);
  LinearWeights w;
  w.feature_mean = parse_vector<kFeatureCount>(require(m, "feature_mean", path), "feature_mean");
  w.feature_scale = parse_vector<kFeatureCount>(require(m, "feature_scale", path), "feature_scale");
  w.weights = parse_vector<kFeatureCount>(require(m, "weights", path), "weights");
  w.bias = parse_vector<1>(require(m, "bias", path), "bias")[0];
  for (double s : w.feature_scale) {
    if (!(s > 0.0)) throw Error(ErrorKind::ModelLoadError, path.string() + ": feature_scale must be positive");
  }
  return w;
}

}  // namespace

ModelHandle make_builtin_model(std::string model_id, const NormStats& stats, const LinearWeights& weights) {
  stats.validate();
  ModelHandle m;
  m.model_id = std::move(model_id);
  m.kind = ModelKind::BuiltinLinear;
  m.norm_stats = stats;
  m.linear = std::make_shared<const LinearWeights>(weights);
  m.backend = std::make_shared<const LinearBackend>(m.linear);
  return m;
}

bool external_graph_supported() {
#ifdef VDSCAN_WITH_ONNXRUNTIME
  return true;
#else
  return false;
#endif
}

ModelHandle load_model(const std::filesystem::path& card_path) {
  const auto card = read_kv_or_model_error(card_path);
  ModelHandle m;
  m.model_id = require(card, "model_id", card_path);

  const std::string kind = require(card, "kind", card_path);
  if (kind == "builtin_linear") {
    m.kind = ModelKind::BuiltinLinear;
  } else if (kind == "external_graph") {
    m.kind = ModelKind::ExternalGraph;
  } else {
    throw Error(ErrorKind::ModelLoadError, card_path.string() + ": unknown model kind '" + kind + "'");
  }

  m.norm_stats.mean = parse_vector<3>(require(card, "mean", card_path), "mean");
  m.norm_stats.std = parse_vector<3>(require(card, "std", card_path), "std");
  try {
    m.norm_stats.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::ModelLoadError, card_path.string() + ": " + e.what());
  }

  const auto layout_it = card.find("input_layout");
  const std::string layout = layout_it == card.end() ? "1x16x224x224x3" : layout_it->second;
  if (layout == "1x16x224x224x3" || layout == "NTHWC") {
    m.input_layout = InputLayout::Nthwc;
  } else if (layout == "1x3x16x224x224" || layout == "NCTHW") {
    m.input_layout = InputLayout::Ncthw;
  } else {
    throw Error(ErrorKind::ModelLoadError, card_path.string() + ": unsupported input_layout '" + layout + "'");
  }

  const auto order_it = card.find("class_order");
  if (order_it != card.end() && kv::trim(order_it->second) != "LowVD,HighVD") {
    throw Error(ErrorKind::ModelLoadError,
                card_path.string() + ": class_order must be LowVD,HighVD (index 1 = high visual damage)");
  }

  m.artifact_path = card_path.parent_path() / require(card, "artifact", card_path);
  if (m.kind == ModelKind::BuiltinLinear) {
    m.linear = std::make_shared<const LinearWeights>(read_linear_weights(m.artifact_path));
    m.backend = std::make_shared<const LinearBackend>(m.linear);
    return m;
  }
#ifdef VDSCAN_WITH_ONNXRUNTIME
  try {
    m.backend = std::make_shared<const OnnxBackend>(m.artifact_path, m.input_layout);
  } catch (const Ort::Exception& e) {
    throw Error(ErrorKind::ModelLoadError, m.artifact_path.string() + ": " + e.what());
  }
  return m;
#else
  throw Error(ErrorKind::ModelLoadError,
              card_path.string() + ": external_graph models need a build with ONNX Runtime (VDSCAN_ONNXRUNTIME_ROOT)");
#endif
}

void save_model(const ModelHandle& model, const std::filesystem::path& card_path) {
  const std::filesystem::path dir = card_path.parent_path();
  std::filesystem::path artifact = model.artifact_path.filename();
  if (model.kind == ModelKind::BuiltinLinear) {
    if (!model.linear) throw Error(ErrorKind::ModelLoadError, "builtin model has no weights");
    if (artifact.empty()) artifact = model.model_id + ".weights";
    std::ofstream w(dir / artifact, std::ios::trunc);
    w << "feature_mean = " << join(model.linear->feature_mean) << "\n"
      << "feature_scale = " << join(model.linear->feature_scale) << "\n"
      << "weights = " << join(model.linear->weights) << "\n"
      << "bias = " << format_double(model.linear->bias) << "\n";
    if (!w) throw Error(ErrorKind::IoError, "cannot write " + (dir / artifact).string());
  }
  std::ofstream out(card_path, std::ios::trunc);
  out << "model_id = " << model.model_id << "\n"
      << "kind = " << (model.kind == ModelKind::BuiltinLinear ? "builtin_linear" : "external_graph") << "\n"
      << "mean = " << join(model.norm_stats.mean) << "\n"
      << "std = " << join(model.norm_stats.std) << "\n"
      << "input_layout = " << (model.input_layout == InputLayout::Nthwc ? "1x16x224x224x3" : "1x3x16x224x224") << "\n"
      << "class_order = LowVD,HighVD\n"
      << "artifact = " << artifact.string() << "\n";
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + card_path.string());
}

ClipPrediction predict_clip(const ModelHandle& model, const ClipTensor& clip) {
  if (!model.backend) throw Error(ErrorKind::ModelLoadError, "model " + model.model_id + " is not loaded");
  if (clip.data.size() != kClipElements) throw Error(ErrorKind::ShapeMismatch, "clip is not 16x224x224x3");
  if (!clip.normalized()) throw Error(ErrorKind::NotNormalized, clip.plan.video_id + ": clip is not normalized");
  if (*clip.normalization != model.norm_stats) {
    throw Error(ErrorKind::NotNormalized, clip.plan.video_id + ": clip normalized with statistics other than the model's");
  }
  ClipPrediction p;
  p.plan = clip.plan;
  p.model_id = model.model_id;
  p.prob_high_vd = std::clamp(model.backend->predict(clip), 0.0, 1.0);
  p.label = label_for(p.prob_high_vd);
  return p;
}

// --- training -------------------------------------------------------------------

LinearWeights train_linear(std::span<const LabeledFeatures> samples, const TrainOptions& options) {
  std::vector<int> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) labels.push_back(s.label);
  const std::vector<double> balanced = class_weights(labels);  // rejects single-class input
  const std::vector<double> sample_weight =
      options.class_weighting ? balanced : std::vector<double>(samples.size(), 1.0);

  LinearWeights w;
  const double n = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    double mean = 0.0;
    for (const auto& s : samples) mean += s.features[i];
    mean /= n;
    double var = 0.0;
    for (const auto& s : samples) var += (s.features[i] - mean) * (s.features[i] - mean);
    const double sd = std::sqrt(var / n);
    w.feature_mean[i] = mean;
    w.feature_scale[i] = sd > 1e-12 ? sd : 1.0;
  }

  std::vector<ClipFeatures> standardized(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      standardized[k][i] = (samples[k].features[i] - w.feature_mean[i]) / w.feature_scale[i];
    }
  }

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    Rng rng = make_rng(options.seed, {static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      ClipFeatures grad{};
      double grad_bias = 0.0;
      double weight_sum = 0.0;
      for (std::size_t j = start; j < stop; ++j) {
        const std::size_t k = order[j];
        double z = w.bias;
        for (std::size_t i = 0; i < kFeatureCount; ++i) z += w.weights[i] * standardized[k][i];
        const double p = 1.0 / (1.0 + std::exp(-z));
        const double err = sample_weight[k] * (p - samples[k].label);
        for (std::size_t i = 0; i < kFeatureCount; ++i) grad[i] += err * standardized[k][i];
        grad_bias += err;
        weight_sum += sample_weight[k];
      }
      for (std::size_t i = 0; i < kFeatureCount; ++i) w.weights[i] -= options.learning_rate * grad[i] / weight_sum;
      w.bias -= options.learning_rate * grad_bias / weight_sum;
    }
  }
  return w;
}

ModelHandle train_builtin(std::span<const ClipTensor> clips, std::span<const int> labels, const NormStats& stats,
                          const TrainOptions& options, std::string model_id) {
  if (clips.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, "one label per clip is required");
  std::vector<LabeledFeatures> samples;
  samples.reserve(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) samples.push_back({clip_features(clips[i]), labels[i]});
  return make_builtin_model(std::move(model_id), stats, train_linear(samples, options));
}

ParityResult check_parity(const ModelHandle& model, const std::filesystem::path& parity_file) {
  std::ifstream in(parity_file);
  if (!in) throw Error(ErrorKind::UnreadableFile, "cannot open " + parity_file.string());
  ParityResult result;
  std::size_t agree = 0;
  std::string line;
  while (std::getline(in, line)) {
    const std::string trimmed = kv::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto cols = kv::split(trimmed, '\t');
    if (cols.size() != 2) throw Error(ErrorKind::CorruptHeader, parity_file.string() + ": expected clip_file<TAB>prob");
    if (cols[0] == "clip_file") continue;  // header
    ClipTensor clip;
    clip.data = read_clip_file(parity_file.parent_path() / cols[0]);
    clip.plan.video_id = cols[0];
    const double recorded = std::stod(cols[1]);
    const double prob = predict_clip(model, normalize(std::move(clip), model.norm_stats)).prob_high_vd;
    result.max_abs_diff = std::max(result.max_abs_diff, std::abs(prob - recorded));
    agree += label_for(prob) == label_for(recorded) ? 1 : 0;
    ++result.n;
  }
  result.agreement = result.n == 0 ? 0.0 : static_cast<double>(agree) / static_cast<double>(result.n);
  return result;
}

}  // namespace vdscan
