#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

#include "dropkit/clients.hpp"
#include "dropkit/dataset.hpp"
#include "dropkit/error.hpp"

namespace dropkit {

enum class FeatureMode { handcrafted, embedding };

std::string_view to_string(FeatureMode mode);

struct FeaturizerConfig {
  FeatureMode mode = FeatureMode::handcrafted;
  int chapter_count = 0;
  int embed_dim = 0;
  std::string embed_tag;

  int dimension() const { return mode == FeatureMode::handcrafted ? 8 : embed_dim + 2; }
};

/// Raw (unstandardized) features for one instance:
///  handcrafted: [student messages, mean message length, chapters engaged, total characters,
///                messages per elapsed chapter, engaged fraction of elapsed chapters, C_h/L, C_p/L]
///  (elapsed chapters = C_h - 1; both ratios are 0 when nothing has elapsed)
///  embedding:   [embed(transcript)..., C_h/L, C_p/L]
Eigen::VectorXd featurize(const PredictionInstance& instance, const FeaturizerConfig& config,
                          EmbeddingClient* embed = nullptr);

/// Per-coordinate affine standardization fitted on training samples only (population
/// variance). Constant coordinates are centred and left unscaled.
template <typename Scalar>
struct Standardizer {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector mean;
  Vector scale;

  static Standardizer fit(const Eigen::Ref<const Matrix>& samples) {
    if (samples.cols() == 0) throw ValidationError("cannot standardize an empty sample");
    Standardizer s;
    s.mean = samples.rowwise().mean();
    const Matrix centred = samples.colwise() - s.mean;
    s.scale = (centred.array().square().rowwise().sum() / Scalar(samples.cols())).sqrt().matrix();
    for (Eigen::Index i = 0; i < s.scale.size(); ++i)
      if (!(s.scale(i) > Scalar(0))) s.scale(i) = Scalar(1);
    return s;
  }

  Matrix apply(const Eigen::Ref<const Matrix>& samples) const {
    if (samples.rows() != mean.size())
      throw DimensionMismatch("standardizer fitted on " + std::to_string(mean.size()) +
                              " features, got " + std::to_string(samples.rows()));
    return ((samples.colwise() - mean).array().colwise() / scale.array()).matrix();
  }
};

/// Feature extraction plus its fitted standardization.
class Featurizer {
public:
  Featurizer() = default;
  explicit Featurizer(FeaturizerConfig config) : config_(std::move(config)) {}

  /// Raw feature matrix, one column per instance.
  Eigen::MatrixXd raw(const std::vector<PredictionInstance>& instances, EmbeddingClient* embed) const;

  /// Fits the standardizer on `train` and returns the standardized training matrix.
  Eigen::MatrixXd fit_transform(const std::vector<PredictionInstance>& train, EmbeddingClient* embed);
  Eigen::MatrixXd transform(const std::vector<PredictionInstance>& instances, EmbeddingClient* embed) const;

  const FeaturizerConfig& config() const { return config_; }
  const Standardizer<double>& standardizer() const { return standardizer_; }
  void set_standardizer(Standardizer<double> s) { standardizer_ = std::move(s); }

private:
  FeaturizerConfig config_;
  Standardizer<double> standardizer_;
};

}  // namespace dropkit
