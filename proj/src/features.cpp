#include "dropkit/features.hpp"

#include "dropkit/log_core.hpp"

namespace dropkit {

std::string_view to_string(FeatureMode mode) {
  return mode == FeatureMode::handcrafted ? "handcrafted" : "embedding";
}

Eigen::VectorXd featurize(const PredictionInstance& instance, const FeaturizerConfig& config,
                          EmbeddingClient* embed) {
  if (config.chapter_count < 1) throw ConfigError("featurizer chapter_count must be >= 1");
  const double L = config.chapter_count;
  Eigen::VectorXd out(config.dimension());
  if (config.mode == FeatureMode::handcrafted) {
    const auto stats = transcript_stats(instance.transcript);
    const double elapsed = instance.history_start - 1;
    const double per_chapter = elapsed > 0 ? double(stats.student_messages) / elapsed : 0.0;
    const double coverage = elapsed > 0 ? double(stats.chapters_engaged) / elapsed : 0.0;
    out << double(stats.student_messages), stats.mean_message_length(), double(stats.chapters_engaged),
        double(stats.student_chars), per_chapter, coverage, instance.history_start / L, instance.prediction_end / L;
    return out;
  }
  if (!embed) throw ConfigError("embedding features requested without an embedding client");
  if (embed->dimension() != config.embed_dim)
    throw DimensionMismatch("embedding client dimension " + std::to_string(embed->dimension()) +
                            " does not match featurizer dimension " + std::to_string(config.embed_dim));
  Eigen::VectorXd h = embed->embed(instance.transcript);
  if (h.size() != config.embed_dim) throw DimensionMismatch("embedding has unexpected dimension");
  out.head(config.embed_dim) = h;
  out(config.embed_dim) = instance.history_start / L;
  out(config.embed_dim + 1) = instance.prediction_end / L;
  return out;
}

Eigen::MatrixXd Featurizer::raw(const std::vector<PredictionInstance>& instances, EmbeddingClient* embed) const {
  Eigen::MatrixXd out(config_.dimension(), static_cast<Eigen::Index>(instances.size()));
  for (std::size_t j = 0; j < instances.size(); ++j)
    out.col(static_cast<Eigen::Index>(j)) = featurize(instances[j], config_, embed);
  return out;
}

Eigen::MatrixXd Featurizer::fit_transform(const std::vector<PredictionInstance>& train, EmbeddingClient* embed) {
  const Eigen::MatrixXd samples = raw(train, embed);
  standardizer_ = Standardizer<double>::fit(samples);
  return standardizer_.apply(samples);
}

Eigen::MatrixXd Featurizer::transform(const std::vector<PredictionInstance>& instances,
                                      EmbeddingClient* embed) const {
  return standardizer_.apply(raw(instances, embed));
}

}  // namespace dropkit
