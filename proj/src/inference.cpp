#include "svc/inference.hpp"

#include "svc/trainer.hpp"

namespace svc {

ConversionModel ConversionModel::from_checkpoint(const Checkpoint& ckpt) {
  ConversionModel m;
  m.config_ = run_config_from_json(ckpt.meta.at("config"));
  m.singers_ = ckpt.meta.at("singers").get<std::vector<std::string>>();
  m.codebook_ = {ckpt.blob("codebook.centers").clone(),
                 ckpt.meta.at("codebook_temperature").get<double>()};
  m.model_ = SvcModel(m.config_.model);
  restore_module(ckpt, "model", *m.model_);
  m.model_->eval();
  return m;
}

ConversionModel ConversionModel::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ValidationError("checkpoint not found: " + path.string());
  }
  return from_checkpoint(Checkpoint::load(path));
}

int64_t ConversionModel::singer_index(const std::string& singer) const {
  for (size_t i = 0; i < singers_.size(); ++i) {
    if (singers_[i] == singer) return static_cast<int64_t>(i);
  }
  std::string known;
  for (const auto& s : singers_) known += (known.empty() ? "" : ", ") + s;
  throw ValidationError("unknown singer '" + singer + "'; known singers: " + known);
}

AudioClip ConversionModel::convert(const AudioClip& source, const std::string& singer,
                                   const ConversionOptions& options) const {
  const int64_t index = singer_index(singer);
  validate_clip(source);
  if (!(options.f0_ratio > 0.0)) throw ValidationError("f0 ratio must be positive");
  torch::NoGradGuard no_grad;

  const auto mel = extract_mel(source);
  F0Config f0c;
  f0c.voicing_threshold = config_.features.voicing_threshold;
  f0c.rms_gate = config_.features.rms_gate;
  auto pitch = extract_f0(source, f0c);
  for (auto& f : pitch.f0_hz) f = static_cast<float>(f * options.f0_ratio);

  const auto content = options.content ? *options.content : pseudo_content(mel, codebook_);
  const auto reference =
      options.reference
          ? *options.reference
          : reference_feature(config_.features.reference, mel, content, options.source_path);
  const int64_t T = mel.num_frames();
  if (content.num_frames() != T || reference.num_frames() != T) {
    throw ValidationError("content/reference features must have " + std::to_string(T) +
                          " frames");
  }
  const auto a = encode_content(model_, content);
  const auto b = encode_reference(model_, reference);
  const EncoderOutput enc{torch::cat({a, b}, 1).unsqueeze(0), a.size(1)};
  AudioClip out;
  out.samples = decode(model_, enc, index, pitch);
  return out;
}

}  // namespace svc
